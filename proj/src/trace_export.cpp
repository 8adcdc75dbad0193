#include "motionlm/trace_export.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "motionlm/checkpoint.hpp"

namespace motionlm {

namespace {

const char* kPalette[] = {"#1b6ca8", "#c0392b", "#1e8449", "#8e44ad", "#d68910", "#117a65"};

std::vector<std::vector<Se2Pose>> integrate_all(const std::vector<Trajectory>& trajs) {
  if (trajs.empty()) throw DataError("no trajectories to export");
  std::vector<std::vector<Se2Pose>> out;
  out.reserve(trajs.size());
  for (const auto& t : trajs) out.push_back(integrate_se2(t));
  return out;
}

}  // namespace

std::string traces_to_csv(const std::vector<Trajectory>& trajs) {
  auto paths = integrate_all(trajs);
  std::ostringstream csv;
  csv << "traj,step,x,z,heading\n";
  csv.precision(9);
  for (size_t i = 0; i < paths.size(); ++i)
    for (size_t s = 0; s < paths[i].size(); ++s)
      csv << i << ',' << s << ',' << paths[i][s].x << ',' << paths[i][s].z << ','
          << paths[i][s].heading << '\n';
  return csv.str();
}

void write_traces_csv(const std::string& path, const std::vector<Trajectory>& trajs) {
  atomic_write_text(path, traces_to_csv(trajs));
}

std::string traces_to_svg(const std::vector<Trajectory>& trajs, double extent) {
  auto paths = integrate_all(trajs);
  double lo_x = 0, hi_x = 0, lo_z = 0, hi_z = 0;
  if (extent > 0) {
    lo_x = lo_z = -extent / 2;
    hi_x = hi_z = extent / 2;
  } else {
    bool first = true;
    for (const auto& p : paths)
      for (const auto& q : p) {
        if (first || q.x < lo_x) lo_x = q.x;
        if (first || q.x > hi_x) hi_x = q.x;
        if (first || q.z < lo_z) lo_z = q.z;
        if (first || q.z > hi_z) hi_z = q.z;
        first = false;
      }
    double margin = std::max(0.5, 0.05 * std::max(hi_x - lo_x, hi_z - lo_z));
    lo_x -= margin;
    hi_x += margin;
    lo_z -= margin;
    hi_z += margin;
  }

  const double size = 640.0;
  double span = std::max(hi_x - lo_x, hi_z - lo_z);
  if (span <= 0) span = 1.0;
  auto px = [&](double x) { return (x - lo_x) / span * size; };
  // SVG y grows downward; world z grows upward
  auto py = [&](double z) { return size - (z - lo_z) / span * size; };

  std::ostringstream svg;
  svg.precision(5);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << size << ' ' << size
      << "\">\n<rect width=\"" << size << "\" height=\"" << size << "\" fill=\"white\"/>\n";

  // time encoding: each trace is drawn in chunks of rising opacity
  const int kChunks = 24;
  for (size_t i = 0; i < paths.size(); ++i) {
    const auto& p = paths[i];
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    int n = static_cast<int>(p.size());
    int chunks = std::min(kChunks, n - 1);
    if (chunks < 1) chunks = 1;
    for (int c = 0; c < chunks; ++c) {
      int a = c * (n - 1) / chunks;
      int b = std::max(a + 1, (c + 1) * (n - 1) / chunks);
      double opacity = 0.15 + 0.85 * (c + 1) / chunks;
      svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" "
          << "stroke-opacity=\"" << opacity << "\" points=\"";
      for (int s = a; s <= b && s < n; ++s) {
        if (s > a) svg << ' ';
        svg << px(p[s].x) << ',' << py(p[s].z);
      }
      svg << "\"/>\n";
    }
    // start marker
    svg << "<circle cx=\"" << px(p[0].x) << "\" cy=\"" << py(p[0].z)
        << "\" r=\"3\" fill=\"" << color << "\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_traces_svg(const std::string& path, const std::vector<Trajectory>& trajs,
                      double extent) {
  atomic_write_text(path, traces_to_svg(trajs, extent));
}

}  // namespace motionlm
