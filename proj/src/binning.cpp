#include "motionlm/binning.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace motionlm {

double interp_quantile(std::vector<float> values, double p) {
  if (values.empty()) throw DataError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  double rank = p * (values.size() - 1);
  size_t lo = static_cast<size_t>(rank);
  size_t hi = std::min(lo + 1, values.size() - 1);
  double frac = rank - static_cast<double>(lo);
  return (1.0 - frac) * values[lo] + frac * values[hi];
}

void BinningScheme::check_fitted() const {
  if (!fitted()) throw ConfigError("binning scheme not fitted");
}

int BinningScheme::bin_index(int d, double v) const {
  check_fitted();
  double w = width(d);
  int idx = static_cast<int>(std::floor((v - dims[d].q01) / w));
  return std::clamp(idx, 0, bins - 1);
}

double BinningScheme::bin_center(int d, int index) const {
  check_fitted();
  if (index < 0 || index >= bins) throw DataError("bin index out of range");
  return dims[d].q01 + (index + 0.5) * width(d);
}

std::string BinningScheme::encode_pose(const std::vector<float>& pose, bool terminate) const {
  check_fitted();
  if (pose.size() != dims.size()) throw DataError("binning: pose dim mismatch");
  std::ostringstream out;
  out << (terminate ? 1 : 0);
  for (size_t d = 0; d < pose.size(); ++d)
    out << ' ' << bin_index(static_cast<int>(d), pose[d]);
  return out.str();
}

std::vector<float> BinningScheme::decode_pose(const std::string& symbols) const {
  check_fitted();
  std::istringstream in(symbols);
  int terminate;
  if (!(in >> terminate)) throw DataError("binning: empty symbol string");
  std::vector<float> pose;
  int idx;
  while (in >> idx) pose.push_back(static_cast<float>(bin_center(static_cast<int>(pose.size()), idx)));
  if (pose.size() != dims.size()) throw DataError("binning: symbol count mismatch");
  return pose;
}

std::string BinningScheme::encode_trajectory(const Trajectory& traj) const {
  check_fitted();
  traj.validate();
  if (traj.dim() != static_cast<int>(dims.size())) throw DataError("binning: dim mismatch");
  std::ostringstream out;
  for (int t = 0; t < traj.len(); ++t) {
    if (t) out << ' ';
    out << (t + 1 == traj.len() ? 1 : 0);
    for (int d = 0; d < traj.dim(); ++d) out << ' ' << bin_index(d, traj.poses(t, d));
  }
  return out.str();
}

Trajectory BinningScheme::decode_trajectory(const std::string& symbols,
                                            const EmbodimentSpec& embodiment,
                                            double dt) const {
  check_fitted();
  int D = static_cast<int>(dims.size());
  if (embodiment.dim != D) throw DataError("binning: embodiment dim mismatch");
  std::istringstream in(symbols);
  std::vector<float> flat;
  int steps = 0;
  while (true) {
    int terminate;
    if (!(in >> terminate)) {
      if (steps == 0) throw DataError("binning: no steps to decode");
      break;  // ran out without a terminate flag; accept what we have
    }
    for (int d = 0; d < D; ++d) {
      int idx;
      if (!(in >> idx)) throw DataError("binning: truncated step");
      flat.push_back(static_cast<float>(bin_center(d, idx)));
    }
    ++steps;
    if (terminate) break;
  }
  Trajectory traj;
  traj.embodiment = embodiment;
  traj.dt = dt;
  traj.poses = nn::Tensor({steps, D}, std::move(flat));
  return traj;
}

BinningScheme fit_binning(const std::vector<std::vector<float>>& per_dim_values,
                          const std::vector<std::string>& names) {
  if (per_dim_values.empty()) throw DataError("binning: nothing to fit");
  BinningScheme scheme;
  for (size_t d = 0; d < per_dim_values.size(); ++d) {
    BinningScheme::Dim dim;
    if (d < names.size()) {
      dim.name = names[d];
    } else if (per_dim_values.size() == kRobotDim) {
      dim.name = std::array<const char*, 3>{"dx", "dy", "dpsi"}[d];
    } else {
      dim.name = "d" + std::to_string(d);
    }
    dim.q01 = interp_quantile(per_dim_values[d], 0.01);
    dim.q99 = interp_quantile(per_dim_values[d], 0.99);
    if (!(dim.q01 < dim.q99))
      throw DataError("binning: degenerate quantile range on " + dim.name);
    scheme.dims.push_back(std::move(dim));
  }
  return scheme;
}

BinningScheme fit_binning(const std::vector<CaptionedTrajectory>& corpus) {
  if (corpus.empty()) throw DataError("binning: empty corpus");
  int D = corpus.front().trajectory.dim();
  std::vector<std::vector<float>> values(D);
  for (const auto& s : corpus) {
    if (s.trajectory.dim() != D) throw DataError("binning: mixed dims in corpus");
    for (int t = 0; t < s.trajectory.len(); ++t)
      for (int d = 0; d < D; ++d) values[d].push_back(s.trajectory.poses(t, d));
  }
  return fit_binning(values);
}

}  // namespace motionlm
