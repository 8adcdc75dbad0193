#include "motionlm/jsonl.hpp"

#include <sstream>

#include "json.hpp"
#include "motionlm/binning.hpp"
#include "motionlm/checkpoint.hpp"

namespace motionlm {

using nlohmann::json;
using nlohmann::ordered_json;

std::string corpus_to_jsonl(const std::vector<CaptionedTrajectory>& corpus) {
  std::ostringstream out;
  for (const auto& s : corpus) {
    s.trajectory.validate();
    ordered_json o;
    o["embodiment"] = s.trajectory.embodiment.name();
    o["dt"] = s.trajectory.dt;
    auto poses = ordered_json::array();
    for (int t = 0; t < s.trajectory.len(); ++t) {
      auto row = ordered_json::array();
      for (int d = 0; d < s.trajectory.dim(); ++d) row.push_back(s.trajectory.poses(t, d));
      poses.push_back(std::move(row));
    }
    o["poses"] = std::move(poses);
    o["caption"] = s.caption;
    if (s.goal_cell)
      o["goal_cell"] = {(*s.goal_cell)[0], (*s.goal_cell)[1]};
    else
      o["goal_cell"] = nullptr;
    o["gait"] = s.gait ? json(gait_name(*s.gait)) : json(nullptr);
    out << o.dump() << '\n';
  }
  return out.str();
}

void write_corpus_jsonl(const std::string& path, const std::vector<CaptionedTrajectory>& corpus) {
  atomic_write_text(path, corpus_to_jsonl(corpus));
}

std::vector<CaptionedTrajectory> read_corpus_jsonl(const std::string& path) {
  std::istringstream in(read_text_file(path));
  std::vector<CaptionedTrajectory> corpus;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json o;
    try {
      o = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    CaptionedTrajectory s;
    try {
      const auto& poses = o.at("poses");
      int T = static_cast<int>(poses.size());
      if (T == 0) throw DataError("empty poses");
      int D = static_cast<int>(poses.at(0).size());
      s.trajectory.embodiment = EmbodimentSpec::from_name(o.at("embodiment").get<std::string>(), D);
      s.trajectory.dt = o.at("dt").get<double>();
      s.trajectory.poses = nn::Tensor({T, D});
      for (int t = 0; t < T; ++t) {
        const auto& row = poses.at(t);
        if (static_cast<int>(row.size()) != D) throw DataError("ragged pose rows");
        for (int d = 0; d < D; ++d) s.trajectory.poses(t, d) = row.at(d).get<float>();
      }
      s.caption = o.at("caption").get<std::string>();
      if (o.contains("goal_cell") && !o.at("goal_cell").is_null()) {
        auto gc = o.at("goal_cell");
        s.goal_cell = std::array<int, 2>{gc.at(0).get<int>(), gc.at(1).get<int>()};
      }
      if (o.contains("gait") && !o.at("gait").is_null())
        s.gait = gait_from_name(o.at("gait").get<std::string>());
      s.trajectory.validate();
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    corpus.push_back(std::move(s));
  }
  return corpus;
}

std::vector<DimStats> corpus_dim_stats(const std::vector<CaptionedTrajectory>& corpus) {
  if (corpus.empty()) throw DataError("stats of empty corpus");
  int D = corpus.front().trajectory.dim();
  std::vector<std::vector<float>> values(D);
  for (const auto& s : corpus) {
    if (s.trajectory.dim() != D) throw DataError("stats: mixed dims in corpus");
    for (int t = 0; t < s.trajectory.len(); ++t)
      for (int d = 0; d < D; ++d) values[d].push_back(s.trajectory.poses(t, d));
  }
  std::vector<DimStats> stats(D);
  for (int d = 0; d < D; ++d) {
    stats[d].q01 = interp_quantile(values[d], 0.01);
    stats[d].q99 = interp_quantile(values[d], 0.99);
  }
  return stats;
}

void write_stats_sidecar(const std::string& path, const std::vector<CaptionedTrajectory>& corpus) {
  auto stats = corpus_dim_stats(corpus);
  ordered_json o;
  o["count"] = corpus.size();
  auto dims = ordered_json::array();
  for (const auto& s : stats) dims.push_back({{"q01", s.q01}, {"q99", s.q99}});
  o["dims"] = std::move(dims);
  atomic_write_text(path, o.dump(2) + "\n");
}

std::vector<DimStats> read_stats_sidecar(const std::string& path) {
  auto o = json::parse(read_text_file(path));
  std::vector<DimStats> stats;
  for (const auto& d : o.at("dims"))
    stats.push_back({d.at("q01").get<double>(), d.at("q99").get<double>()});
  return stats;
}

}  // namespace motionlm
