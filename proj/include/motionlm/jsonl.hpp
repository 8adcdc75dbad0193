// Corpus persistence: one JSON object per line with fields emitted in the
// order {embodiment, dt, poses, caption, goal_cell, gait}; readers accept
// any field order. The stats sidecar carries per-dimension 1st/99th
// quantiles for fitting the binning baseline.
#pragma once

#include <string>
#include <vector>

#include "motionlm/motion.hpp"

namespace motionlm {

std::string corpus_to_jsonl(const std::vector<CaptionedTrajectory>& corpus);
void write_corpus_jsonl(const std::string& path, const std::vector<CaptionedTrajectory>& corpus);
std::vector<CaptionedTrajectory> read_corpus_jsonl(const std::string& path);

struct DimStats {
  double q01 = 0, q99 = 0;
};

// Linear-interpolated empirical quantiles per pose dimension over the corpus.
std::vector<DimStats> corpus_dim_stats(const std::vector<CaptionedTrajectory>& corpus);
void write_stats_sidecar(const std::string& path, const std::vector<CaptionedTrajectory>& corpus);
std::vector<DimStats> read_stats_sidecar(const std::string& path);

}  // namespace motionlm
