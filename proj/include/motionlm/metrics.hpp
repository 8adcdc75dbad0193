// Metric suite over extracted features and generated text/trajectories:
// Frechet distance (FID), Diversity, Multimodality, R-Precision + MMDist,
// goal-reaching Success %, corpus BLEU@N, ROUGE-L F1, and percentile
// bootstrap confidence intervals. All metrics are pure functions of their
// inputs and an explicit seed.
#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "motionlm/common.hpp"
#include "motionlm/vocab.hpp"

namespace motionlm {

struct MetricReport {
  std::string name;
  double value = 0;
  double ci_half = 0;  // 95% half-width; 0 when not bootstrapped
  nlohmann::json config = nlohmann::json::object();
};

using FeatureSet = std::vector<Eigen::VectorXf>;

// ||mu1-mu2||^2 + tr(S1 + S2 - 2 sqrt(S1^(1/2) S2 S1^(1/2))), sample
// covariances regularized by eps*I, matrix root via eigendecomposition with
// negative-eigenvalue clamping. Needs >= 2 samples per side.
double frechet_distance(const FeatureSet& a, const FeatureSet& b, double eps = 1e-6);
MetricReport fid(const FeatureSet& real, const FeatureSet& generated, double eps = 1e-6,
                 int resamples = 0, uint64_t seed = 0);

// Mean distance over n_pairs disjoint pairs drawn from a seeded shuffle.
MetricReport diversity(const FeatureSet& features, int n_pairs, uint64_t seed);

// Per prompt: an even number of generations paired (0,1),(2,3),...; the mean
// pair distance, averaged over prompts.
MetricReport multimodality(const std::vector<FeatureSet>& per_prompt);

// 32-way retrieval: for output i the matched condition competes with
// n_candidates-1 sampled distractors; Top-k counts outputs whose match has
// fewer than k strictly-closer candidates. MMDist is the mean matched-pair
// distance. CIs bootstrap over outputs.
struct RetrievalReport {
  MetricReport top1, top2, top3, mmdist;
};
RetrievalReport r_precision(const FeatureSet& outputs, const FeatureSet& conditions,
                            int n_candidates = 32, uint64_t seed = 0, int resamples = 1000);

// Terminal positions of sampled rollouts for one goal cell.
struct GoalRollouts {
  int row = 0, col = 0;
  std::vector<std::array<double, 2>> terminal_xz;
};
// Percent of rollouts ending inside their goal cell.
MetricReport success_rate(const std::vector<GoalRollouts>& rollouts, const GridSpec& grid,
                          int resamples = 0, uint64_t seed = 0);

// Corpus BLEU@max_n (0-100, brevity penalty, whitespace tokens) and mean
// ROUGE-L F1 (0-1). CIs bootstrap over sentence pairs when resamples > 0.
MetricReport bleu(const std::vector<std::string>& candidates,
                  const std::vector<std::string>& references, int max_n = 4,
                  int resamples = 0, uint64_t seed = 0);
MetricReport rouge_l(const std::vector<std::string>& candidates,
                     const std::vector<std::string>& references, int resamples = 0,
                     uint64_t seed = 0);

// 95% percentile-bootstrap half-width of fn over index resamples; fn maps a
// with-replacement index multiset [0,n) to the metric value.
double bootstrap_half_width(const std::function<double(const std::vector<int>&)>& fn, int n,
                            int resamples, uint64_t seed);
// Convenience: bootstrap the mean of scalar samples.
double bootstrap_mean_half_width(const std::vector<double>& values, int resamples,
                                 uint64_t seed);

// Reports as a JSON array and a flat CSV (name,value,ci95,config).
void write_metric_reports(const std::vector<MetricReport>& reports,
                          const std::string& json_path, const std::string& csv_path);

}  // namespace motionlm
