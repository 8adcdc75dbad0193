#include "motionlm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "motionlm/checkpoint.hpp"

namespace motionlm {

namespace {

void check_features(const FeatureSet& s, const char* what) {
  if (s.empty()) throw DataError(std::string(what) + ": empty feature set");
  int f = static_cast<int>(s[0].size());
  for (const auto& v : s) {
    if (v.size() != f) throw DataError(std::string(what) + ": inconsistent feature dims");
    for (int i = 0; i < f; ++i)
      if (!std::isfinite(v(i))) throw NumericError(std::string(what) + ": non-finite feature");
  }
}

Eigen::VectorXd mean_of(const FeatureSet& s) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(s[0].size());
  for (const auto& v : s) mu += v.cast<double>();
  return mu / static_cast<double>(s.size());
}

Eigen::MatrixXd sample_cov(const FeatureSet& s, const Eigen::VectorXd& mu) {
  int f = static_cast<int>(s[0].size());
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(f, f);
  for (const auto& v : s) {
    Eigen::VectorXd d = v.cast<double>() - mu;
    cov.noalias() += d * d.transpose();
  }
  return cov / static_cast<double>(s.size() - 1);
}

// PSD root by eigendecomposition; tiny negative eigenvalues clamp to 0.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (m + m.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

double euclid(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
  return (a.cast<double>() - b.cast<double>()).norm();
}

std::vector<std::string> word_tokens(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

// corpus BLEU on pre-tokenized sentences restricted to `idx`
double corpus_bleu(const std::vector<std::vector<std::string>>& cands,
                   const std::vector<std::vector<std::string>>& refs, int max_n,
                   const std::vector<int>& idx) {
  std::vector<double> log_p;
  for (int n = 1; n <= max_n; ++n) {
    int64_t clipped = 0, total = 0;
    for (int i : idx) {
      const auto& c = cands[i];
      const auto& r = refs[i];
      std::map<std::vector<std::string>, int> cand_counts, ref_counts;
      for (size_t j = 0; j + n <= c.size(); ++j)
        cand_counts[std::vector<std::string>(c.begin() + j, c.begin() + j + n)]++;
      for (size_t j = 0; j + n <= r.size(); ++j)
        ref_counts[std::vector<std::string>(r.begin() + j, r.begin() + j + n)]++;
      for (const auto& [gram, cnt] : cand_counts) {
        auto it = ref_counts.find(gram);
        clipped += std::min(cnt, it == ref_counts.end() ? 0 : it->second);
        total += cnt;
      }
    }
    if (total == 0 || clipped == 0) return 0.0;
    log_p.push_back(std::log(static_cast<double>(clipped) / total));
  }
  int64_t cand_len = 0, ref_len = 0;
  for (int i : idx) {
    cand_len += static_cast<int64_t>(cands[i].size());
    ref_len += static_cast<int64_t>(refs[i].size());
  }
  double bp = cand_len >= ref_len
                  ? 1.0
                  : std::exp(1.0 - static_cast<double>(ref_len) / cand_len);
  double mean_log = 0;
  for (double lp : log_p) mean_log += lp;
  mean_log /= max_n;
  return 100.0 * bp * std::exp(mean_log);
}

int lcs_len(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (size_t i = 1; i <= a.size(); ++i) {
    for (size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double mean_rouge_l(const std::vector<std::vector<std::string>>& cands,
                    const std::vector<std::vector<std::string>>& refs,
                    const std::vector<int>& idx) {
  double sum = 0;
  for (int i : idx) {
    int l = lcs_len(cands[i], refs[i]);
    if (cands[i].empty() || refs[i].empty() || l == 0) continue;
    double p = static_cast<double>(l) / cands[i].size();
    double r = static_cast<double>(l) / refs[i].size();
    sum += 2.0 * p * r / (p + r);
  }
  return idx.empty() ? 0.0 : sum / idx.size();
}

std::vector<int> iota_idx(int n) {
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

void check_text_pairs(const std::vector<std::string>& cands,
                      const std::vector<std::string>& refs) {
  if (cands.empty()) throw DataError("empty candidate corpus");
  if (cands.size() != refs.size())
    throw DataError("candidate/reference count mismatch");
  for (const auto& c : cands)
    if (word_tokens(c).empty()) throw DataError("empty candidate sentence");
}

}  // namespace

double frechet_distance(const FeatureSet& a, const FeatureSet& b, double eps) {
  check_features(a, "fid");
  check_features(b, "fid");
  if (a.size() < 2 || b.size() < 2) throw DataError("fid needs >= 2 samples per set");
  if (a[0].size() != b[0].size()) throw DataError("fid feature dims differ");
  int f = static_cast<int>(a[0].size());
  Eigen::VectorXd mu1 = mean_of(a), mu2 = mean_of(b);
  Eigen::MatrixXd s1 = sample_cov(a, mu1) + eps * Eigen::MatrixXd::Identity(f, f);
  Eigen::MatrixXd s2 = sample_cov(b, mu2) + eps * Eigen::MatrixXd::Identity(f, f);
  Eigen::MatrixXd r1 = psd_sqrt(s1);
  // tr sqrt(S1^1/2 S2 S1^1/2); symmetrize against rounding before the root
  Eigen::MatrixXd inner = r1 * s2 * r1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (inner + inner.transpose()));
  if (es.info() != Eigen::Success) throw NumericError("eigendecomposition failed");
  double tr_sqrt = es.eigenvalues().cwiseMax(0.0).cwiseSqrt().sum();
  double d2 = (mu1 - mu2).squaredNorm() + s1.trace() + s2.trace() - 2.0 * tr_sqrt;
  return std::max(0.0, d2);
}

MetricReport fid(const FeatureSet& real, const FeatureSet& generated, double eps,
                 int resamples, uint64_t seed) {
  MetricReport rep;
  rep.name = "fid";
  rep.value = frechet_distance(real, generated, eps);
  rep.config = {{"n_real", real.size()}, {"n_generated", generated.size()}, {"eps", eps}};
  if (resamples > 0) {
    // resample the generated side against the fixed real statistics
    int n = static_cast<int>(generated.size());
    rep.ci_half = bootstrap_half_width(
        [&](const std::vector<int>& idx) {
          FeatureSet g;
          g.reserve(idx.size());
          for (int i : idx) g.push_back(generated[i]);
          return frechet_distance(real, g, eps);
        },
        n, resamples, seed);
  }
  return rep;
}

MetricReport diversity(const FeatureSet& features, int n_pairs, uint64_t seed) {
  check_features(features, "diversity");
  if (n_pairs < 1) throw ConfigError("diversity needs n_pairs >= 1");
  if (static_cast<int>(features.size()) < 2 * n_pairs)
    throw DataError("diversity needs at least 2*n_pairs features");
  Rng rng(seed);
  std::vector<int> perm = iota_idx(static_cast<int>(features.size()));
  rng.shuffle(perm);
  std::vector<double> dists(n_pairs);
  for (int i = 0; i < n_pairs; ++i)
    dists[i] = euclid(features[perm[2 * i]], features[perm[2 * i + 1]]);
  MetricReport rep;
  rep.name = "diversity";
  rep.value = std::accumulate(dists.begin(), dists.end(), 0.0) / n_pairs;
  if (n_pairs >= 2)
    rep.ci_half = bootstrap_mean_half_width(dists, 1000, splitmix64(seed ^ 0xd1));
  rep.config = {{"n_pairs", n_pairs}, {"n_features", features.size()}};
  return rep;
}

MetricReport multimodality(const std::vector<FeatureSet>& per_prompt) {
  if (per_prompt.empty()) throw DataError("multimodality needs at least one prompt");
  std::vector<double> per_prompt_mean;
  for (const auto& set : per_prompt) {
    check_features(set, "multimodality");
    if (set.size() < 2 || set.size() % 2 != 0)
      throw DataError("multimodality needs an even number (>= 2) of samples per prompt");
    double sum = 0;
    int pairs = static_cast<int>(set.size()) / 2;
    for (int i = 0; i < pairs; ++i) sum += euclid(set[2 * i], set[2 * i + 1]);
    per_prompt_mean.push_back(sum / pairs);
  }
  MetricReport rep;
  rep.name = "multimodality";
  rep.value = std::accumulate(per_prompt_mean.begin(), per_prompt_mean.end(), 0.0) /
              per_prompt_mean.size();
  if (per_prompt_mean.size() > 1)
    rep.ci_half = bootstrap_mean_half_width(per_prompt_mean, 1000, 0xabcd);
  rep.config = {{"n_prompts", per_prompt.size()},
                {"samples_per_prompt", per_prompt[0].size()}};
  return rep;
}

RetrievalReport r_precision(const FeatureSet& outputs, const FeatureSet& conditions,
                            int n_candidates, uint64_t seed, int resamples) {
  check_features(outputs, "r_precision");
  check_features(conditions, "r_precision");
  if (outputs.size() != conditions.size())
    throw DataError("r_precision needs matched output/condition sets");
  int n = static_cast<int>(outputs.size());
  if (n < n_candidates) throw DataError("r_precision needs >= n_candidates pairs");
  if (n_candidates < 2) throw ConfigError("r_precision needs n_candidates >= 2");

  Rng rng(seed);
  std::vector<std::array<double, 3>> hits(n);  // per-output top-1/2/3 indicators
  std::vector<double> dists(n);
  for (int i = 0; i < n; ++i) {
    double d_gt = euclid(outputs[i], conditions[i]);
    dists[i] = d_gt;
    std::vector<int> cands = {i};
    while (static_cast<int>(cands.size()) < n_candidates) {
      int c = static_cast<int>(rng.uniform_int(0, n - 1));
      if (std::find(cands.begin(), cands.end(), c) == cands.end()) cands.push_back(c);
    }
    int closer = 0;
    for (int c : cands)
      if (c != i && euclid(outputs[i], conditions[c]) < d_gt) ++closer;
    for (int k = 1; k <= 3; ++k) hits[i][k - 1] = closer < k ? 1.0 : 0.0;
  }

  auto make = [&](const char* name, int k) {
    std::vector<double> vals(n);
    for (int i = 0; i < n; ++i) vals[i] = hits[i][k - 1];
    MetricReport rep;
    rep.name = name;
    rep.value = std::accumulate(vals.begin(), vals.end(), 0.0) / n;
    if (resamples > 0)
      rep.ci_half = bootstrap_mean_half_width(vals, resamples, splitmix64(seed ^ k));
    rep.config = {{"n_outputs", n}, {"n_candidates", n_candidates}};
    return rep;
  };
  RetrievalReport rep;
  rep.top1 = make("r_precision_top1", 1);
  rep.top2 = make("r_precision_top2", 2);
  rep.top3 = make("r_precision_top3", 3);
  rep.mmdist.name = "mmdist";
  rep.mmdist.value = std::accumulate(dists.begin(), dists.end(), 0.0) / n;
  if (resamples > 0)
    rep.mmdist.ci_half = bootstrap_mean_half_width(dists, resamples, splitmix64(seed ^ 7));
  rep.mmdist.config = {{"n_outputs", n}};
  return rep;
}

MetricReport success_rate(const std::vector<GoalRollouts>& rollouts, const GridSpec& grid,
                          int resamples, uint64_t seed) {
  grid.validate();
  if (rollouts.empty()) throw DataError("success_rate needs at least one goal");
  int cols = grid.cols();
  std::vector<double> per_rollout;
  for (const auto& goal : rollouts) {
    if (goal.row < 0 || goal.row >= cols || goal.col < 0 || goal.col >= cols)
      throw DataError("goal cell outside the grid");
    int target = goal.row * cols + goal.col;
    for (const auto& xz : goal.terminal_xz) {
      double half = grid.extent / 2;
      bool inside = xz[0] >= -half && xz[0] <= half && xz[1] >= -half && xz[1] <= half;
      bool hit = inside && grid.cell_index(xz[0], xz[1]) == target;
      per_rollout.push_back(hit ? 1.0 : 0.0);
    }
  }
  if (per_rollout.empty()) throw DataError("success_rate saw no rollouts");
  MetricReport rep;
  rep.name = "success_rate";
  rep.value = 100.0 * std::accumulate(per_rollout.begin(), per_rollout.end(), 0.0) /
              per_rollout.size();
  if (resamples > 0) {
    rep.ci_half =
        100.0 * bootstrap_mean_half_width(per_rollout, resamples, splitmix64(seed ^ 0x9a));
  }
  rep.config = {{"n_goals", rollouts.size()}, {"n_rollouts", per_rollout.size()}};
  return rep;
}

MetricReport bleu(const std::vector<std::string>& candidates,
                  const std::vector<std::string>& references, int max_n, int resamples,
                  uint64_t seed) {
  if (max_n < 1) throw ConfigError("bleu needs max_n >= 1");
  check_text_pairs(candidates, references);
  int n = static_cast<int>(candidates.size());
  std::vector<std::vector<std::string>> cands(n), refs(n);
  for (int i = 0; i < n; ++i) {
    cands[i] = word_tokens(candidates[i]);
    refs[i] = word_tokens(references[i]);
  }
  MetricReport rep;
  rep.name = "bleu@" + std::to_string(max_n);
  rep.value = corpus_bleu(cands, refs, max_n, iota_idx(n));
  if (resamples > 0)
    rep.ci_half = bootstrap_half_width(
        [&](const std::vector<int>& idx) { return corpus_bleu(cands, refs, max_n, idx); }, n,
        resamples, seed);
  rep.config = {{"n_pairs", n}, {"max_n", max_n}};
  return rep;
}

MetricReport rouge_l(const std::vector<std::string>& candidates,
                     const std::vector<std::string>& references, int resamples,
                     uint64_t seed) {
  check_text_pairs(candidates, references);
  int n = static_cast<int>(candidates.size());
  std::vector<std::vector<std::string>> cands(n), refs(n);
  for (int i = 0; i < n; ++i) {
    cands[i] = word_tokens(candidates[i]);
    refs[i] = word_tokens(references[i]);
  }
  MetricReport rep;
  rep.name = "rouge_l";
  rep.value = mean_rouge_l(cands, refs, iota_idx(n));
  if (resamples > 0)
    rep.ci_half = bootstrap_half_width(
        [&](const std::vector<int>& idx) { return mean_rouge_l(cands, refs, idx); }, n,
        resamples, seed);
  rep.config = {{"n_pairs", n}};
  return rep;
}

double bootstrap_half_width(const std::function<double(const std::vector<int>&)>& fn, int n,
                            int resamples, uint64_t seed) {
  if (n < 2) throw DataError("bootstrap needs at least 2 samples");
  if (resamples < 100) throw ConfigError("bootstrap needs >= 100 resamples");
  Rng rng(seed);
  std::vector<double> stats(resamples);
  std::vector<int> idx(n);
  for (int r = 0; r < resamples; ++r) {
    for (int i = 0; i < n; ++i) idx[i] = static_cast<int>(rng.uniform_int(0, n - 1));
    stats[r] = fn(idx);
  }
  std::sort(stats.begin(), stats.end());
  auto quantile = [&](double q) {
    double pos = q * (resamples - 1);
    int lo = static_cast<int>(pos);
    int hi = std::min(lo + 1, resamples - 1);
    double a = pos - lo;
    return (1 - a) * stats[lo] + a * stats[hi];
  };
  return 0.5 * (quantile(0.975) - quantile(0.025));
}

double bootstrap_mean_half_width(const std::vector<double>& values, int resamples,
                                 uint64_t seed) {
  return bootstrap_half_width(
      [&](const std::vector<int>& idx) {
        double s = 0;
        for (int i : idx) s += values[i];
        return s / idx.size();
      },
      static_cast<int>(values.size()), resamples, seed);
}

void write_metric_reports(const std::vector<MetricReport>& reports,
                          const std::string& json_path, const std::string& csv_path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports)
    arr.push_back({{"name", r.name}, {"value", r.value}, {"ci95", r.ci_half},
                   {"config", r.config}});
  atomic_write_text(json_path, arr.dump(2) + "\n");

  std::ostringstream csv;
  csv << "name,value,ci95,config\n";
  for (const auto& r : reports) {
    std::string cfg = r.config.dump();
    std::string escaped;
    for (char c : cfg) {
      escaped += c;
      if (c == '"') escaped += '"';
    }
    csv << r.name << ',' << r.value << ',' << r.ci_half << ",\"" << escaped << "\"\n";
  }
  atomic_write_text(csv_path, csv.str());
}

}  // namespace motionlm
