#include "motionlm/feature.hpp"

#include <algorithm>
#include <cmath>

#include "motionlm/checkpoint.hpp"

namespace motionlm {

void FeatureConfig::validate() const {
  if (f < 1) throw ConfigError("feature dim must be >= 1");
  if (hidden < 1) throw ConfigError("hidden width must be >= 1");
  if (text_embed < 1) throw ConfigError("text embed dim must be >= 1");
  if (resample_T < 4) throw ConfigError("resample_T must be >= 4");
  if (tau <= 0) throw ConfigError("tau must be positive");
}

nn::Tensor resample_channels_first(const nn::Tensor& poses, int n) {
  if (poses.rows() < 1) throw DataError("cannot resample an empty trajectory");
  int T = poses.rows(), D = poses.cols();
  nn::Tensor out({D, n});
  for (int j = 0; j < n; ++j) {
    double s = (T == 1 || n == 1) ? 0.0 : static_cast<double>(j) * (T - 1) / (n - 1);
    int lo = std::min(static_cast<int>(s), T - 1);
    int hi = std::min(lo + 1, T - 1);
    double a = s - lo;
    for (int c = 0; c < D; ++c)
      out(c, j) = static_cast<float>((1.0 - a) * poses(lo, c) + a * poses(hi, c));
  }
  return out;
}

FeatureExtractor::FeatureExtractor(EmbodimentSpec embodiment, FeatureConfig cfg)
    : emb_(embodiment), cfg_(cfg) {
  cfg_.validate();
  Rng rng(splitmix64(cfg_.seed ^ 0xfea70ull));
  int h = cfg_.hidden;
  mc1_ = nn::Conv1d("m.conv1", emb_.dim, h, 4, 2, 1, rng);
  mc2_ = nn::Conv1d("m.conv2", h, h, 4, 2, 1, rng);
  mc3_ = nn::Conv1d("m.conv3", h, h, 3, 1, 1, rng);
  mhead_ = nn::Linear("m.head", h, cfg_.f, rng);
  temb_ = nn::Embedding("t.bytes", 256, cfg_.text_embed, rng);
  tc1_ = nn::Conv1d("t.conv1", cfg_.text_embed, h, 3, 1, 1, rng);
  thead_ = nn::Linear("t.head", h, cfg_.f, rng);
}

std::vector<nn::Parameter*> FeatureExtractor::parameters() {
  std::vector<nn::Parameter*> out;
  mc1_.collect(out);
  mc2_.collect(out);
  mc3_.collect(out);
  mhead_.collect(out);
  temb_.collect(out);
  tc1_.collect(out);
  thead_.collect(out);
  return out;
}

int FeatureExtractor::encode_motion_batch(nn::Graph& g,
                                          const std::vector<const Trajectory*>& batch) {
  if (batch.empty()) throw DataError("empty motion batch");
  std::vector<int> pooled;
  pooled.reserve(batch.size());
  for (const Trajectory* t : batch) {
    if (t->dim() != emb_.dim)
      throw DataError("trajectory dim does not match the extractor embodiment");
    int x = g.constant(resample_channels_first(t->poses, cfg_.resample_T));
    x = g.gelu(mc1_(g, x));
    x = g.gelu(mc2_(g, x));
    x = g.gelu(mc3_(g, x));
    pooled.push_back(g.mean_cols(x));  // [1, hidden]
  }
  int stacked = pooled.size() == 1 ? pooled[0] : g.concat_rows(pooled);
  return g.l2_normalize_rows(mhead_(g, stacked));
}

int FeatureExtractor::encode_text_batch(nn::Graph& g, const std::vector<std::string>& batch) {
  if (batch.empty()) throw DataError("empty text batch");
  std::vector<int> pooled;
  pooled.reserve(batch.size());
  for (const std::string& s : batch) {
    if (s.empty()) throw DataError("cannot featurize an empty caption");
    std::vector<int> ids;
    ids.reserve(s.size());
    for (unsigned char c : s) ids.push_back(static_cast<int>(c));
    int x = g.transpose(temb_(g, ids));  // [text_embed, len]
    x = g.gelu(tc1_(g, x));
    pooled.push_back(g.mean_cols(x));
  }
  int stacked = pooled.size() == 1 ? pooled[0] : g.concat_rows(pooled);
  return g.l2_normalize_rows(thead_(g, stacked));
}

Eigen::VectorXf FeatureExtractor::motion_feature(const Trajectory& traj) {
  nn::Graph g;
  int node = encode_motion_batch(g, {&traj});
  const nn::Tensor& v = g.value(node);
  Eigen::VectorXf out(cfg_.f);
  for (int i = 0; i < cfg_.f; ++i) out(i) = v(0, i);
  return out;
}

Eigen::VectorXf FeatureExtractor::text_feature(const std::string& text) {
  nn::Graph g;
  int node = encode_text_batch(g, {text});
  const nn::Tensor& v = g.value(node);
  Eigen::VectorXf out(cfg_.f);
  for (int i = 0; i < cfg_.f; ++i) out(i) = v(0, i);
  return out;
}

void FeatureExtractor::save(const std::string& base_path) const {
  auto* self = const_cast<FeatureExtractor*>(this);
  std::vector<const nn::Parameter*> params;
  for (auto* p : self->parameters()) params.push_back(p);
  nlohmann::json extra = {{"embodiment", emb_.name()},
                          {"dim", emb_.dim},
                          {"f", cfg_.f},
                          {"hidden", cfg_.hidden},
                          {"text_embed", cfg_.text_embed},
                          {"resample_T", cfg_.resample_T},
                          {"tau", cfg_.tau},
                          {"seed", cfg_.seed}};
  save_tensor_blob(base_path, params, extra);
}

FeatureExtractor FeatureExtractor::load(const std::string& base_path) {
  TensorBlob blob = load_tensor_blob(base_path);
  try {
    FeatureConfig cfg;
    cfg.f = blob.extra.at("f").get<int>();
    cfg.hidden = blob.extra.at("hidden").get<int>();
    cfg.text_embed = blob.extra.at("text_embed").get<int>();
    cfg.resample_T = blob.extra.at("resample_T").get<int>();
    cfg.tau = blob.extra.at("tau").get<double>();
    cfg.seed = blob.extra.at("seed").get<uint64_t>();
    EmbodimentSpec emb = EmbodimentSpec::from_name(blob.extra.at("embodiment").get<std::string>(),
                                                   blob.extra.at("dim").get<int>());
    FeatureExtractor fx(emb, cfg);
    load_parameters(blob, fx.parameters());
    return fx;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad feature extractor checkpoint: ") + e.what());
  }
}

namespace {

int contrastive_loss(nn::Graph& g, int mfeat, int tfeat, double tau, int batch) {
  std::vector<int> diag(batch);
  for (int i = 0; i < batch; ++i) diag[i] = i;
  float inv_tau = static_cast<float>(1.0 / tau);
  int m2t = g.cross_entropy(g.scale(g.matmul_nt(mfeat, tfeat), inv_tau), diag);
  int t2m = g.cross_entropy(g.scale(g.matmul_nt(tfeat, mfeat), inv_tau), diag);
  return g.scale(g.add(m2t, t2m), 0.5f);
}

}  // namespace

FeatureTrainStats train_feature_extractor(FeatureExtractor& fx,
                                          const std::vector<CaptionedTrajectory>& corpus,
                                          const nn::OptimConfig& opt,
                                          double val_fraction) {
  if (opt.steps < 1 || opt.batch_size < 2)
    throw ConfigError("contrastive training needs steps >= 1 and batch_size >= 2");
  if (val_fraction < 0 || val_fraction >= 1) throw ConfigError("val_fraction must be in [0,1)");
  int n_val = static_cast<int>(std::ceil(val_fraction * corpus.size()));
  int n_train = static_cast<int>(corpus.size()) - n_val;
  if (n_train < opt.batch_size)
    throw DataError("training split smaller than the contrastive batch size");

  auto params = fx.parameters();
  nn::Adam adam(params, opt.lr);
  Rng batch_rng = Rng::derive(opt.seed, 0x21);
  FeatureTrainStats stats;
  stats.loss_curve.reserve(opt.steps);

  for (int step = 0; step < opt.steps; ++step) {
    adam.set_lr(nn::cosine_lr(opt.lr, step, opt.steps));
    adam.zero_grad();
    // sample distinct indices so in-batch negatives are genuine mismatches
    std::vector<int> idx;
    while (static_cast<int>(idx.size()) < opt.batch_size) {
      int cand = static_cast<int>(batch_rng.uniform_int(0, n_train - 1));
      if (std::find(idx.begin(), idx.end(), cand) == idx.end()) idx.push_back(cand);
    }
    nn::Graph g;
    std::vector<const Trajectory*> motions;
    std::vector<std::string> texts;
    for (int i : idx) {
      motions.push_back(&corpus[i].trajectory);
      texts.push_back(corpus[i].caption);
    }
    int mfeat = fx.encode_motion_batch(g, motions);
    int tfeat = fx.encode_text_batch(g, texts);
    int loss = contrastive_loss(g, mfeat, tfeat, fx.config().tau, opt.batch_size);
    double lv = g.value(loss)(0, 0);
    if (!std::isfinite(lv))
      throw NumericError("non-finite contrastive loss at step " + std::to_string(step));
    stats.loss_curve.push_back(lv);
    g.backward(loss);
    g.harvest_param_grads();
    adam.clip_grad_norm(opt.clip_norm);
    adam.step();
  }

  if (n_val >= 2) {
    std::vector<CaptionedTrajectory> val(corpus.end() - n_val, corpus.end());
    int ways = std::min<int>(32, n_val);
    stats.val_top1 = retrieval_top1(fx, val, ways, 200, splitmix64(opt.seed ^ 0x22));
  }
  return stats;
}

double retrieval_top1(FeatureExtractor& fx, const std::vector<CaptionedTrajectory>& pairs,
                      int n_candidates, int trials, uint64_t seed) {
  int n = static_cast<int>(pairs.size());
  if (n < n_candidates) throw DataError("fewer pairs than retrieval candidates");
  if (n_candidates < 2) throw ConfigError("retrieval needs at least 2 candidates");
  std::vector<Eigen::VectorXf> mf(n), tf(n);
  for (int i = 0; i < n; ++i) {
    mf[i] = fx.motion_feature(pairs[i].trajectory);
    tf[i] = fx.text_feature(pairs[i].caption);
  }
  Rng rng(seed);
  int hits = 0;
  for (int t = 0; t < trials; ++t) {
    int q = static_cast<int>(rng.uniform_int(0, n - 1));
    std::vector<int> cands = {q};
    while (static_cast<int>(cands.size()) < n_candidates) {
      int c = static_cast<int>(rng.uniform_int(0, n - 1));
      if (std::find(cands.begin(), cands.end(), c) == cands.end()) cands.push_back(c);
    }
    double best = 0;
    int best_i = -1;
    for (int c : cands) {
      double d = (tf[q] - mf[c]).norm();
      if (best_i < 0 || d < best) {
        best = d;
        best_i = c;
      }
    }
    hits += best_i == q;
  }
  return static_cast<double>(hits) / trials;
}

}  // namespace motionlm
