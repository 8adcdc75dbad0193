#include "motionlm/vqvae.hpp"

#include <algorithm>
#include <cmath>

#include "motionlm/checkpoint.hpp"

namespace motionlm {

void VqConfig::validate() const {
  if (N < 2) throw ConfigError("vqvae: codebook needs N >= 2");
  if (d < 1 || hidden < 1) throw ConfigError("vqvae: bad width");
  if (l != 4) throw ConfigError("vqvae: downsampling l=4 is the only supported rate");
  if (beta < 0 || lambda_vel < 0 || smooth_beta <= 0) throw ConfigError("vqvae: bad loss weights");
  if (gamma < 0 || gamma > 1) throw ConfigError("vqvae: gamma must be in [0,1]");
  if (reset_threshold < 0) throw ConfigError("vqvae: bad reset threshold");
}

int quantize(const float* z, const nn::Tensor& entries) {
  int N = entries.rows(), d = entries.cols();
  if (N == 0) throw ConfigError("quantize: empty codebook");
  int best = 0;
  double best_dist = 0;
  for (int j = 0; j < N; ++j) {
    double dist = 0;
    for (int c = 0; c < d; ++c) {
      double u = static_cast<double>(z[c]) - entries(j, c);
      dist += u * u;
    }
    if (j == 0 || dist < best_dist) {  // strict: ties keep the lowest index
      best = j;
      best_dist = dist;
    }
  }
  return best;
}

Codebook::Codebook(int N, int d, Rng& rng) {
  entries = nn::Parameter("codebook", nn::Tensor::randn({N, d}, rng, 0.02));
  usage.assign(N, 0.0);  // all below threshold: first update seeds from batch
  ema_sums = nn::Tensor::zeros({N, d});
}

void Codebook::ema_update_and_reset(const std::vector<nn::Tensor>& latents,
                                    const std::vector<std::vector<int>>& assignments,
                                    const VqConfig& cfg, Rng& rng) {
  if (latents.empty()) throw DataError("ema update: empty batch");
  int N = size(), d = dim();
  std::vector<double> counts(N, 0.0);
  std::vector<std::vector<double>> sums(N, std::vector<double>(d, 0.0));
  int64_t total = 0;
  for (size_t s = 0; s < latents.size(); ++s) {
    const nn::Tensor& z = latents[s];
    for (size_t t = 0; t < assignments[s].size(); ++t) {
      int j = assignments[s][t];
      counts[j] += 1.0;
      for (int c = 0; c < d; ++c) sums[j][c] += z(c, static_cast<int>(t));
      ++total;
    }
  }
  if (total == 0) throw DataError("ema update: no assignments");

  for (int j = 0; j < N; ++j) {
    usage[j] = cfg.gamma * usage[j] + (1.0 - cfg.gamma) * counts[j];
    for (int c = 0; c < d; ++c) {
      double s = cfg.gamma * ema_sums(j, c) + (1.0 - cfg.gamma) * sums[j][c];
      ema_sums(j, c) = static_cast<float>(s);
      entries.value(j, c) = static_cast<float>(s / (usage[j] + cfg.ema_eps));
    }
  }

  // dead-code reset: re-seed from a random batch latent column
  for (int j = 0; j < N; ++j) {
    if (usage[j] >= cfg.reset_threshold) continue;
    int64_t pick = rng.uniform_int(0, static_cast<int>(total) - 1);
    const nn::Tensor* src = nullptr;
    int t_pick = 0;
    for (size_t s = 0; s < latents.size() && src == nullptr; ++s) {
      int64_t n = static_cast<int64_t>(assignments[s].size());
      if (pick < n) {
        src = &latents[s];
        t_pick = static_cast<int>(pick);
      } else {
        pick -= n;
      }
    }
    for (int c = 0; c < d; ++c) {
      float v = (*src)(c, t_pick);
      entries.value(j, c) = v;
      ema_sums(j, c) = v;
    }
    usage[j] = 1.0;
  }
}

VqVae::VqVae(EmbodimentSpec embodiment, VqConfig cfg) : cfg_(cfg), embodiment_(embodiment) {
  cfg_.validate();
  Rng rng(splitmix64(cfg.seed ^ 0x5e11ull));
  int D = embodiment.dim, h = cfg.hidden;
  enc1_ = nn::Conv1d("enc1", D, h, 4, 2, 1, rng);
  enc2_ = nn::Conv1d("enc2", h, h, 4, 2, 1, rng);
  enc3_ = nn::Conv1d("enc3", h, cfg.d, 3, 1, 1, rng);
  dec1_ = nn::Conv1d("dec1", cfg.d, h, 3, 1, 1, rng);
  dec2_ = nn::Conv1d("dec2", h, h, 3, 1, 1, rng);
  dec3_ = nn::Conv1d("dec3", h, D, 3, 1, 1, rng);
  Rng crng(splitmix64(cfg.seed ^ 0xc0deb00cull));
  codebook_ = Codebook(cfg.N, cfg.d, crng);
}

std::vector<nn::Parameter*> VqVae::net_parameters() {
  std::vector<nn::Parameter*> out;
  enc1_.collect(out);
  enc2_.collect(out);
  enc3_.collect(out);
  dec1_.collect(out);
  dec2_.collect(out);
  dec3_.collect(out);
  return out;
}

std::vector<nn::Parameter*> VqVae::all_parameters() {
  auto out = net_parameters();
  out.push_back(&codebook_.entries);
  return out;
}

int VqVae::encode_graph(nn::Graph& g, int x) const {
  auto& self = const_cast<VqVae&>(*this);
  int h = g.relu(self.enc1_(g, x));
  h = g.relu(self.enc2_(g, h));
  return self.enc3_(g, h);
}

int VqVae::decode_graph(nn::Graph& g, int z) const {
  auto& self = const_cast<VqVae&>(*this);
  int h = g.relu(self.dec1_(g, z));
  h = g.upsample_nearest(h, 2);
  h = g.relu(self.dec2_(g, h));
  h = g.upsample_nearest(h, 2);
  return self.dec3_(g, h);
}

nn::Tensor VqVae::padded_channels(const nn::Tensor& poses) const {
  int T = poses.rows(), D = poses.cols();
  if (D != embodiment_.dim) throw DataError("vqvae: pose dim mismatch");
  int T4 = ((T + cfg_.l - 1) / cfg_.l) * cfg_.l;
  nn::Tensor x({D, T4});
  for (int t = 0; t < T4; ++t) {
    int src = std::min(t, T - 1);  // right-pad by repeating the last pose
    for (int c = 0; c < D; ++c) x(c, t) = poses(src, c);
  }
  return x;
}

VqVae::ForwardResult VqVae::forward(nn::Graph& g, const nn::Tensor& poses) {
  nn::Tensor x = padded_channels(poses);
  int x_node = g.leaf(x, false);
  int z_node = encode_graph(g, x_node);
  const nn::Tensor& z = g.value(z_node);
  if (!z.all_finite()) throw NumericError("vqvae: NaN in encoder output");

  ForwardResult res;
  res.latent = z;
  int Tl = z.cols();
  nn::Tensor zq({cfg_.d, Tl});
  std::vector<float> col(cfg_.d);
  for (int t = 0; t < Tl; ++t) {
    for (int c = 0; c < cfg_.d; ++c) col[c] = z(c, t);
    int j = quantize(col.data(), codebook_.entries.value);
    res.tokens.push_back(j);
    for (int c = 0; c < cfg_.d; ++c) zq(c, t) = codebook_.entries.value(j, c);
  }

  int st = g.straight_through(z_node, zq);
  res.z_node = z_node;
  res.st_node = st;
  int recon = decode_graph(g, st);
  if (!g.value(recon).all_finite()) throw NumericError("vqvae: NaN in reconstruction");

  float sb = static_cast<float>(cfg_.smooth_beta);
  int l_r = g.smooth_l1(recon, x, sb);

  // velocity regularization: smooth-L1 between first differences
  nn::Tensor dx({x.rows(), x.cols() - 1});
  for (int c = 0; c < x.rows(); ++c)
    for (int t = 0; t + 1 < x.cols(); ++t) dx(c, t) = x(c, t + 1) - x(c, t);
  int l_v = g.smooth_l1(g.diff_cols(recon), dx, sb);

  int l_c = g.smooth_l1(z_node, zq, sb);  // encoder -> codebook, entries fixed

  int l_e = -1;
  if (!cfg_.ema) {
    // gradient-mode embedding loss: pull selected entries toward sg(z).
    // res.latent (a copy) is used because graph growth invalidates z refs.
    int picked = g.embedding(g.param(codebook_.entries), res.tokens);  // [Tl, d]
    nn::Tensor z_t({Tl, cfg_.d});
    for (int t = 0; t < Tl; ++t)
      for (int c = 0; c < cfg_.d; ++c) z_t(t, c) = res.latent(c, t);
    l_e = g.smooth_l1(picked, z_t, sb);
  }

  int total = g.add(l_r, g.scale(l_v, static_cast<float>(cfg_.lambda_vel)));
  total = g.add(total, g.scale(l_c, static_cast<float>(cfg_.beta)));
  if (l_e >= 0) total = g.add(total, l_e);

  res.report.reconstruction = g.value(l_r)(0);
  res.report.velocity_reg = g.value(l_v)(0);
  res.report.commitment = g.value(l_c)(0);
  res.report.embedding = l_e >= 0 ? g.value(l_e)(0) : 0.0;
  res.report.total = g.value(total)(0);
  res.loss_node = total;
  return res;
}

std::vector<int> VqVae::encode(const Trajectory& traj) const {
  traj.validate();
  nn::Graph g;
  nn::Tensor x = padded_channels(traj.poses);
  int z_node = encode_graph(g, g.leaf(x, false));
  const nn::Tensor& z = g.value(z_node);
  std::vector<int> tokens;
  std::vector<float> col(cfg_.d);
  for (int t = 0; t < z.cols(); ++t) {
    for (int c = 0; c < cfg_.d; ++c) col[c] = z(c, t);
    tokens.push_back(quantize(col.data(), codebook_.entries.value));
  }
  return tokens;
}

Trajectory VqVae::decode(const std::vector<int>& tokens, double dt, int T) const {
  if (tokens.empty()) throw DataError("vqvae decode: no tokens");
  for (int t : tokens)
    if (t < 0 || t >= cfg_.N) throw DataError("vqvae decode: token out of range");
  if (T < 0) T = static_cast<int>(tokens.size()) * cfg_.l;
  if (T > static_cast<int>(tokens.size()) * cfg_.l)
    throw DataError("vqvae decode: T exceeds token coverage");
  nn::Tensor z({cfg_.d, static_cast<int>(tokens.size())});
  for (size_t t = 0; t < tokens.size(); ++t)
    for (int c = 0; c < cfg_.d; ++c) z(c, static_cast<int>(t)) = codebook_.entries.value(tokens[t], c);
  nn::Graph g;
  int recon = decode_graph(g, g.leaf(z, false));
  const nn::Tensor& y = g.value(recon);
  Trajectory out;
  out.embodiment = embodiment_;
  out.dt = dt;
  out.poses = nn::Tensor({T, embodiment_.dim});
  for (int t = 0; t < T; ++t)
    for (int c = 0; c < embodiment_.dim; ++c) out.poses(t, c) = y(c, t);
  return out;
}

VqLossReport VqVae::evaluate(const std::vector<CaptionedTrajectory>& corpus) const {
  if (corpus.empty()) throw DataError("vqvae evaluate: empty corpus");
  VqLossReport sum;
  for (const auto& s : corpus) {
    nn::Graph g;
    auto res = const_cast<VqVae*>(this)->forward(g, s.trajectory.poses);
    sum.reconstruction += res.report.reconstruction;
    sum.embedding += res.report.embedding;
    sum.commitment += res.report.commitment;
    sum.velocity_reg += res.report.velocity_reg;
    sum.total += res.report.total;
  }
  double n = static_cast<double>(corpus.size());
  sum.reconstruction /= n;
  sum.embedding /= n;
  sum.commitment /= n;
  sum.velocity_reg /= n;
  sum.total /= n;
  return sum;
}

VqTrainStats train_vqvae(VqVae& model, const std::vector<CaptionedTrajectory>& corpus,
                         const std::vector<CaptionedTrajectory>& held_out,
                         const nn::OptimConfig& opt) {
  if (corpus.empty()) throw DataError("vqvae train: empty corpus");
  const VqConfig& cfg = model.config();
  auto params = cfg.ema ? model.net_parameters() : model.all_parameters();
  nn::Adam adam(params, opt.lr);
  Rng batch_rng = Rng::derive(opt.seed, 0x1);
  Rng reset_rng = Rng::derive(opt.seed, 0x2);

  VqTrainStats stats;
  for (int step = 0; step < opt.steps; ++step) {
    adam.set_lr(nn::cosine_lr(opt.lr, step, opt.steps));
    adam.zero_grad();
    double total = 0;
    std::vector<nn::Tensor> latents;
    std::vector<std::vector<int>> assignments;
    nn::Graph g;
    std::vector<int> losses;
    for (int b = 0; b < opt.batch_size; ++b) {
      const auto& s = corpus[batch_rng.uniform_int(0, static_cast<int>(corpus.size()) - 1)];
      auto res = model.forward(g, s.trajectory.poses);
      losses.push_back(res.loss_node);
      total += res.report.total;
      latents.push_back(std::move(res.latent));
      assignments.push_back(std::move(res.tokens));
    }
    int loss = losses[0];
    for (size_t i = 1; i < losses.size(); ++i) loss = g.add(loss, losses[i]);
    loss = g.scale(loss, 1.0f / static_cast<float>(opt.batch_size));
    total /= opt.batch_size;
    if (!std::isfinite(total)) throw NumericError("vqvae train: non-finite loss");
    g.backward(loss);
    g.harvest_param_grads();
    adam.clip_grad_norm(opt.clip_norm);
    adam.step();
    if (cfg.ema)
      model.codebook().ema_update_and_reset(latents, assignments, cfg, reset_rng);
    if (step % opt.log_every == 0 || step + 1 == opt.steps) stats.loss_curve.push_back(total);
  }
  if (!held_out.empty()) {
    stats.final_heldout = model.evaluate(held_out);
    stats.heldout_utilization = codebook_utilization(model, held_out);
  }
  return stats;
}

double codebook_utilization(const VqVae& model,
                            const std::vector<CaptionedTrajectory>& corpus) {
  if (corpus.empty()) throw DataError("utilization: empty corpus");
  std::vector<bool> used(model.config().N, false);
  for (const auto& s : corpus)
    for (int t : model.encode(s.trajectory)) used[t] = true;
  int n = 0;
  for (bool u : used) n += u;
  return static_cast<double>(n) / model.config().N;
}

void VqVae::save(const std::string& base_path) const {
  auto& self = const_cast<VqVae&>(*this);
  std::vector<const nn::Parameter*> params;
  for (auto* p : self.all_parameters()) params.push_back(p);
  nn::Parameter sums("codebook_ema_sums", codebook_.ema_sums);
  params.push_back(&sums);
  nlohmann::json extra;
  extra["kind"] = "vqvae";
  extra["embodiment"] = embodiment_.name();
  extra["dim"] = embodiment_.dim;
  extra["k"] = embodiment_.k;
  extra["N"] = cfg_.N;
  extra["d"] = cfg_.d;
  extra["l"] = cfg_.l;
  extra["hidden"] = cfg_.hidden;
  extra["beta"] = cfg_.beta;
  extra["lambda_vel"] = cfg_.lambda_vel;
  extra["smooth_beta"] = cfg_.smooth_beta;
  extra["ema"] = cfg_.ema;
  extra["gamma"] = cfg_.gamma;
  extra["reset_threshold"] = cfg_.reset_threshold;
  extra["usage"] = codebook_.usage;
  save_tensor_blob(base_path, params, extra);
}

VqVae VqVae::load(const std::string& base_path) {
  TensorBlob blob = load_tensor_blob(base_path);
  const auto& e = blob.extra;
  if (e.value("kind", "") != std::string("vqvae"))
    throw DataError("not a vqvae checkpoint: " + base_path);
  VqConfig cfg;
  cfg.N = e.at("N").get<int>();
  cfg.d = e.at("d").get<int>();
  cfg.l = e.at("l").get<int>();
  cfg.hidden = e.at("hidden").get<int>();
  cfg.beta = e.at("beta").get<double>();
  cfg.lambda_vel = e.at("lambda_vel").get<double>();
  cfg.smooth_beta = e.at("smooth_beta").get<double>();
  cfg.ema = e.at("ema").get<bool>();
  cfg.gamma = e.at("gamma").get<double>();
  cfg.reset_threshold = e.at("reset_threshold").get<double>();
  EmbodimentSpec emb = EmbodimentSpec::from_name(e.at("embodiment").get<std::string>(),
                                                 e.at("dim").get<int>());
  VqVae model(emb, cfg);
  load_parameters(blob, model.all_parameters());
  model.codebook_.ema_sums = blob.get("codebook_ema_sums");
  model.codebook_.usage = e.at("usage").get<std::vector<double>>();
  return model;
}

}  // namespace motionlm
