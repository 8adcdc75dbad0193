#include "motionlm/lm.hpp"

#include <algorithm>
#include <cmath>

#include "motionlm/checkpoint.hpp"

namespace motionlm {

void LmConfig::validate() const {
  if (vocab_size < 2) throw ConfigError("lm: vocab too small");
  if (d_model < 1 || layers < 1 || heads < 1 || context < 2)
    throw ConfigError("lm: bad architecture sizes");
  if (d_model % heads != 0) throw ConfigError("lm: d_model must divide into heads");
  if (dropout < 0 || dropout >= 1) throw ConfigError("lm: dropout must be in [0,1)");
}

void GenerationConfig::validate() const {
  if (temperature <= 0) throw ConfigError("generation: temperature must be positive");
  if (top_k < 1) throw ConfigError("generation: top_k must be >= 1");
  if (max_new_tokens < 1) throw ConfigError("generation: max_new_tokens must be >= 1");
}

LanguageModel::LanguageModel(LmConfig cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng(splitmix64(cfg.seed ^ 0x6e7ull));
  tok_ = nn::Embedding("tok_emb", cfg.vocab_size, cfg.d_model, rng, 0.02);
  pos_ = nn::Embedding("pos_emb", cfg.context, cfg.d_model, rng, 0.02);
  for (int b = 0; b < cfg.layers; ++b)
    blocks_.push_back(nn::TransformerBlock("block" + std::to_string(b), cfg.d_model,
                                           cfg.heads, rng, cfg.dropout));
  lnf_ = nn::LayerNorm("ln_f", cfg.d_model);
}

std::vector<nn::Parameter*> LanguageModel::parameters() {
  std::vector<nn::Parameter*> out;
  tok_.collect(out);
  pos_.collect(out);
  for (auto& b : blocks_) b.collect(out);
  lnf_.collect(out);
  return out;
}

int64_t LanguageModel::parameter_count() {
  int64_t n = 0;
  for (auto* p : parameters()) n += p->value.numel();
  return n;
}

int LanguageModel::forward(nn::Graph& g, const std::vector<std::vector<int>>& seqs,
                           nn::SeqLayout& layout, Rng* drop_rng) {
  if (seqs.empty()) throw DataError("lm forward: no sequences");
  layout = nn::SeqLayout{};
  std::vector<int> ids_all, pos_all;
  for (const auto& s : seqs) {
    if (s.empty()) throw DataError("lm forward: empty sequence");
    if (static_cast<int>(s.size()) > cfg_.context)
      throw DataError("lm forward: sequence longer than the context window");
    layout.push(static_cast<int>(s.size()));
    for (size_t i = 0; i < s.size(); ++i) {
      if (s[i] < 0 || s[i] >= cfg_.vocab_size) throw DataError("lm forward: token id out of range");
      ids_all.push_back(s[i]);
      pos_all.push_back(static_cast<int>(i));
    }
  }
  int x = g.add(tok_(g, ids_all), pos_(g, pos_all));
  if (drop_rng && cfg_.dropout > 0) x = g.dropout(x, cfg_.dropout, *drop_rng);
  for (auto& b : blocks_) x = b(g, x, layout, drop_rng);
  x = lnf_(g, x);
  return g.matmul_nt(x, g.param(tok_.table));  // tied output head
}

namespace {

// Packed shifted targets; -1 is the ignore label.
std::vector<int> packed_targets(const std::vector<std::vector<int>>& seqs,
                                const std::vector<int>& response_from) {
  std::vector<int> targets;
  for (size_t s = 0; s < seqs.size(); ++s) {
    int from = response_from.empty() ? 0 : response_from[s];
    int len = static_cast<int>(seqs[s].size());
    for (int i = 0; i < len; ++i) {
      bool in_scope = i + 1 < len && i + 1 >= from;
      targets.push_back(in_scope ? seqs[s][i + 1] : -1);
    }
  }
  return targets;
}

}  // namespace

double LanguageModel::evaluate_loss(const std::vector<std::vector<int>>& seqs,
                                    const std::vector<int>& response_from) {
  if (!response_from.empty() && response_from.size() != seqs.size())
    throw ConfigError("evaluate_loss: response_from size mismatch");
  nn::Graph g;
  nn::SeqLayout layout;
  int logits = forward(g, seqs, layout);
  int loss = g.cross_entropy(logits, packed_targets(seqs, response_from));
  return g.value(loss)(0);
}

LanguageModel::KvCache LanguageModel::make_cache() const {
  KvCache cache;
  cache.k.resize(cfg_.layers);
  cache.v.resize(cfg_.layers);
  for (int b = 0; b < cfg_.layers; ++b) {
    cache.k[b].setZero(cfg_.context, cfg_.d_model);
    cache.v[b].setZero(cfg_.context, cfg_.d_model);
  }
  return cache;
}

namespace {

// Row-wise layer norm matching the graph op: double accumulation, eps 1e-5.
void layer_norm_rows(Eigen::MatrixXf& x, const nn::Parameter& gain, const nn::Parameter& bias) {
  for (int r = 0; r < x.rows(); ++r) {
    double mean = 0, var = 0;
    for (int c = 0; c < x.cols(); ++c) mean += x(r, c);
    mean /= x.cols();
    for (int c = 0; c < x.cols(); ++c) {
      double u = x(r, c) - mean;
      var += u * u;
    }
    var /= x.cols();
    double rs = 1.0 / std::sqrt(var + 1e-5);
    for (int c = 0; c < x.cols(); ++c)
      x(r, c) = static_cast<float>((x(r, c) - mean) * rs) * gain.value(c) + bias.value(c);
  }
}

Eigen::MatrixXf apply_linear(const Eigen::MatrixXf& x, const nn::Parameter& w,
                             const nn::Parameter& b) {
  Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> W(
      w.value.data.data(), w.value.rows(), w.value.cols());
  Eigen::MatrixXf out = x * W.transpose();
  for (int r = 0; r < out.rows(); ++r)
    for (int c = 0; c < out.cols(); ++c) out(r, c) += b.value(c);
  return out;
}

void softmax_sub_max(float* p, int n) {
  float mx = p[0];
  for (int i = 1; i < n; ++i) mx = std::max(mx, p[i]);
  double sum = 0;
  for (int i = 0; i < n; ++i) {
    double e = std::exp(static_cast<double>(p[i] - mx));
    p[i] = static_cast<float>(e);
    sum += e;
  }
  float inv = static_cast<float>(1.0 / sum);
  for (int i = 0; i < n; ++i) p[i] *= inv;
}

}  // namespace

Eigen::VectorXf LanguageModel::feed(KvCache& cache, const int* ids, int n) const {
  if (n < 1) throw DataError("lm feed: nothing to feed");
  if (cache.len + n > cfg_.context) throw DataError("lm feed: context window exceeded");
  int d = cfg_.d_model, dh = d / cfg_.heads;
  float scl = static_cast<float>(1.0 / std::sqrt(static_cast<double>(dh)));

  Eigen::MatrixXf x(n, d);
  for (int i = 0; i < n; ++i) {
    if (ids[i] < 0 || ids[i] >= cfg_.vocab_size) throw DataError("lm feed: token id out of range");
    for (int c = 0; c < d; ++c)
      x(i, c) = tok_.table.value(ids[i], c) + pos_.table.value(cache.len + i, c);
  }

  for (int b = 0; b < cfg_.layers; ++b) {
    const auto& blk = blocks_[b];
    Eigen::MatrixXf h = x;
    layer_norm_rows(h, blk.ln1.gain, blk.ln1.bias);
    Eigen::MatrixXf qkv = apply_linear(h, blk.qkv.w, blk.qkv.b);
    cache.k[b].middleRows(cache.len, n) = qkv.middleCols(d, d);
    cache.v[b].middleRows(cache.len, n) = qkv.middleCols(2 * d, d);

    Eigen::MatrixXf att(n, d);
    std::vector<float> row;
    for (int i = 0; i < n; ++i) {
      int ctx = cache.len + i + 1;  // causal prefix including this position
      for (int hd = 0; hd < cfg_.heads; ++hd) {
        auto q = qkv.row(i).segment(hd * dh, dh);
        auto K = cache.k[b].block(0, hd * dh, ctx, dh);
        auto V = cache.v[b].block(0, hd * dh, ctx, dh);
        row.resize(ctx);
        Eigen::Map<Eigen::VectorXf> scores(row.data(), ctx);
        scores.noalias() = K * q.transpose() * scl;
        softmax_sub_max(row.data(), ctx);
        att.row(i).segment(hd * dh, dh).noalias() = scores.transpose() * V;
      }
    }
    x += apply_linear(att, blk.attn_proj.w, blk.attn_proj.b);

    Eigen::MatrixXf h2 = x;
    layer_norm_rows(h2, blk.ln2.gain, blk.ln2.bias);
    Eigen::MatrixXf m = apply_linear(h2, blk.fc.w, blk.fc.b);
    for (int r = 0; r < m.rows(); ++r)
      for (int c = 0; c < m.cols(); ++c) {
        double v = m(r, c);
        m(r, c) = static_cast<float>(0.5 * v * (1.0 + std::erf(v * M_SQRT1_2)));
      }
    x += apply_linear(m, blk.mlp_proj.w, blk.mlp_proj.b);
  }
  cache.len += n;

  Eigen::MatrixXf last = x.bottomRows(1);
  layer_norm_rows(last, lnf_.gain, lnf_.bias);
  Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> E(
      tok_.table.value.data.data(), cfg_.vocab_size, d);
  return E * last.row(0).transpose();
}

std::vector<int> LanguageModel::generate(const std::vector<int>& prompt,
                                         const GenerationConfig& gen,
                                         const std::vector<int>& legal,
                                         const std::vector<int>& legal_first) const {
  gen.validate();
  if (prompt.empty()) throw DataError("generate: empty prompt");
  if (static_cast<int>(prompt.size()) >= cfg_.context)
    throw DataError("generate: prompt too long for the context window");

  KvCache cache = make_cache();
  Eigen::VectorXf logits = feed(cache, prompt.data(), static_cast<int>(prompt.size()));
  Rng rng(splitmix64(gen.seed ^ 0x93e11ull));

  std::vector<int> out;
  std::vector<float> masked(cfg_.vocab_size);
  for (int step = 0; step < gen.max_new_tokens; ++step) {
    int next = -1;
    if (!legal.empty()) {
      std::fill(masked.begin(), masked.end(), -std::numeric_limits<float>::infinity());
      for (int id : legal) masked[id] = logits(id);
      if (step == 0)
        for (int id : legal_first) masked[id] = logits(id);
      if (gen.stop_token >= 0) masked[gen.stop_token] = logits(gen.stop_token);
    } else {
      for (int i = 0; i < cfg_.vocab_size; ++i) masked[i] = logits(i);
    }

    if (gen.greedy) {
      next = 0;
      for (int i = 1; i < cfg_.vocab_size; ++i)
        if (masked[i] > masked[next]) next = i;
    } else {
      // temperature, then top-k, then categorical sampling
      std::vector<std::pair<float, int>> cand;
      for (int i = 0; i < cfg_.vocab_size; ++i)
        if (std::isfinite(masked[i]))
          cand.push_back({masked[i] / static_cast<float>(gen.temperature), i});
      if (cand.empty()) throw NumericError("generate: no legal token to sample");
      int k = std::min<int>(gen.top_k, static_cast<int>(cand.size()));
      std::partial_sort(cand.begin(), cand.begin() + k, cand.end(),
                        [](const auto& a, const auto& b) {
                          return a.first > b.first || (a.first == b.first && a.second < b.second);
                        });
      cand.resize(k);
      double mx = cand.front().first, sum = 0;
      std::vector<double> p(k);
      for (int i = 0; i < k; ++i) {
        p[i] = std::exp(cand[i].first - mx);
        sum += p[i];
      }
      double u = rng.uniform() * sum, acc = 0;
      next = cand.back().second;
      for (int i = 0; i < k; ++i) {
        acc += p[i];
        if (u <= acc) {
          next = cand[i].second;
          break;
        }
      }
    }

    out.push_back(next);
    if (next == gen.stop_token) break;
    if (cache.len >= cfg_.context) break;  // ran out of positions
    logits = feed(cache, &next, 1);
  }
  return out;
}

LmTrainStats train_lm(LanguageModel& model, const std::vector<std::vector<int>>& seqs,
                      const std::vector<int>& response_from, const nn::OptimConfig& opt) {
  if (seqs.empty()) throw DataError("lm train: no sequences");
  const LmConfig& cfg = model.config();
  for (const auto& s : seqs) {
    if (s.size() < 2) throw DataError("lm train: sequences need at least two tokens");
    if (static_cast<int>(s.size()) > cfg.context)
      throw DataError("lm train: rendered sequence exceeds the context window");
  }
  if (cfg.response_only && response_from.size() != seqs.size())
    throw ConfigError("lm train: response-only scope needs response_from per sequence");

  nn::Adam adam(model.parameters(), opt.lr);
  Rng batch_rng = Rng::derive(opt.seed, 0x11);
  Rng drop_rng = Rng::derive(opt.seed, 0x12);
  Rng* drop = cfg.dropout > 0 ? &drop_rng : nullptr;

  LmTrainStats stats;
  {
    std::vector<std::vector<int>> probe(seqs.begin(),
                                        seqs.begin() + std::min<size_t>(seqs.size(), 32));
    std::vector<int> probe_from;
    if (cfg.response_only)
      probe_from.assign(response_from.begin(), response_from.begin() + probe.size());
    stats.initial_loss = model.evaluate_loss(probe, probe_from);
  }

  for (int step = 0; step < opt.steps; ++step) {
    adam.set_lr(nn::cosine_lr(opt.lr, step, opt.steps));
    adam.zero_grad();
    double step_loss = 0;
    for (int micro = 0; micro < opt.grad_accum; ++micro) {
      std::vector<std::vector<int>> batch;
      std::vector<int> from;
      for (int b = 0; b < opt.batch_size; ++b) {
        size_t pick = batch_rng.uniform_int(0, static_cast<int64_t>(seqs.size()) - 1);
        batch.push_back(seqs[pick]);
        if (cfg.response_only) from.push_back(response_from[pick]);
      }
      nn::Graph g;
      nn::SeqLayout layout;
      int logits = model.forward(g, batch, layout, drop);
      int loss = g.cross_entropy(logits, packed_targets(batch, from));
      if (opt.grad_accum > 1) loss = g.scale(loss, 1.0f / static_cast<float>(opt.grad_accum));
      double v = g.value(loss)(0);
      if (!std::isfinite(v))
        throw NumericError("lm train: non-finite loss at step " + std::to_string(step));
      step_loss += v;
      g.backward(loss);
      g.harvest_param_grads();
    }
    adam.clip_grad_norm(opt.clip_norm);
    adam.step();
    stats.loss_curve.push_back(step_loss);
  }
  stats.final_loss = stats.loss_curve.empty() ? stats.initial_loss : stats.loss_curve.back();
  return stats;
}

int response_start(const UnifiedVocabulary& vocab, const TaskRegistry& registry,
                   const std::vector<int>& ids) {
  for (size_t i = 0; i < ids.size(); ++i)
    if (registry.by_start_token(vocab, ids[i])) return static_cast<int>(i) + 1;
  throw DataError("response_start: no task start token in sequence");
}

void LanguageModel::save(const std::string& base_path, const nlohmann::json& extra) const {
  auto& self = const_cast<LanguageModel&>(*this);
  std::vector<const nn::Parameter*> params;
  for (auto* p : self.parameters()) params.push_back(p);
  nlohmann::json e = extra;
  e["kind"] = "lm";
  e["config"] = {{"vocab_size", cfg_.vocab_size}, {"d_model", cfg_.d_model},
                 {"layers", cfg_.layers},         {"heads", cfg_.heads},
                 {"context", cfg_.context},       {"dropout", cfg_.dropout},
                 {"response_only", cfg_.response_only}};
  save_tensor_blob(base_path, params, e);
}

LanguageModel LanguageModel::load(const std::string& base_path, nlohmann::json* extra_out) {
  TensorBlob blob = load_tensor_blob(base_path);
  if (blob.extra.value("kind", "") != std::string("lm"))
    throw DataError("not an lm checkpoint: " + base_path);
  LmConfig cfg;
  try {
    const auto& c = blob.extra.at("config");
    cfg.vocab_size = c.at("vocab_size").get<int>();
    cfg.d_model = c.at("d_model").get<int>();
    cfg.layers = c.at("layers").get<int>();
    cfg.heads = c.at("heads").get<int>();
    cfg.context = c.at("context").get<int>();
    cfg.dropout = c.at("dropout").get<double>();
    cfg.response_only = c.at("response_only").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("lm checkpoint config: ") + e.what());
  }
  LanguageModel model(cfg);
  load_parameters(blob, model.parameters());
  if (extra_out) *extra_out = blob.extra;
  return model;
}

void ModelBundle::save(const std::string& dir) const {
  nlohmann::json extra;
  extra["vocab"] = vocab.manifest();
  extra["tasks"] = registry.manifest();
  lm.save(dir + "/lm", extra);
  robot_vq.save(dir + "/robot_vq");
  human_vq.save(dir + "/human_vq");
  nlohmann::ordered_json top;
  top["format"] = "motionlm-bundle-v1";
  top["components"] = {"lm", "robot_vq", "human_vq"};
  atomic_write_text(dir + "/bundle.json", top.dump(2) + "\n");
}

ModelBundle ModelBundle::load(const std::string& dir) {
  nlohmann::json top;
  try {
    top = nlohmann::json::parse(read_text_file(dir + "/bundle.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bundle manifest: ") + e.what());
  }
  if (top.value("format", "") != std::string("motionlm-bundle-v1"))
    throw DataError("unrecognized bundle format in " + dir);
  ModelBundle bundle;
  nlohmann::json extra;
  bundle.lm = LanguageModel::load(dir + "/lm", &extra);
  try {
    bundle.vocab = UnifiedVocabulary::from_manifest(extra.at("vocab"));
    bundle.registry = TaskRegistry::from_manifest(extra.at("tasks"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bundle manifests: ") + e.what());
  }
  bundle.robot_vq = VqVae::load(dir + "/robot_vq");
  bundle.human_vq = VqVae::load(dir + "/human_vq");
  if (bundle.lm.config().vocab_size != bundle.vocab.size())
    throw DataError("bundle: lm vocab size does not match the vocabulary manifest");
  if (bundle.robot_vq.config().N != bundle.vocab.segment_size(Segment::Robot) ||
      bundle.human_vq.config().N != bundle.vocab.segment_size(Segment::Human))
    throw DataError("bundle: tokenizer codebook sizes do not match the vocabulary");
  return bundle;
}

std::vector<int> legal_output_ids(const UnifiedVocabulary& vocab, const TaskSpec& task) {
  std::vector<int> ids;
  int n = vocab.segment_size(task.output_seg);
  if (task.output_seg == Segment::Text) n = 256;  // bytes only, no EOT
  for (int i = 0; i < n; ++i) ids.push_back(vocab.to_global(task.output_seg, i));
  return ids;
}

namespace {

// prompt = prefix ++ x ++ t_st (++ gait); generate; strip end; return output ids
std::vector<int> run_task(const ModelBundle& bundle, const TaskSpec& task,
                          const std::vector<int>& input, std::optional<Gait> gait,
                          const GenerationConfig& gen) {
  const UnifiedVocabulary& vocab = bundle.vocab;
  std::vector<int> prompt = vocab.encode_text(task.prefix);
  prompt.insert(prompt.end(), input.begin(), input.end());
  prompt.push_back(vocab.special(task.start_name));
  if (gait) {
    if (!task.gait_allowed) throw ConfigError("task " + task.name + " does not take a gait");
    prompt.push_back(vocab.gait_token(*gait));
  }

  GenerationConfig g = gen;
  g.stop_token = vocab.special(task.end_name);
  std::vector<int> legal, legal_first;
  if (g.constrained) {
    legal = legal_output_ids(vocab, task);
    legal.push_back(g.stop_token);
    if (task.gait_allowed && !gait)
      for (const auto& name : {Gait::Trot, Gait::Bound})
        legal_first.push_back(vocab.gait_token(name));
  }

  std::vector<int> out = bundle.lm.generate(prompt, g, legal, legal_first);
  if (!out.empty() && out.back() == g.stop_token) out.pop_back();
  // a leading gait token predicted by the model is part of the template, not output
  if (!out.empty() && vocab.from_global(out.front()).first == Segment::Gait)
    out.erase(out.begin());
  if (out.empty()) throw DataError("generation produced no output tokens before stopping");
  return out;
}

std::vector<int> to_local(const UnifiedVocabulary& vocab, Segment seg,
                          const std::vector<int>& ids) {
  std::vector<int> local;
  for (int id : ids) {
    auto [s, l] = vocab.from_global(id);
    if (s != seg)
      throw DataError("generated token outside the " + segment_label(seg) + " segment");
    local.push_back(l);
  }
  return local;
}

}  // namespace

Trajectory text_to_motion(const ModelBundle& bundle, const std::string& text,
                          std::optional<Gait> gait, const GenerationConfig& gen,
                          const std::string& task_name, double dt) {
  const TaskSpec& task = bundle.registry.by_name(task_name);
  if (task.input_seg != Segment::Text || (task.output_seg != Segment::Robot &&
                                          task.output_seg != Segment::Human))
    throw ConfigError("text_to_motion: task must map text to motion");
  auto out = run_task(bundle, task, bundle.vocab.encode_text(text), gait, gen);
  const VqVae& vq = task.output_seg == Segment::Robot ? bundle.robot_vq : bundle.human_vq;
  return vq.decode(to_local(bundle.vocab, task.output_seg, out), dt);
}

std::string motion_to_text(const ModelBundle& bundle, const Trajectory& traj,
                           const GenerationConfig& gen) {
  const TaskSpec& task = bundle.registry.by_name("caption");
  std::vector<int> input;
  for (int t : bundle.robot_vq.encode(traj))
    input.push_back(bundle.vocab.to_global(Segment::Robot, t));
  auto out = run_task(bundle, task, input, std::nullopt, gen);
  return bundle.vocab.decode_text(out);
}

Trajectory goal_to_motion(const ModelBundle& bundle, int row, int col,
                          std::optional<Gait> gait, const GenerationConfig& gen, double dt) {
  const TaskSpec& task = bundle.registry.by_name("goal");
  std::vector<int> input = {bundle.vocab.grid_token_from_cell(row, col)};
  auto out = run_task(bundle, task, input, gait, gen);
  return bundle.robot_vq.decode(to_local(bundle.vocab, Segment::Robot, out), dt);
}

}  // namespace motionlm
