// Decoder-only transformer over the unified vocabulary: GPT-style blocks
// with tied input/output embeddings, packed-sequence training on rendered
// templates, and incremental KV-cache generation with optional
// segment-constrained decoding. ModelBundle groups the LM with the
// vocabulary, task registry, and both motion tokenizers in one directory.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "motionlm/instruction.hpp"
#include "motionlm/nn/layers.hpp"
#include "motionlm/nn/optim.hpp"
#include "motionlm/vocab.hpp"
#include "motionlm/vqvae.hpp"

namespace motionlm {

struct LmConfig {
  int vocab_size = 1693;
  int d_model = 256;
  int layers = 4;
  int heads = 4;
  int context = 320;
  double dropout = 0.0;
  bool response_only = false;  // loss scope: mask tokens before t_st
  uint64_t seed = 0;

  void validate() const;
};

struct GenerationConfig {
  double temperature = 1.0;
  int top_k = 40;
  int max_new_tokens = 64;
  int stop_token = -1;    // task end id; -1 = run to max_new_tokens
  bool constrained = true;
  bool greedy = false;    // argmax decoding (temperature/top_k ignored)
  uint64_t seed = 0;

  void validate() const;
};

struct LmTrainStats {
  std::vector<double> loss_curve;  // every step
  double initial_loss = 0;
  double final_loss = 0;
};

class LanguageModel {
 public:
  LanguageModel() = default;
  explicit LanguageModel(LmConfig cfg);

  const LmConfig& config() const { return cfg_; }
  std::vector<nn::Parameter*> parameters();
  int64_t parameter_count();

  // Graph forward over packed sequences; returns the logits node
  // [sum(len), vocab] and fills `layout`.
  int forward(nn::Graph& g, const std::vector<std::vector<int>>& seqs,
              nn::SeqLayout& layout, Rng* drop_rng = nullptr);

  // Mean next-token CE over the given sequences (no dropout, no grad).
  // response_from[i] masks targets before that index; empty = full scope.
  double evaluate_loss(const std::vector<std::vector<int>>& seqs,
                       const std::vector<int>& response_from = {});

  // Incremental inference state: per-layer K/V rows for the fed prefix.
  struct KvCache {
    std::vector<Eigen::MatrixXf> k, v;  // [context, d_model] each layer
    int len = 0;
  };
  KvCache make_cache() const;
  // Append `n` ids after the cache contents; returns logits of the last
  // position. Throws DataError past the context window.
  Eigen::VectorXf feed(KvCache& cache, const int* ids, int n) const;

  // Returns the newly generated ids; the stop token, when produced, is the
  // last element. `legal` restricts every step (it should include the stop
  // token); `legal_first` adds ids allowed only at the first step (gait).
  std::vector<int> generate(const std::vector<int>& prompt, const GenerationConfig& gen,
                            const std::vector<int>& legal = {},
                            const std::vector<int>& legal_first = {}) const;

  void save(const std::string& base_path, const nlohmann::json& extra = {}) const;
  static LanguageModel load(const std::string& base_path, nlohmann::json* extra_out = nullptr);

 private:
  LmConfig cfg_;
  nn::Embedding tok_, pos_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm lnf_;
};

// Next-token training with cosine lr, clipping, and optional accumulation
// (each step sees batch_size * grad_accum sequences). When the model's loss
// scope is response-only, response_from must give the first in-loss target
// index per sequence (the position right after t_st).
LmTrainStats train_lm(LanguageModel& model, const std::vector<std::vector<int>>& seqs,
                      const std::vector<int>& response_from, const nn::OptimConfig& opt);

// First in-loss target index for a rendered sequence: the position after
// the task start token.
int response_start(const UnifiedVocabulary& vocab, const TaskRegistry& registry,
                   const std::vector<int>& ids);

struct ModelBundle {
  LanguageModel lm;
  UnifiedVocabulary vocab;
  TaskRegistry registry;
  VqVae robot_vq, human_vq;

  void save(const std::string& dir) const;
  static ModelBundle load(const std::string& dir);
};

// Task pipelines: render prompt -> generate -> parse -> decode.
Trajectory text_to_motion(const ModelBundle& bundle, const std::string& text,
                          std::optional<Gait> gait, const GenerationConfig& gen,
                          const std::string& task = "t2rm", double dt = 0.1);
std::string motion_to_text(const ModelBundle& bundle, const Trajectory& traj,
                           const GenerationConfig& gen);
Trajectory goal_to_motion(const ModelBundle& bundle, int row, int col,
                          std::optional<Gait> gait, const GenerationConfig& gen,
                          double dt = 0.1);

// Legal-id sets for constrained decoding (text excludes the non-byte EOT).
std::vector<int> legal_output_ids(const UnifiedVocabulary& vocab, const TaskSpec& task);

}  // namespace motionlm
