// Per-embodiment VQ-VAE motion tokenizer: conv encoder with temporal
// downsampling l, nearest-neighbor quantization against an N x d codebook
// (straight-through gradients), mirrored decoder. Codebook learning is EMA
// with dead-code reset by default; a gradient-based embedding loss is the
// alternative mode. Loss = L_r + L_e + beta*L_c + lambda*L_vel, all
// smooth-L1.
#pragma once

#include <string>
#include <vector>

#include "motionlm/motion.hpp"
#include "motionlm/nn/layers.hpp"
#include "motionlm/nn/optim.hpp"

namespace motionlm {

struct VqConfig {
  int N = 128;
  int d = 64;
  int l = 4;             // temporal downsampling (two stride-2 stages)
  int hidden = 128;
  double beta = 0.25;    // commitment weight
  double lambda_vel = 0.5;
  double smooth_beta = 1.0;
  bool ema = true;       // EMA codebook (L_e reported as 0) vs gradient L_e
  double gamma = 0.99;   // EMA decay
  double reset_threshold = 1.0;
  double ema_eps = 1e-8; // Laplace smoothing in entries = sums/(usage+eps)
  uint64_t seed = 0;

  void validate() const;
};

// Argmin_j ||z - entries[j]||^2 with ties broken toward the lowest index.
// Distances accumulate in double so the brute-force oracle agrees exactly.
int quantize(const float* z, const nn::Tensor& entries);

struct Codebook {
  nn::Parameter entries;        // [N, d]
  std::vector<double> usage;    // EMA usage counts
  nn::Tensor ema_sums;          // [N, d]

  Codebook() = default;
  Codebook(int N, int d, Rng& rng);
  int size() const { return entries.value.rows(); }
  int dim() const { return entries.value.cols(); }

  // One EMA step from the batch's latent columns and their assignments,
  // then dead-code reset (usage < threshold -> entry re-seeded from batch).
  void ema_update_and_reset(const std::vector<nn::Tensor>& latents,  // [d,Tl] each
                            const std::vector<std::vector<int>>& assignments,
                            const VqConfig& cfg, Rng& rng);
};

struct VqLossReport {
  double reconstruction = 0;
  double embedding = 0;
  double commitment = 0;   // unweighted
  double velocity_reg = 0; // unweighted
  double total = 0;        // r + e + beta*c + lambda*v
};

class VqVae {
 public:
  VqVae() = default;
  VqVae(EmbodimentSpec embodiment, VqConfig cfg);

  const VqConfig& config() const { return cfg_; }
  const EmbodimentSpec& embodiment() const { return embodiment_; }
  Codebook& codebook() { return codebook_; }
  const Codebook& codebook() const { return codebook_; }

  std::vector<nn::Parameter*> net_parameters();  // encoder+decoder (no codebook)
  std::vector<nn::Parameter*> all_parameters();  // including codebook entries

  struct ForwardResult {
    int loss_node = -1;
    int z_node = -1;   // encoder output (pre-quantization)
    int st_node = -1;  // decoder input (straight-through)
    VqLossReport report;
    std::vector<int> tokens;
    nn::Tensor latent;  // [d, T/l] encoder output values
  };

  // Builds the training graph for one [T, D] trajectory tensor. T is padded
  // to a multiple of l by repeating the last pose.
  ForwardResult forward(nn::Graph& g, const nn::Tensor& poses);

  std::vector<int> encode(const Trajectory& traj) const;  // ceil(T/l) tokens
  Trajectory decode(const std::vector<int>& tokens, double dt, int T = -1) const;

  VqLossReport evaluate(const std::vector<CaptionedTrajectory>& corpus) const;

  void save(const std::string& base_path) const;
  static VqVae load(const std::string& base_path);

 private:
  VqConfig cfg_;
  EmbodimentSpec embodiment_;
  nn::Conv1d enc1_, enc2_, enc3_;
  nn::Conv1d dec1_, dec2_, dec3_;
  Codebook codebook_;

  int encode_graph(nn::Graph& g, int x) const;   // [D,T] -> [d,T/l]
  int decode_graph(nn::Graph& g, int z) const;   // [d,Tl] -> [D,Tl*l]
  nn::Tensor padded_channels(const nn::Tensor& poses) const;  // [T,D] -> [D,T4]
};

struct VqTrainStats {
  std::vector<double> loss_curve;      // total loss per logged step
  VqLossReport final_heldout;
  double heldout_utilization = 0;      // fraction of codes used on held-out
};

// Train on `corpus` with `held_out` used only for the final report.
VqTrainStats train_vqvae(VqVae& model, const std::vector<CaptionedTrajectory>& corpus,
                         const std::vector<CaptionedTrajectory>& held_out,
                         const nn::OptimConfig& opt);

// Fraction of distinct codes used when encoding the given corpus.
double codebook_utilization(const VqVae& model,
                            const std::vector<CaptionedTrajectory>& corpus);

}  // namespace motionlm
