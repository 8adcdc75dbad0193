// Contrastive text-motion feature extractor: a conv encoder over
// time-resampled trajectories and a byte-conv encoder over captions, trained
// with a symmetric InfoNCE objective so matched pairs land close in a shared
// L2-normalized feature space. Motion-only metrics (FID, Diversity, MMod)
// and retrieval metrics (R-Precision, MMDist) consume these features.
#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "motionlm/motion.hpp"
#include "motionlm/nn/layers.hpp"
#include "motionlm/nn/optim.hpp"

namespace motionlm {

struct FeatureConfig {
  int f = 64;           // output feature dim
  int hidden = 64;      // conv channel width
  int text_embed = 32;  // byte embedding dim
  int resample_T = 32;  // motion branch input length
  double tau = 0.1;     // InfoNCE temperature
  uint64_t seed = 0;

  void validate() const;
};

// [T, dim] poses -> channels-first [dim, n] with endpoint-inclusive linear
// interpolation along time.
nn::Tensor resample_channels_first(const nn::Tensor& poses, int n);

class FeatureExtractor {
 public:
  FeatureExtractor() = default;
  FeatureExtractor(EmbodimentSpec embodiment, FeatureConfig cfg = {});

  const FeatureConfig& config() const { return cfg_; }
  const EmbodimentSpec& embodiment() const { return emb_; }
  std::vector<nn::Parameter*> parameters();

  // Graph-path batch encoders; both return a [batch, f] node of unit rows.
  int encode_motion_batch(nn::Graph& g, const std::vector<const Trajectory*>& batch);
  int encode_text_batch(nn::Graph& g, const std::vector<std::string>& batch);

  // Inference features (no grad); deterministic in the inputs.
  Eigen::VectorXf motion_feature(const Trajectory& traj);
  Eigen::VectorXf text_feature(const std::string& text);

  void save(const std::string& base_path) const;
  static FeatureExtractor load(const std::string& base_path);

 private:
  EmbodimentSpec emb_;
  FeatureConfig cfg_;
  nn::Conv1d mc1_, mc2_, mc3_;  // motion branch: [dim,T] -> [hidden,T/4]
  nn::Linear mhead_;
  nn::Embedding temb_;          // byte table [256, text_embed]
  nn::Conv1d tc1_;              // byte trigram conv
  nn::Linear thead_;
};

struct FeatureTrainStats {
  std::vector<double> loss_curve;
  double val_top1 = 0;  // 32-way retrieval accuracy on the held-out split
};

// Symmetric InfoNCE over in-batch pairs; the last ceil(val_fraction*n)
// samples are held out for the retrieval check.
FeatureTrainStats train_feature_extractor(FeatureExtractor& fx,
                                          const std::vector<CaptionedTrajectory>& corpus,
                                          const nn::OptimConfig& opt,
                                          double val_fraction = 0.1);

// Text-query -> motion-candidate retrieval: fraction of trials where the
// matched motion is the nearest of n_candidates by feature distance.
double retrieval_top1(FeatureExtractor& fx, const std::vector<CaptionedTrajectory>& pairs,
                      int n_candidates, int trials, uint64_t seed);

}  // namespace motionlm
