// Uniform-binning baseline: per-step symbols "terminate dx dy dpsi" with
// 256 bins per dimension between the corpus 1st and 99th quantiles.
#pragma once

#include <string>
#include <vector>

#include "motionlm/motion.hpp"

namespace motionlm {

// Linear-interpolated empirical quantile at rank (n-1)*p; consumes values.
double interp_quantile(std::vector<float> values, double p);

struct BinningScheme {
  struct Dim {
    std::string name;
    double q01 = 0, q99 = 0;
  };
  std::vector<Dim> dims;
  int bins = 256;

  bool fitted() const { return !dims.empty(); }
  double width(int d) const { return (dims[d].q99 - dims[d].q01) / bins; }

  int bin_index(int d, double v) const;      // clamp(floor((v-q01)/w), 0, bins-1)
  double bin_center(int d, int index) const;

  // One pose -> "t b0 b1 ... b_{D-1}" with t = terminate flag (0/1).
  std::string encode_pose(const std::vector<float>& pose, bool terminate) const;
  std::vector<float> decode_pose(const std::string& symbols) const;

  // Whole trajectory: T*(D+1) whitespace-separated symbols, terminate=1 on
  // the last step. Decode stops after the terminate step.
  std::string encode_trajectory(const Trajectory& traj) const;
  Trajectory decode_trajectory(const std::string& symbols, const EmbodimentSpec& embodiment,
                               double dt) const;

  void check_fitted() const;
};

// Fit from raw per-dimension samples; names default to d0..dN, with the
// robot channels named after the Eq. 3 symbols (dx, dy, dpsi).
BinningScheme fit_binning(const std::vector<std::vector<float>>& per_dim_values,
                          const std::vector<std::string>& names = {});
BinningScheme fit_binning(const std::vector<CaptionedTrajectory>& corpus);

}  // namespace motionlm
