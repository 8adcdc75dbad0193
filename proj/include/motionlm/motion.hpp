// Trajectory data model for the two embodiments plus augmentation
// (mirroring, time-scaling) and SE2 integration for goal scoring.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "motionlm/common.hpp"
#include "motionlm/nn/tensor.hpp"

namespace motionlm {

enum class EmbodimentKind { Robot, Human, Custom };

// Robot pose channels: lin_x forward (m/s), lin_z lateral (m/s), ang_y yaw
// rate (rad/s); the ground plane is xz, y is up.
inline constexpr int kRobotDim = 3;
inline constexpr int kRobotLinX = 0, kRobotLinZ = 1, kRobotAngY = 2;

// Human pose layout (root-relative, k joints):
//   [0] root_ang_vel, [1..2] root_vel_xz, [3] root_height,
//   joint_pos 3*(k-1), joint_vel 3*k, joint_rot 6*(k-1), foot_contact 4.
// Positions and rotations exclude the root, velocities include it, which is
// what makes k=22 come out to 263 dims.
struct HumanLayout {
  int k;
  explicit HumanLayout(int joints);

  int dim() const { return 12 * k - 1; }
  int root_ang_vel() const { return 0; }
  int root_vel_xz() const { return 1; }
  int root_height() const { return 3; }
  int joint_pos() const { return 4; }
  int joint_vel() const { return 4 + 3 * (k - 1); }
  int joint_rot() const { return joint_vel() + 3 * k; }
  int foot_contact() const { return joint_rot() + 6 * (k - 1); }

  static int joints_for_dim(int dim);  // inverse of dim(); throws if invalid
};

struct EmbodimentSpec {
  EmbodimentKind kind = EmbodimentKind::Robot;
  int dim = kRobotDim;
  int k = 0;  // human joint count; 0 otherwise

  static EmbodimentSpec robot();
  static EmbodimentSpec human(int k = 5);
  static EmbodimentSpec custom(int dim);
  static EmbodimentSpec from_name(const std::string& name, int dim);

  std::string name() const;
  bool operator==(const EmbodimentSpec& o) const = default;
};

struct Trajectory {
  EmbodimentSpec embodiment;
  double dt = 0.1;
  nn::Tensor poses;  // [T, dim]

  int len() const { return poses.rows(); }
  int dim() const { return poses.cols(); }
  void validate() const;  // throws DataError on violated invariants
};

enum class Gait { Trot, Bound };
std::string gait_name(Gait g);
Gait gait_from_name(const std::string& s);

struct CaptionedTrajectory {
  Trajectory trajectory;
  std::string caption;
  std::optional<std::array<int, 2>> goal_cell;  // [row, col]
  std::optional<Gait> gait;
};

// Reflection across the forward axis: negate lateral/yaw channels, swap
// left/right joints, rewrite "left"<->"right" in the caption, reflect the
// goal cell row. Exact involution (negations and swaps are exact).
Trajectory mirror(const Trajectory& traj);
CaptionedTrajectory mirror(const CaptionedTrajectory& sample, int grid_rows = 28);
std::string mirror_caption(const std::string& caption);

// Resample to T' = round(T*factor) and divide velocity-typed channels by
// factor so the integrated path is preserved. factor must be in [0.25, 4].
Trajectory time_scale(const Trajectory& traj, double factor);

struct Se2Pose {
  double x = 0, z = 0, heading = 0;
};

// Euler integration from the origin at heading 0; returns T+1 poses.
// Robot embodiment only.
std::vector<Se2Pose> integrate_se2(const Trajectory& traj);

}  // namespace motionlm
