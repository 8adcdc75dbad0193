#include "motionlm/motion.hpp"

#include <cmath>
#include <sstream>

namespace motionlm {

HumanLayout::HumanLayout(int joints) : k(joints) {
  if (k < 2) throw ConfigError("human layout needs at least 2 joints");
}

int HumanLayout::joints_for_dim(int dim) {
  if (dim < 23 || (dim + 1) % 12 != 0)
    throw DataError("not a human pose dimension: " + std::to_string(dim));
  return (dim + 1) / 12;
}

EmbodimentSpec EmbodimentSpec::robot() { return {EmbodimentKind::Robot, kRobotDim, 0}; }

EmbodimentSpec EmbodimentSpec::human(int k) {
  HumanLayout layout(k);
  return {EmbodimentKind::Human, layout.dim(), k};
}

EmbodimentSpec EmbodimentSpec::custom(int dim) {
  if (dim < 1) throw ConfigError("custom embodiment needs dim >= 1");
  return {EmbodimentKind::Custom, dim, 0};
}

EmbodimentSpec EmbodimentSpec::from_name(const std::string& name, int dim) {
  if (name == "robot") {
    if (dim != kRobotDim) throw DataError("robot pose must have 3 dims");
    return robot();
  }
  if (name == "human") return human(HumanLayout::joints_for_dim(dim));
  if (name == "custom") return custom(dim);
  throw DataError("unknown embodiment: " + name);
}

std::string EmbodimentSpec::name() const {
  switch (kind) {
    case EmbodimentKind::Robot: return "robot";
    case EmbodimentKind::Human: return "human";
    case EmbodimentKind::Custom: return "custom";
  }
  throw ConfigError("bad embodiment kind");
}

void Trajectory::validate() const {
  if (dt <= 0) throw DataError("trajectory dt must be positive");
  if (poses.rank() != 2 || len() < 1) throw DataError("trajectory needs at least one pose");
  if (dim() != embodiment.dim)
    throw DataError("pose dim " + std::to_string(dim()) + " != embodiment dim " +
                    std::to_string(embodiment.dim));
  if (!poses.all_finite()) throw DataError("trajectory contains non-finite values");
}

std::string gait_name(Gait g) { return g == Gait::Trot ? "trot" : "bound"; }

Gait gait_from_name(const std::string& s) {
  if (s == "trot") return Gait::Trot;
  if (s == "bound") return Gait::Bound;
  throw DataError("unknown gait: " + s);
}

namespace {

// Left/right pairing over the non-root joint list [0, k-2]: consecutive
// joints pair up; a trailing unpaired joint is centerline (maps to itself).
int pair_partner(int j, int count) {
  int p = (j % 2 == 0) ? j + 1 : j - 1;
  return p < count ? p : j;
}

void mirror_human_inplace(nn::Tensor& poses, const HumanLayout& L) {
  int T = poses.rows();
  int nr = L.k - 1;  // non-root joints
  std::vector<float> row(poses.cols());
  for (int t = 0; t < T; ++t) {
    for (int c = 0; c < poses.cols(); ++c) row[c] = poses(t, c);
    poses(t, L.root_ang_vel()) = -row[L.root_ang_vel()];
    poses(t, L.root_vel_xz() + 1) = -row[L.root_vel_xz() + 1];  // lateral z
    for (int j = 0; j < nr; ++j) {
      int p = pair_partner(j, nr);
      for (int c = 0; c < 3; ++c) {
        float v = row[L.joint_pos() + 3 * p + c];
        poses(t, L.joint_pos() + 3 * j + c) = (c == 2) ? -v : v;
      }
      for (int c = 0; c < 6; ++c) {
        float v = row[L.joint_rot() + 6 * p + c];
        // 6D rotation = first two matrix columns; reflection across the
        // xy-plane negates the z entry of each column (components 2 and 5)
        poses(t, L.joint_rot() + 6 * j + c) = (c == 2 || c == 5) ? -v : v;
      }
    }
    for (int j = 0; j < L.k; ++j) {
      int p = (j == 0) ? 0 : pair_partner(j - 1, nr) + 1;  // root maps to root
      for (int c = 0; c < 3; ++c) {
        float v = row[L.joint_vel() + 3 * p + c];
        poses(t, L.joint_vel() + 3 * j + c) = (c == 2) ? -v : v;
      }
    }
    // feet [FL, FR, RL, RR] -> [FR, FL, RR, RL]
    int fc = L.foot_contact();
    poses(t, fc + 0) = row[fc + 1];
    poses(t, fc + 1) = row[fc + 0];
    poses(t, fc + 2) = row[fc + 3];
    poses(t, fc + 3) = row[fc + 2];
  }
}

}  // namespace

Trajectory mirror(const Trajectory& traj) {
  traj.validate();
  Trajectory out = traj;
  switch (traj.embodiment.kind) {
    case EmbodimentKind::Robot:
      for (int t = 0; t < out.len(); ++t) {
        out.poses(t, kRobotLinZ) = -out.poses(t, kRobotLinZ);
        out.poses(t, kRobotAngY) = -out.poses(t, kRobotAngY);
      }
      break;
    case EmbodimentKind::Human:
      mirror_human_inplace(out.poses, HumanLayout(traj.embodiment.k));
      break;
    case EmbodimentKind::Custom:
      throw ConfigError("mirror: unsupported embodiment 'custom'");
  }
  return out;
}

std::string mirror_caption(const std::string& caption) {
  std::istringstream in(caption);
  std::ostringstream out;
  std::string word;
  bool first = true;
  while (in >> word) {
    if (!first) out << ' ';
    first = false;
    if (word == "left") out << "right";
    else if (word == "right") out << "left";
    else out << word;
  }
  return out.str();
}

CaptionedTrajectory mirror(const CaptionedTrajectory& sample, int grid_rows) {
  CaptionedTrajectory out = sample;
  out.trajectory = mirror(sample.trajectory);
  out.caption = mirror_caption(sample.caption);
  if (out.goal_cell) {
    // z flips sign, so the row index reflects; columns (x) stay put
    (*out.goal_cell)[0] = grid_rows - 1 - (*out.goal_cell)[0];
  }
  return out;
}

namespace {

// Velocity-typed channel mask per embodiment: these divide by the
// time-scale factor; all others are resampled unchanged.
std::vector<bool> velocity_mask(const EmbodimentSpec& e) {
  std::vector<bool> m(e.dim, false);
  switch (e.kind) {
    case EmbodimentKind::Robot:
      m.assign(3, true);
      break;
    case EmbodimentKind::Human: {
      HumanLayout L(e.k);
      m[L.root_ang_vel()] = true;
      m[L.root_vel_xz()] = m[L.root_vel_xz() + 1] = true;
      for (int c = 0; c < 3 * L.k; ++c) m[L.joint_vel() + c] = true;
      break;
    }
    case EmbodimentKind::Custom:
      break;  // no channel semantics; resample only
  }
  return m;
}

}  // namespace

Trajectory time_scale(const Trajectory& traj, double factor) {
  traj.validate();
  if (factor < 0.25 || factor > 4.0)
    throw ConfigError("time_scale factor must be in [0.25, 4]");
  int T = traj.len();
  int Tn = std::max(1, static_cast<int>(std::lround(T * factor)));
  Trajectory out;
  out.embodiment = traj.embodiment;
  out.dt = traj.dt;
  out.poses = nn::Tensor({Tn, traj.dim()});
  auto mask = velocity_mask(traj.embodiment);
  float inv = static_cast<float>(1.0 / factor);
  for (int i = 0; i < Tn; ++i) {
    double u = (Tn == 1) ? 0.0 : static_cast<double>(i) * (T - 1) / (Tn - 1);
    int lo = static_cast<int>(u);
    int hi = std::min(lo + 1, T - 1);
    float a = static_cast<float>(u - lo);
    for (int c = 0; c < traj.dim(); ++c) {
      // lo + a*(hi-lo): exact for constant signals, unlike (1-a)*lo + a*hi
      float v = traj.poses(lo, c) + a * (traj.poses(hi, c) - traj.poses(lo, c));
      out.poses(i, c) = mask[c] ? v * inv : v;
    }
  }
  return out;
}

std::vector<Se2Pose> integrate_se2(const Trajectory& traj) {
  traj.validate();
  if (traj.embodiment.kind != EmbodimentKind::Robot)
    throw ConfigError("integrate_se2: robot embodiment required");
  std::vector<Se2Pose> out;
  out.reserve(traj.len() + 1);
  Se2Pose p;
  out.push_back(p);
  for (int t = 0; t < traj.len(); ++t) {
    double vx = traj.poses(t, kRobotLinX);
    double vz = traj.poses(t, kRobotLinZ);
    double w = traj.poses(t, kRobotAngY);
    double c = std::cos(p.heading), s = std::sin(p.heading);
    p.x += (vx * c - vz * s) * traj.dt;
    p.z += (vx * s + vz * c) * traj.dt;
    p.heading += w * traj.dt;
    out.push_back(p);
  }
  return out;
}

}  // namespace motionlm
