#include "motionlm/synth.hpp"

#include <cmath>
#include <sstream>

namespace motionlm {

void SynthConfig::validate() const {
  if (n_samples < 1) throw ConfigError("synth: n_samples must be >= 1");
  if (dt <= 0) throw ConfigError("synth: dt must be positive");
  if (min_segments < 1 || max_segments < min_segments)
    throw ConfigError("synth: bad segment count range");
  if (min_len < min_segments || max_len < min_len) throw ConfigError("synth: bad length range");
  if (min_speed <= 0 || max_speed < min_speed) throw ConfigError("synth: bad speed range");
  if (min_yaw <= 0 || max_yaw < min_yaw) throw ConfigError("synth: bad yaw range");
  if (noise_std < 0 || curvature_max < 0) throw ConfigError("synth: negative noise");
  if (bound_prob < 0 || bound_prob > 1) throw ConfigError("synth: bad bound_prob");
  if (human_k < 2) throw ConfigError("synth: human_k must be >= 2");
  if (grid_extent <= 0 || grid_resolution <= 0) throw ConfigError("synth: bad grid");
}

namespace {

bool is_linear(Primitive p) {
  return p == Primitive::Forward || p == Primitive::Backward ||
         p == Primitive::StrafeLeft || p == Primitive::StrafeRight;
}
bool is_turn(Primitive p) { return p == Primitive::TurnLeft || p == Primitive::TurnRight; }

const char* verb_phrase(Primitive p, bool person) {
  switch (p) {
    case Primitive::Forward: return "walks forward";
    case Primitive::Backward: return "walks backward";
    case Primitive::StrafeLeft: return person ? "steps left" : "strafes left";
    case Primitive::StrafeRight: return person ? "steps right" : "strafes right";
    case Primitive::TurnLeft: return "turns left";
    case Primitive::TurnRight: return "turns right";
    case Primitive::Stop: return "stands still";
  }
  return "";
}

const char* gerund_phrase(Primitive p, bool person) {
  switch (p) {
    case Primitive::Forward: return "walking forward";
    case Primitive::Backward: return "walking backward";
    case Primitive::StrafeLeft: return person ? "stepping left" : "strafing left";
    case Primitive::StrafeRight: return person ? "stepping right" : "strafing right";
    case Primitive::TurnLeft: return "turning left";
    case Primitive::TurnRight: return "turning right";
    case Primitive::Stop: return "standing still";
  }
  return "";
}

const char* speed_adverb(const PlanSegment& seg) {
  if (!is_linear(seg.prim)) return nullptr;
  if (seg.speed <= kSlowSpeed) return "slowly";
  if (seg.speed > kFastSpeed) return "quickly";  // strict: 1.0 m/s is unmarked
  return nullptr;
}

// Body-frame velocity command of a segment (before gait/arc effects).
void segment_velocity(const PlanSegment& seg, double& vx, double& vz, double& w) {
  vx = vz = w = 0;
  switch (seg.prim) {
    case Primitive::Forward: vx = seg.speed; break;
    case Primitive::Backward: vx = -seg.speed; break;
    case Primitive::StrafeLeft: vz = seg.speed; break;
    case Primitive::StrafeRight: vz = -seg.speed; break;
    case Primitive::TurnLeft: w = seg.speed; break;
    case Primitive::TurnRight: w = -seg.speed; break;
    case Primitive::Stop: break;
  }
}

}  // namespace

MotionPlan sample_plan(const SynthConfig& cfg, Rng& rng) {
  MotionPlan plan;
  int n_seg = rng.uniform_int(cfg.min_segments, cfg.max_segments);
  int total = rng.uniform_int(cfg.min_len, cfg.max_len);
  plan.gait = rng.bernoulli(cfg.bound_prob) ? Gait::Bound : Gait::Trot;
  static constexpr Primitive kAll[] = {
      Primitive::Forward,     Primitive::Backward, Primitive::StrafeLeft,
      Primitive::StrafeRight, Primitive::TurnLeft, Primitive::TurnRight,
      Primitive::Stop,
  };
  Primitive prev = Primitive::Stop;
  for (int i = 0; i < n_seg; ++i) {
    PlanSegment seg;
    do {
      seg.prim = kAll[rng.uniform_int(0, 6)];
    } while (i > 0 && seg.prim == prev);
    prev = seg.prim;
    seg.steps = total / n_seg + (i < total % n_seg ? 1 : 0);
    seg.speed = is_turn(seg.prim) ? rng.uniform(cfg.min_yaw, cfg.max_yaw)
                                  : rng.uniform(cfg.min_speed, cfg.max_speed);
    plan.segments.push_back(seg);
  }
  return plan;
}

std::string caption_for(const MotionPlan& plan, EmbodimentKind embodiment, bool question) {
  bool person = embodiment == EmbodimentKind::Human;
  std::ostringstream out;
  if (question) {
    out << "what does ";
    for (size_t i = 0; i < plan.segments.size(); ++i) {
      if (i) out << " then ";
      out << gerund_phrase(plan.segments[i].prim, person);
      if (const char* adv = speed_adverb(plan.segments[i])) out << ' ' << adv;
    }
    out << " look like";
    return out.str();
  }
  out << (person ? "a person" : "the robot");
  if (!person && plan.gait == Gait::Bound) out << " joyfully";
  for (size_t i = 0; i < plan.segments.size(); ++i) {
    out << (i ? " then " : " ");
    out << verb_phrase(plan.segments[i].prim, person);
    if (const char* adv = speed_adverb(plan.segments[i])) out << ' ' << adv;
  }
  return out.str();
}

Trajectory render_robot(const MotionPlan& plan, const SynthConfig& cfg, Rng& rng) {
  int T = 0;
  for (const auto& s : plan.segments) T += s.steps;
  Trajectory traj;
  traj.embodiment = EmbodimentSpec::robot();
  traj.dt = cfg.dt;
  traj.poses = nn::Tensor({T, kRobotDim});
  int t = 0;
  for (const auto& seg : plan.segments) {
    double vx, vz, w;
    segment_velocity(seg, vx, vz, w);
    // straight segments drift along a gentle arc
    double arc = is_linear(seg.prim) ? rng.uniform(-cfg.curvature_max, cfg.curvature_max) : 0;
    for (int i = 0; i < seg.steps; ++i, ++t) {
      // bound gait: pronounced surge oscillation; trot: smooth
      double surge = 1.0;
      if (plan.gait == Gait::Bound && is_linear(seg.prim))
        surge = 1.0 + 0.25 * std::sin(2.0 * M_PI * (t % 4) / 4.0);
      traj.poses(t, kRobotLinX) =
          static_cast<float>(vx * surge + rng.normal() * cfg.noise_std);
      traj.poses(t, kRobotLinZ) =
          static_cast<float>(vz * surge + rng.normal() * cfg.noise_std);
      traj.poses(t, kRobotAngY) = static_cast<float>(w + arc + rng.normal() * cfg.noise_std);
    }
  }
  return traj;
}

Trajectory render_human(const MotionPlan& plan, const SynthConfig& cfg, Rng& rng) {
  int T = 0;
  for (const auto& s : plan.segments) T += s.steps;
  HumanLayout L(cfg.human_k);
  Trajectory traj;
  traj.embodiment = EmbodimentSpec::human(cfg.human_k);
  traj.dt = cfg.dt;
  traj.poses = nn::Tensor({T, L.dim()});
  int nr = L.k - 1;
  double phase = rng.uniform(0, 2.0 * M_PI);
  int t = 0;
  for (const auto& seg : plan.segments) {
    double vx, vz, w;
    segment_velocity(seg, vx, vz, w);
    double speed = std::sqrt(vx * vx + vz * vz) + std::abs(w) * 0.3;
    double stride_hz = 1.2 + 0.8 * std::min(speed, 1.5);
    double amp = 0.18 * std::min(speed, 1.2);
    for (int i = 0; i < seg.steps; ++i, ++t) {
      phase += 2.0 * M_PI * stride_hz * cfg.dt;
      auto n = [&] { return rng.normal() * cfg.noise_std; };
      traj.poses(t, L.root_ang_vel()) = static_cast<float>(w + n());
      traj.poses(t, L.root_vel_xz()) = static_cast<float>(vx + n());
      traj.poses(t, L.root_vel_xz() + 1) = static_cast<float>(vz + n());
      traj.poses(t, L.root_height()) =
          static_cast<float>(0.92 + 0.025 * std::sin(2 * phase) + n() * 0.2);
      for (int j = 0; j < nr; ++j) {
        // pairs (2j, 2j+1) are left/right; trailing odd joint is centerline
        double side = (j % 2 == 0) ? 1.0 : -1.0;
        bool centerline = (j % 2 == 0) && (j + 1 >= nr);
        if (centerline) side = 0.0;
        double swing = amp * std::sin(phase + M_PI * (j % 2));
        int p = L.joint_pos() + 3 * j;
        traj.poses(t, p + 0) = static_cast<float>(0.05 * (j / 2) + swing + n());
        traj.poses(t, p + 1) = static_cast<float>(0.85 - 0.18 * (j / 2) + n() * 0.3);
        traj.poses(t, p + 2) = static_cast<float>(0.13 * side + n());
        int r = L.joint_rot() + 6 * j;
        double tilt = 0.3 * swing;
        traj.poses(t, r + 0) = static_cast<float>(std::cos(tilt));
        traj.poses(t, r + 1) = 0.0f;
        traj.poses(t, r + 2) = static_cast<float>(-std::sin(tilt) * side);
        traj.poses(t, r + 3) = 0.0f;
        traj.poses(t, r + 4) = 1.0f;
        traj.poses(t, r + 5) = static_cast<float>(0.05 * side);
      }
      for (int j = 0; j < L.k; ++j) {
        int v = L.joint_vel() + 3 * j;
        if (j == 0) {  // root joint carries the body velocity
          traj.poses(t, v + 0) = static_cast<float>(vx + n());
          traj.poses(t, v + 1) = static_cast<float>(n() * 0.3);
          traj.poses(t, v + 2) = static_cast<float>(vz + n());
        } else {
          double swing_vel =
              amp * 2 * M_PI * stride_hz * std::cos(phase + M_PI * ((j - 1) % 2));
          traj.poses(t, v + 0) = static_cast<float>(swing_vel + n());
          traj.poses(t, v + 1) = static_cast<float>(n() * 0.3);
          traj.poses(t, v + 2) = static_cast<float>(n());
        }
      }
      int fc = L.foot_contact();
      // diagonal support pattern
      float a = std::sin(phase) > 0 ? 1.0f : 0.0f;
      traj.poses(t, fc + 0) = a;
      traj.poses(t, fc + 1) = 1.0f - a;
      traj.poses(t, fc + 2) = 1.0f - a;
      traj.poses(t, fc + 3) = a;
    }
  }
  return traj;
}

std::optional<std::array<int, 2>> goal_cell_for(const Trajectory& traj, double extent,
                                                double resolution) {
  auto path = integrate_se2(traj);
  double half = extent / 2;
  double x = path.back().x, z = path.back().z;
  if (std::abs(x) > half || std::abs(z) > half) return std::nullopt;
  int cells = static_cast<int>(std::lround(extent / resolution));
  auto idx = [&](double v) {
    int i = static_cast<int>(std::floor((v + half) / resolution));
    return std::min(std::max(i, 0), cells - 1);
  };
  return std::array<int, 2>{idx(z), idx(x)};  // [row, col]
}

std::vector<CaptionedTrajectory> generate_robot_corpus(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<CaptionedTrajectory> out;
  out.reserve(cfg.n_samples);
  for (int i = 0; i < cfg.n_samples; ++i) {
    Rng rng = Rng::derive(cfg.seed, static_cast<uint64_t>(i));
    CaptionedTrajectory s;
    MotionPlan plan = sample_plan(cfg, rng);
    s.trajectory = render_robot(plan, cfg, rng);
    s.caption = caption_for(plan, EmbodimentKind::Robot);
    s.gait = plan.gait;
    s.goal_cell = goal_cell_for(s.trajectory, cfg.grid_extent, cfg.grid_resolution);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<CaptionedTrajectory> generate_human_corpus(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<CaptionedTrajectory> out;
  out.reserve(cfg.n_samples);
  for (int i = 0; i < cfg.n_samples; ++i) {
    // distinct stream from the robot corpus under the same seed
    Rng rng = Rng::derive(cfg.seed ^ 0x9e3779b97f4a7c15ull, static_cast<uint64_t>(i));
    CaptionedTrajectory s;
    MotionPlan plan = sample_plan(cfg, rng);
    s.trajectory = render_human(plan, cfg, rng);
    s.caption = caption_for(plan, EmbodimentKind::Human, cfg.question_captions);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace motionlm
