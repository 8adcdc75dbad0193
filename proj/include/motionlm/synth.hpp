// Deterministic synthetic corpus: 1-4 motion primitives composed into an
// SE2 velocity trajectory with a templated caption that matches the plan.
// Robot samples carry a gait (bound adds a visible oscillation and the
// "joyfully" adverb); human samples embed the same plan into the articulated
// layout. Everything is a pure function of (config, sample index).
#pragma once

#include "motionlm/motion.hpp"

namespace motionlm {

enum class Primitive {
  Forward,
  Backward,
  StrafeLeft,
  StrafeRight,
  TurnLeft,
  TurnRight,
  Stop,
};

struct PlanSegment {
  Primitive prim;
  int steps;
  double speed;  // m/s for linear primitives, rad/s for turns, unused for stop
};

struct MotionPlan {
  std::vector<PlanSegment> segments;
  Gait gait = Gait::Trot;
};

struct SynthConfig {
  uint64_t seed = 0;
  int n_samples = 1000;
  double dt = 0.1;
  int min_segments = 1, max_segments = 4;
  int min_len = 20, max_len = 80;       // total steps
  double min_speed = 0.4, max_speed = 1.2;
  double min_yaw = 0.6, max_yaw = 1.5;  // rad/s for turn segments
  double curvature_max = 0.06;          // stray yaw on straight segments
  double noise_std = 0.02;
  double bound_prob = 0.3;
  int human_k = 5;
  bool question_captions = false;       // QA phrasing for human corpora
  double grid_extent = 14.0;            // goal labeling (must match GridSpec)
  double grid_resolution = 0.5;

  void validate() const;
};

// Caption speed adverbs: "slowly" at or below the slow bound, "quickly"
// strictly above the fast bound (linear primitives only).
inline constexpr double kSlowSpeed = 0.6;
inline constexpr double kFastSpeed = 1.0;

MotionPlan sample_plan(const SynthConfig& cfg, Rng& rng);
std::string caption_for(const MotionPlan& plan, EmbodimentKind embodiment,
                        bool question = false);
Trajectory render_robot(const MotionPlan& plan, const SynthConfig& cfg, Rng& rng);
Trajectory render_human(const MotionPlan& plan, const SynthConfig& cfg, Rng& rng);

// Grid cell [row, col] of the integrated endpoint, or nullopt if the
// endpoint leaves the extent. Must agree with the vocab grid convention.
std::optional<std::array<int, 2>> goal_cell_for(const Trajectory& traj, double extent,
                                                double resolution);

std::vector<CaptionedTrajectory> generate_robot_corpus(const SynthConfig& cfg);
std::vector<CaptionedTrajectory> generate_human_corpus(const SynthConfig& cfg);

}  // namespace motionlm
