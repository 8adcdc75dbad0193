// Figure export for robot trajectories: integrated SE(2) traces as a flat
// CSV and as an SVG overlay where each trace fades in along time
// (increasing stroke opacity encodes progress).
#pragma once

#include <string>
#include <vector>

#include "motionlm/motion.hpp"

namespace motionlm {

// Columns: traj,step,x,z,heading with step 0 at the origin pose.
std::string traces_to_csv(const std::vector<Trajectory>& trajs);
void write_traces_csv(const std::string& path, const std::vector<Trajectory>& trajs);

// extent > 0 fixes the view to [-extent/2, extent/2]^2 (grid framing);
// extent == 0 fits the data with a margin.
std::string traces_to_svg(const std::vector<Trajectory>& trajs, double extent = 0);
void write_traces_svg(const std::string& path, const std::vector<Trajectory>& trajs,
                      double extent = 0);

}  // namespace motionlm
