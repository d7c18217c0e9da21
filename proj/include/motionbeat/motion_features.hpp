#pragma once

#include <span>
#include <vector>

#include "motionbeat/beat_grid.hpp"
#include "motionbeat/tensor.hpp"

namespace motionbeat {

// Frame-level joint trajectories: row f holds J joints as (x, y, z) triples.
struct JointTrajectory {
  Matrix positions;                // T x 3J
  std::vector<double> frame_times; // seconds, monotone

  int num_joints() const { return static_cast<int>(positions.cols() / 3); }
};

struct ContactHeuristic {
  std::vector<int> end_effectors{0};  // joints tested for ground contact
  int up_axis = 1;                    // y-up
  double height_threshold = 0.05;
  double speed_threshold = 0.1;       // units per second
};

struct MotionBeatFeatures {
  Matrix tokens;                  // K x 9J: positions, velocities, accelerations
  std::vector<double> energy;     // K, mean squared joint speed
  std::vector<double> contacts;   // K, fraction of contact frames
};

// Central finite differences in time (one-sided at the ends).
Matrix time_derivative(const Matrix& values, std::span<const double> times);

MotionBeatFeatures motion_kinematics_per_beat(const JointTrajectory& motion, const BeatGrid& grid,
                                              const ContactHeuristic& contact = {});

}  // namespace motionbeat
