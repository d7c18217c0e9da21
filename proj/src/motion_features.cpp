#include "motionbeat/motion_features.hpp"

#include "motionbeat/audio_features.hpp"
#include "motionbeat/errors.hpp"

namespace motionbeat {

Matrix time_derivative(const Matrix& values, std::span<const double> times) {
  const Eigen::Index T = values.rows();
  if (T < 2) throw DomainError("time derivative needs at least two frames");
  Matrix d(T, values.cols());
  for (Eigen::Index f = 0; f < T; ++f) {
    const Eigen::Index lo = f == 0 ? 0 : f - 1;
    const Eigen::Index hi = f == T - 1 ? T - 1 : f + 1;
    const double dt = times[static_cast<std::size_t>(hi)] - times[static_cast<std::size_t>(lo)];
    if (!(dt > 0.0)) throw DomainError("frame times must be strictly increasing");
    d.row(f) = (values.row(hi) - values.row(lo)) / dt;
  }
  return d;
}

MotionBeatFeatures motion_kinematics_per_beat(const JointTrajectory& motion, const BeatGrid& grid,
                                              const ContactHeuristic& contact) {
  const Eigen::Index T = motion.positions.rows();
  if (T < 3) throw DomainError("motion kinematics need at least 3 frames");
  if (motion.positions.cols() < 3 || motion.positions.cols() % 3 != 0) {
    throw ShapeError("joint positions must have 3J columns with J >= 1");
  }
  if (static_cast<std::size_t>(T) != motion.frame_times.size()) throw ShapeError("frame_times length mismatch");
  const int J = motion.num_joints();
  for (int e : contact.end_effectors) {
    if (e < 0 || e >= J) throw DomainError("end effector index out of range");
  }

  const Matrix vel = time_derivative(motion.positions, motion.frame_times);
  const Matrix acc = time_derivative(vel, motion.frame_times);

  Matrix features(T, 9 * J);
  features << motion.positions, vel, acc;

  Matrix per_frame(T, 2);  // squared speed averaged over joints, contact indicator
  for (Eigen::Index f = 0; f < T; ++f) {
    double sq = 0.0;
    for (int j = 0; j < J; ++j) sq += vel.row(f).segment(3 * j, 3).squaredNorm();
    per_frame(f, 0) = sq / J;
    bool touching = false;
    for (int e : contact.end_effectors) {
      const double height = motion.positions(f, 3 * e + contact.up_axis);
      const double speed = vel.row(f).segment(3 * e, 3).norm();
      if (height < contact.height_threshold && speed < contact.speed_threshold) touching = true;
    }
    per_frame(f, 1) = touching ? 1.0 : 0.0;
  }

  MotionBeatFeatures out;
  out.tokens = pool_per_beat(features, motion.frame_times, grid);
  const Matrix pooled = pool_per_beat(per_frame, motion.frame_times, grid);
  out.energy.resize(static_cast<std::size_t>(grid.num_beats));
  out.contacts.resize(static_cast<std::size_t>(grid.num_beats));
  for (int t = 0; t < grid.num_beats; ++t) {
    out.energy[static_cast<std::size_t>(t)] = pooled(t, 0);
    out.contacts[static_cast<std::size_t>(t)] = pooled(t, 1);
  }
  return out;
}

}  // namespace motionbeat
