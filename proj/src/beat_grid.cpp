#include "motionbeat/beat_grid.hpp"

#include <cmath>
#include <string>

#include "motionbeat/errors.hpp"

namespace motionbeat {

BeatGrid build_beat_grid(double bpm, int bar_len, int num_beats, int phase_offset) {
  if (!(bpm > 0.0) || !std::isfinite(bpm)) throw DomainError("bpm must be positive, got " + std::to_string(bpm));
  if (bar_len < 1) throw DomainError("bar length must be >= 1");
  if (num_beats < 1) throw DomainError("beat count must be >= 1");
  if (phase_offset < 0 || phase_offset >= bar_len) {
    throw DomainError("phase offset " + std::to_string(phase_offset) + " outside [0, " +
                      std::to_string(bar_len) + ")");
  }
  BeatGrid grid;
  grid.bpm = bpm;
  grid.bar_len = bar_len;
  grid.num_beats = num_beats;
  grid.phase_offset = phase_offset;
  const double gap = 60.0 / bpm;
  grid.boundaries.resize(static_cast<std::size_t>(num_beats) + 1);
  for (int i = 0; i <= num_beats; ++i) grid.boundaries[static_cast<std::size_t>(i)] = i * gap;
  return grid;
}

void BeatGrid::validate() const {
  if (!(bpm > 0.0) || bar_len < 1 || num_beats < 1) throw DomainError("beat grid has nonpositive fields");
  if (phase_offset < 0 || phase_offset >= bar_len) throw DomainError("beat grid phase offset out of range");
  if (boundaries.size() != static_cast<std::size_t>(num_beats) + 1) {
    throw DomainError("beat grid needs K+1 boundaries");
  }
  const double gap = 60.0 / bpm;
  for (std::size_t i = 1; i < boundaries.size(); ++i) {
    const double d = boundaries[i] - boundaries[i - 1];
    if (!(d > 0.0)) throw DomainError("beat boundaries must be strictly increasing");
    if (std::abs(d - gap) > 1e-9 * gap) throw DomainError("beat boundaries are not evenly spaced at 60/bpm");
  }
}

}  // namespace motionbeat
