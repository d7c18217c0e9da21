#pragma once

#include <vector>

namespace motionbeat {

// Constant-tempo beat skeleton shared by the audio and motion streams of a clip.
struct BeatGrid {
  double bpm = 120.0;
  int bar_len = 4;
  int num_beats = 1;
  int phase_offset = 0;               // beat index of the first downbeat, in [0, bar_len)
  std::vector<double> boundaries;     // num_beats + 1 timestamps in seconds

  double beat_duration() const { return 60.0 / bpm; }
  double duration() const { return boundaries.back(); }

  // Position of beat t within its bar; 0 on downbeats.
  int bar_position(int t) const {
    const int p = (t - phase_offset) % bar_len;
    return p < 0 ? p + bar_len : p;
  }

  int num_bars() const { return num_beats / bar_len; }

  // Throws DomainError when an invariant does not hold.
  void validate() const;
};

BeatGrid build_beat_grid(double bpm, int bar_len, int num_beats, int phase_offset);

}  // namespace motionbeat
