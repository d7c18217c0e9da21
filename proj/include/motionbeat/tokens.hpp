#pragma once

#include <span>
#include <vector>

#include "motionbeat/beat_grid.hpp"
#include "motionbeat/tensor.hpp"

namespace motionbeat {

enum class Modality { audio, motion };

const char* to_string(Modality m);

// Per-beat rhythm signals attached to a token sequence. Audio sequences fill
// onset_envelope and bar_accent_mass; motion sequences fill contact_pulse,
// energy and bar_energy_mass. Unused fields stay empty.
struct RhythmAnnotation {
  std::vector<double> onset_envelope;                 // K, >= 0
  std::vector<double> contact_pulse;                  // K, in [0, 1]
  std::vector<double> energy;                         // K, >= 0
  std::vector<std::vector<double>> bar_accent_mass;   // per bar, length B simplex
  std::vector<std::vector<double>> bar_energy_mass;   // per bar, length B simplex
};

struct TokenSequence {
  Modality modality = Modality::audio;
  Matrix tokens;  // K x dim
  BeatGrid grid;
  RhythmAnnotation annotation;

  int num_beats() const { return static_cast<int>(tokens.rows()); }
  int dim() const { return static_cast<int>(tokens.cols()); }

  void validate() const;
};

// Normalizes each bar of per-beat values to a distribution over bar positions.
// Bars follow the grid's downbeats and wrap cyclically; entry i of a bar is the
// value at bar position i. Zero-mass bars become uniform.
std::vector<std::vector<double>> bar_mass(std::span<const double> per_beat, const BeatGrid& grid);

// Vector-Jacobian product of bar_mass: maps d loss / d mass back to per-beat values.
std::vector<double> bar_mass_backward(std::span<const double> per_beat, const BeatGrid& grid,
                                      const std::vector<std::vector<double>>& grad_mass);

// Circular shift by delta beats: new[t] = old[t - delta]. Bar masses are
// recomputed from the shifted per-beat signals; the grid is unchanged.
TokenSequence beat_shift(const TokenSequence& seq, int delta_beats);

// Beat indices of bar j in bar-position order.
std::vector<int> bar_beats(const BeatGrid& grid, int bar);

}  // namespace motionbeat
