#include "motionbeat/tokens.hpp"

#include <cmath>
#include <string>

#include "motionbeat/errors.hpp"

namespace motionbeat {

const char* to_string(Modality m) { return m == Modality::audio ? "audio" : "motion"; }

namespace {

void check_bars(const BeatGrid& grid, std::size_t n) {
  if (n != static_cast<std::size_t>(grid.num_beats)) {
    throw ShapeError("per-beat values have length " + std::to_string(n) + ", grid has " +
                     std::to_string(grid.num_beats) + " beats");
  }
  if (grid.num_beats % grid.bar_len != 0) {
    throw DomainError("beat count " + std::to_string(grid.num_beats) + " is not a whole number of bars of " +
                      std::to_string(grid.bar_len));
  }
}

template <typename T>
std::vector<T> rotate_right(const std::vector<T>& v, int delta) {
  const int n = static_cast<int>(v.size());
  std::vector<T> out(v.size());
  for (int t = 0; t < n; ++t) out[static_cast<std::size_t>(((t + delta) % n + n) % n)] = v[static_cast<std::size_t>(t)];
  return out;
}

void check_mass(const std::vector<std::vector<double>>& bars, int B, const char* what) {
  for (const auto& bar : bars) {
    if (bar.size() != static_cast<std::size_t>(B)) throw ShapeError(std::string(what) + " bar has wrong length");
    double s = 0.0;
    for (double v : bar) {
      if (!(v >= 0.0)) throw DomainError(std::string(what) + " has a negative or NaN entry");
      s += v;
    }
    if (std::abs(s - 1.0) > 1e-6) throw DomainError(std::string(what) + " bar does not sum to 1");
  }
}

}  // namespace

std::vector<int> bar_beats(const BeatGrid& grid, int bar) {
  std::vector<int> idx(static_cast<std::size_t>(grid.bar_len));
  for (int i = 0; i < grid.bar_len; ++i) {
    idx[static_cast<std::size_t>(i)] = (grid.phase_offset + bar * grid.bar_len + i) % grid.num_beats;
  }
  return idx;
}

std::vector<std::vector<double>> bar_mass(std::span<const double> per_beat, const BeatGrid& grid) {
  check_bars(grid, per_beat.size());
  const int B = grid.bar_len;
  std::vector<std::vector<double>> bars(static_cast<std::size_t>(grid.num_bars()),
                                        std::vector<double>(static_cast<std::size_t>(B)));
  for (int j = 0; j < grid.num_bars(); ++j) {
    const auto idx = bar_beats(grid, j);
    double total = 0.0;
    for (int t : idx) {
      const double v = per_beat[static_cast<std::size_t>(t)];
      if (!(v >= 0.0)) throw DomainError("bar_mass requires nonnegative values");
      total += v;
    }
    auto& out = bars[static_cast<std::size_t>(j)];
    for (int i = 0; i < B; ++i) {
      out[static_cast<std::size_t>(i)] =
          total > 0.0 ? per_beat[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] / total : 1.0 / B;
    }
  }
  return bars;
}

std::vector<double> bar_mass_backward(std::span<const double> per_beat, const BeatGrid& grid,
                                      const std::vector<std::vector<double>>& grad_mass) {
  check_bars(grid, per_beat.size());
  std::vector<double> grad(per_beat.size(), 0.0);
  const int B = grid.bar_len;
  for (int j = 0; j < grid.num_bars(); ++j) {
    const auto idx = bar_beats(grid, j);
    double total = 0.0;
    for (int t : idx) total += per_beat[static_cast<std::size_t>(t)];
    if (!(total > 0.0)) continue;  // uniform fallback is constant
    const auto& g = grad_mass[static_cast<std::size_t>(j)];
    // d p_i / d v_k = (delta_ik - p_i) / total
    double dot = 0.0;
    for (int i = 0; i < B; ++i) {
      dot += g[static_cast<std::size_t>(i)] * per_beat[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] / total;
    }
    for (int i = 0; i < B; ++i) {
      grad[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])] += (g[static_cast<std::size_t>(i)] - dot) / total;
    }
  }
  return grad;
}

void TokenSequence::validate() const {
  grid.validate();
  if (tokens.rows() != grid.num_beats) {
    throw ShapeError("token rows " + std::to_string(tokens.rows()) + " != beat count " + std::to_string(grid.num_beats));
  }
  if (!tokens.allFinite()) throw DomainError("tokens contain non-finite values");
  const auto K = static_cast<std::size_t>(grid.num_beats);
  const auto& a = annotation;
  if (!a.onset_envelope.empty() && a.onset_envelope.size() != K) throw ShapeError("onset envelope length != K");
  if (!a.contact_pulse.empty() && a.contact_pulse.size() != K) throw ShapeError("contact pulse length != K");
  if (!a.energy.empty() && a.energy.size() != K) throw ShapeError("energy length != K");
  for (double v : a.onset_envelope) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw DomainError("onset envelope must be finite and nonnegative");
  }
  for (double v : a.contact_pulse) {
    if (!(v >= 0.0 && v <= 1.0)) throw DomainError("contact pulse outside [0, 1]");
  }
  check_mass(a.bar_accent_mass, grid.bar_len, "bar accent mass");
  check_mass(a.bar_energy_mass, grid.bar_len, "bar energy mass");
}

TokenSequence beat_shift(const TokenSequence& seq, int delta_beats) {
  const int K = seq.num_beats();
  if (delta_beats <= -K || delta_beats >= K) {
    throw DomainError("beat shift " + std::to_string(delta_beats) + " must satisfy |delta| < " + std::to_string(K));
  }
  TokenSequence out;
  out.modality = seq.modality;
  out.grid = seq.grid;
  out.tokens.resize(seq.tokens.rows(), seq.tokens.cols());
  for (int t = 0; t < K; ++t) out.tokens.row(((t + delta_beats) % K + K) % K) = seq.tokens.row(t);

  const auto& a = seq.annotation;
  auto& b = out.annotation;
  b.onset_envelope = rotate_right(a.onset_envelope, delta_beats);
  b.contact_pulse = rotate_right(a.contact_pulse, delta_beats);
  b.energy = rotate_right(a.energy, delta_beats);
  if (!a.bar_accent_mass.empty()) b.bar_accent_mass = bar_mass(b.onset_envelope, out.grid);
  if (!a.bar_energy_mass.empty()) b.bar_energy_mass = bar_mass(b.energy, out.grid);
  return out;
}

}  // namespace motionbeat
