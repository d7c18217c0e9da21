#include "motionbeat/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "motionbeat/errors.hpp"
#include "motionbeat/motion_features.hpp"
#include "motionbeat/rng.hpp"

namespace motionbeat {

void SyntheticPairSpec::validate() const {
  if (!(bpm_min > 0.0) || !(bpm_min <= bpm_max)) throw DomainError("bpm range must satisfy 0 < min <= max");
  if (bar_len < 1 || num_beats < 1) throw DomainError("bar length and beat count must be >= 1");
  if (num_beats % bar_len != 0) throw DomainError("beat count must be a whole number of bars");
  if (accent_pattern.size() != static_cast<std::size_t>(bar_len)) {
    throw DomainError("accent pattern must have bar_len entries");
  }
  for (double w : accent_pattern) {
    if (!(w >= 0.0)) throw DomainError("accent weights must be nonnegative");
  }
  if (!(contact_lag_std >= 0.0) || !(feature_noise_std >= 0.0)) throw DomainError("noise levels must be >= 0");
  if (num_joints < 2) throw DomainError("synthetic motion needs at least 2 joints");
  if (!(motion_fps > 0.0)) throw DomainError("motion fps must be positive");
  if (style < 0) throw DomainError("style must be >= 0");
}

void DatasetSpec::validate() const {
  base.validate();
  for (const auto& p : accent_palette) {
    if (p.size() != static_cast<std::size_t>(base.bar_len)) throw DomainError("palette pattern length != bar_len");
  }
  if (num_styles < 1) throw DomainError("num_styles must be >= 1");
  if (!(accent_perturb >= 0.0)) throw DomainError("accent_perturb must be >= 0");
}

namespace {

struct Style {
  double f0;
  double rolloff;
  double decay;       // seconds
  double percussive;  // noise-burst mix
  double lift;        // foot lift height
  double arm;         // hand swing amplitude
  double sway;
};

Style style_of(int s) {
  Style st;
  st.f0 = 110.0 * std::pow(2.0, (s % 6) / 3.0);
  st.rolloff = 0.6 + 0.4 * (s % 2);
  st.decay = 0.08 + 0.03 * (s % 3);
  st.percussive = 0.2 + 0.25 * ((s / 2) % 3);
  st.lift = 0.25 + 0.05 * (s % 3);
  st.arm = 0.15 + 0.1 * ((s + 1) % 3);
  st.sway = 0.05 + 0.03 * (s % 4);
  return st;
}

// Spreads an event at fractional beat position s over beats floor(s), floor(s)+1.
void deposit(std::vector<double>& per_beat, double s, double weight) {
  const int K = static_cast<int>(per_beat.size());
  const double base = std::floor(s);
  const double frac = s - base;
  const int b0 = ((static_cast<int>(base) % K) + K) % K;
  per_beat[static_cast<std::size_t>(b0)] += weight * (1.0 - frac);
  if (frac > 0.0) per_beat[static_cast<std::size_t>((b0 + 1) % K)] += weight * frac;
}

std::vector<double> render_audio(const BeatGrid& grid, const std::vector<double>& weights, const Style& st,
                                 const SpectrogramConfig& cfg, Rng& rng) {
  const double sr = cfg.sample_rate;
  const auto n = static_cast<std::size_t>(std::ceil(grid.duration() * sr)) + static_cast<std::size_t>(cfg.window);
  std::vector<double> wave(n, 0.0);
  const double two_pi = 2.0 * std::numbers::pi;
  for (int t = 0; t < grid.num_beats; ++t) {
    const double w = weights[static_cast<std::size_t>(t)];
    if (w <= 0.0) continue;
    const auto start = static_cast<std::size_t>(std::llround(grid.boundaries[static_cast<std::size_t>(t)] * sr));
    const auto len = std::min(n - start, static_cast<std::size_t>(6.0 * st.decay * sr));
    for (std::size_t i = 0; i < len; ++i) {
      const double tau = static_cast<double>(i) / sr;
      double tone = 0.0;
      for (int h = 1; h <= 6; ++h) tone += std::sin(two_pi * st.f0 * h * tau) / std::pow(h, st.rolloff);
      const double burst = st.percussive * (2.0 * rng.uniform() - 1.0) * std::exp(-tau / 0.015);
      wave[start + i] += w * (0.3 * tone * std::exp(-tau / st.decay) + burst);
    }
  }
  return wave;
}

JointTrajectory render_motion(const BeatGrid& grid, const std::vector<double>& event_times,
                              const std::vector<double>& event_weights, const Style& st, int num_joints,
                              double fps) {
  const double beat = grid.beat_duration();
  const double width = 0.2 * beat;
  const int T = static_cast<int>(std::ceil(grid.duration() * fps)) + 1;
  JointTrajectory traj;
  traj.positions = Matrix::Zero(T, 3 * num_joints);
  traj.frame_times.resize(static_cast<std::size_t>(T));
  const double two_pi = 2.0 * std::numbers::pi;
  for (int f = 0; f < T; ++f) {
    const double time = f / fps;
    traj.frame_times[static_cast<std::size_t>(f)] = time;
    double stomp = 0.0;    // strongest weighted contact bump
    double impulse = 0.0;  // summed weighted bumps
    for (std::size_t e = 0; e < event_times.size(); ++e) {
      const double x = (time - event_times[e] * beat) / width;
      const double g = std::exp(-x * x);
      stomp = std::max(stomp, event_weights[e] * g);
      impulse += event_weights[e] * g;
    }
    const double cycle = two_pi * time / (2.0 * beat);
    auto row = traj.positions.row(f);
    // foot
    row(0) = 0.1 * std::sin(cycle);
    row(1) = st.lift * (1.0 - std::min(1.0, stomp));
    row(2) = 0.05 * std::cos(cycle);
    // pelvis
    row(3) = st.sway * std::sin(two_pi * time / (grid.bar_len * beat));
    row(4) = 0.9 - 0.12 * impulse;
    row(5) = 0.0;
    // remaining joints: hands and extremities swinging with per-joint phase
    for (int j = 2; j < num_joints; ++j) {
      const double side = (j % 2 == 0) ? 1.0 : -1.0;
      const double phase = 0.7 * j;
      row(3 * j) = side * 0.3 + st.arm * std::sin(cycle + phase);
      row(3 * j + 1) = 1.3 + st.arm * side * 0.5 * impulse;
      row(3 * j + 2) = 0.5 * st.arm * std::cos(cycle + phase);
    }
  }
  return traj;
}

}  // namespace

SyntheticPair generate_synthetic_pair(const SyntheticPairSpec& spec) {
  spec.validate();
  Rng rng(mix64(spec.seed));
  const double bpm = spec.bpm_min == spec.bpm_max ? spec.bpm_min : rng.uniform(spec.bpm_min, spec.bpm_max);
  const int phase_offset = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.bar_len)));
  const BeatGrid grid = build_beat_grid(bpm, spec.bar_len, spec.num_beats, phase_offset);
  const Style st = style_of(spec.style);
  const auto K = static_cast<std::size_t>(spec.num_beats);

  std::vector<double> weights(K);
  for (int t = 0; t < spec.num_beats; ++t) {
    weights[static_cast<std::size_t>(t)] = spec.accent_pattern[static_cast<std::size_t>(grid.bar_position(t))];
  }

  SyntheticPair pair;
  std::vector<double> event_weights;
  std::vector<double> contact(K, 0.0);
  std::vector<double> energy(K, 0.0);
  for (int t = 0; t < spec.num_beats; ++t) {
    const double w = weights[static_cast<std::size_t>(t)];
    if (w <= 0.0) continue;
    const double lag = spec.contact_lag_std > 0.0 ? rng.normal(0.0, spec.contact_lag_std) : 0.0;
    const double s = t + lag;
    pair.accent_beats.push_back(t);
    pair.contact_beats.push_back(s);
    event_weights.push_back(w);
    deposit(contact, s, w);
    deposit(energy, s, w);
  }
  for (auto& c : contact) c = std::min(1.0, c);

  // audio
  const auto wave = render_audio(grid, weights, st, spec.audio, rng);
  const Spectrogram spec_frames = log_mel_spectrogram(wave, spec.audio);
  Matrix audio_tokens = pool_per_beat(spec_frames.frames, spec_frames.frame_times, grid);

  // motion
  const JointTrajectory traj =
      render_motion(grid, pair.contact_beats, event_weights, st, spec.num_joints, spec.motion_fps);
  Matrix motion_tokens = motion_kinematics_per_beat(traj, grid).tokens;

  if (spec.feature_noise_std > 0.0) {
    for (Eigen::Index i = 0; i < audio_tokens.size(); ++i) audio_tokens.data()[i] += rng.normal(0.0, spec.feature_noise_std);
    for (Eigen::Index i = 0; i < motion_tokens.size(); ++i) motion_tokens.data()[i] += rng.normal(0.0, spec.feature_noise_std);
  }

  Clip& clip = pair.clip;
  clip.meta.index = 0;
  clip.meta.bpm = bpm;
  clip.meta.phase_offset = phase_offset;
  clip.meta.style = spec.style;
  clip.meta.accent_pattern = spec.accent_pattern;

  clip.audio.modality = Modality::audio;
  clip.audio.grid = grid;
  clip.audio.tokens = std::move(audio_tokens);
  clip.audio.annotation.onset_envelope = weights;
  clip.audio.annotation.bar_accent_mass = bar_mass(weights, grid);

  clip.motion.modality = Modality::motion;
  clip.motion.grid = grid;
  clip.motion.tokens = std::move(motion_tokens);
  clip.motion.annotation.contact_pulse = std::move(contact);
  clip.motion.annotation.bar_energy_mass = bar_mass(energy, grid);
  clip.motion.annotation.energy = std::move(energy);
  return pair;
}

DatasetSpec default_dataset_spec() {
  DatasetSpec spec;
  spec.accent_palette = {
      {1.0, 0.2, 0.6, 0.2},
      {1.0, 0.6, 0.1, 0.8},
      {0.9, 0.1, 1.0, 0.4},
      {1.0, 0.0, 0.3, 0.7},
  };
  return spec;
}

SyntheticPair generate_dataset_pair(const DatasetSpec& spec, int index) {
  SyntheticPairSpec pair_spec = spec.base;
  pair_spec.seed = spec.base.seed + static_cast<std::uint64_t>(index);
  Rng rng(mix64(pair_spec.seed ^ 0x5eedda7a5e7ULL));
  pair_spec.style = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(spec.num_styles)));
  std::vector<double> pattern =
      spec.accent_palette.empty()
          ? spec.base.accent_pattern
          : spec.accent_palette[static_cast<std::size_t>(rng.uniform_int(spec.accent_palette.size()))];
  if (spec.rotate_patterns) {
    const auto r = static_cast<std::ptrdiff_t>(rng.uniform_int(pattern.size()));
    std::rotate(pattern.begin(), pattern.begin() + r, pattern.end());
  }
  if (spec.accent_perturb > 0.0) {
    for (auto& w : pattern) w = std::clamp(w + rng.uniform(-spec.accent_perturb, spec.accent_perturb), 0.0, 1.0);
  }
  pair_spec.accent_pattern = std::move(pattern);
  SyntheticPair pair = generate_synthetic_pair(pair_spec);
  pair.clip.meta.index = index;
  return pair;
}

Dataset generate_dataset(const DatasetSpec& spec, int count) {
  spec.validate();
  if (count < 0) throw DomainError("dataset count must be >= 0");
  Dataset data;
  data.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) data.push_back(generate_dataset_pair(spec, i).clip);
  return data;
}

}  // namespace motionbeat
