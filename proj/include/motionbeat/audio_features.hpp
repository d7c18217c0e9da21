#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "motionbeat/beat_grid.hpp"
#include "motionbeat/tensor.hpp"

namespace motionbeat {

struct SpectrogramConfig {
  double sample_rate = 22050.0;
  int window = 1024;  // Hann window length, power of two
  int hop = 256;
  int n_mels = 128;
  double fmin = 0.0;
  double fmax = 0.0;  // 0 selects sample_rate / 2
  double log_epsilon = 1e-6;
};

struct Spectrogram {
  Matrix frames;                   // T x n_mels, log(mel magnitude + eps)
  std::vector<double> frame_times; // window centers in seconds
};

// HTK mel scale.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

// n_mels x (window/2 + 1) triangular filterbank on linear-frequency bins.
Matrix mel_filterbank(const SpectrogramConfig& cfg);

Spectrogram log_mel_spectrogram(std::span<const double> samples, const SpectrogramConfig& cfg = {});

// Row t is the mean of frames whose time falls in [boundary_t, boundary_{t+1}).
// Throws EmptyBeatError naming the first beat without frames.
Matrix pool_per_beat(const Matrix& frames, std::span<const double> frame_times, const BeatGrid& grid);

// Half-wave rectified spectral flux summed over bands, max-pooled per beat.
std::vector<double> onset_envelope_per_beat(const Matrix& frames, std::span<const double> frame_times,
                                            const BeatGrid& grid);

struct WavData {
  double sample_rate = 0.0;
  std::vector<double> samples;  // mono, scaled to [-1, 1]
};

// Reads mono PCM WAV, 16-bit integer or 32-bit float.
WavData read_wav(const std::filesystem::path& path);
void write_wav(const std::filesystem::path& path, const WavData& wav);  // 16-bit PCM

}  // namespace motionbeat
