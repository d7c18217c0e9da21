#include "motionbeat/audio_features.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <string>
#include <unsupported/Eigen/FFT>

#include "motionbeat/errors.hpp"

namespace motionbeat {

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Matrix mel_filterbank(const SpectrogramConfig& cfg) {
  if (cfg.n_mels < 1) throw DomainError("n_mels must be >= 1");
  if (!(cfg.sample_rate > 0.0)) throw DomainError("sample rate must be positive");
  const int n_bins = cfg.window / 2 + 1;
  const double fmax = cfg.fmax > 0.0 ? cfg.fmax : cfg.sample_rate / 2.0;
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(fmax);
  std::vector<double> edges(static_cast<std::size_t>(cfg.n_mels) + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (cfg.n_mels + 1));
  }
  Matrix bank = Matrix::Zero(cfg.n_mels, n_bins);
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double lo = edges[static_cast<std::size_t>(m)];
    const double center = edges[static_cast<std::size_t>(m) + 1];
    const double hi = edges[static_cast<std::size_t>(m) + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f = k * cfg.sample_rate / cfg.window;
      double w = 0.0;
      if (f > lo && f <= center) {
        w = (f - lo) / (center - lo);
      } else if (f > center && f < hi) {
        w = (hi - f) / (hi - center);
      }
      bank(m, k) = w;
    }
  }
  return bank;
}

Spectrogram log_mel_spectrogram(std::span<const double> samples, const SpectrogramConfig& cfg) {
  if (samples.empty()) throw DomainError("log_mel_spectrogram: empty input");
  if (cfg.n_mels < 1) throw DomainError("n_mels must be >= 1");
  if (!(cfg.sample_rate > 0.0)) throw DomainError("sample rate must be positive");
  if (cfg.window < 2 || (cfg.window & (cfg.window - 1)) != 0) throw DomainError("window must be a power of two");
  if (cfg.hop < 1) throw DomainError("hop must be >= 1");
  if (samples.size() < static_cast<std::size_t>(cfg.window)) {
    throw DomainError("log_mel_spectrogram: input shorter than one analysis window");
  }
  const int n_frames = 1 + static_cast<int>((samples.size() - static_cast<std::size_t>(cfg.window)) /
                                            static_cast<std::size_t>(cfg.hop));
  const int n_bins = cfg.window / 2 + 1;
  const Matrix bank = mel_filterbank(cfg);

  // Sparse support of each filter.
  std::vector<std::pair<int, int>> support(static_cast<std::size_t>(cfg.n_mels), {0, -1});
  for (int m = 0; m < cfg.n_mels; ++m) {
    int first = -1, last = -2;
    for (int k = 0; k < n_bins; ++k) {
      if (bank(m, k) > 0.0) {
        if (first < 0) first = k;
        last = k;
      }
    }
    support[static_cast<std::size_t>(m)] = {first, last};
  }

  std::vector<double> hann(static_cast<std::size_t>(cfg.window));
  for (int i = 0; i < cfg.window; ++i) {
    hann[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.window);
  }

  Eigen::FFT<double> fft;
  std::vector<double> buffer(static_cast<std::size_t>(cfg.window));
  std::vector<std::complex<double>> spectrum;
  std::vector<double> magnitude(static_cast<std::size_t>(n_bins));

  Spectrogram out;
  out.frames.resize(n_frames, cfg.n_mels);
  out.frame_times.resize(static_cast<std::size_t>(n_frames));
  for (int f = 0; f < n_frames; ++f) {
    const std::size_t start = static_cast<std::size_t>(f) * static_cast<std::size_t>(cfg.hop);
    for (int i = 0; i < cfg.window; ++i) {
      buffer[static_cast<std::size_t>(i)] = samples[start + static_cast<std::size_t>(i)] * hann[static_cast<std::size_t>(i)];
    }
    fft.fwd(spectrum, buffer);
    for (int k = 0; k < n_bins; ++k) magnitude[static_cast<std::size_t>(k)] = std::abs(spectrum[static_cast<std::size_t>(k)]);
    for (int m = 0; m < cfg.n_mels; ++m) {
      const auto [first, last] = support[static_cast<std::size_t>(m)];
      double acc = 0.0;
      for (int k = first; k <= last; ++k) acc += bank(m, k) * magnitude[static_cast<std::size_t>(k)];
      out.frames(f, m) = std::log(acc + cfg.log_epsilon);
    }
    out.frame_times[static_cast<std::size_t>(f)] =
        (static_cast<double>(start) + 0.5 * cfg.window) / cfg.sample_rate;
  }
  return out;
}

namespace {

// Assigns each frame to a beat (or -1 when outside the grid) and checks coverage.
std::vector<int> assign_frames(std::span<const double> frame_times, const BeatGrid& grid) {
  std::vector<int> beat_of(frame_times.size(), -1);
  std::vector<int> counts(static_cast<std::size_t>(grid.num_beats), 0);
  int b = 0;
  for (std::size_t i = 0; i < frame_times.size(); ++i) {
    const double t = frame_times[i];
    if (i > 0 && t < frame_times[i - 1]) throw DomainError("frame times must be monotone");
    if (t < grid.boundaries.front() || t >= grid.boundaries.back()) continue;
    while (t >= grid.boundaries[static_cast<std::size_t>(b) + 1]) ++b;
    beat_of[i] = b;
    ++counts[static_cast<std::size_t>(b)];
  }
  for (int t = 0; t < grid.num_beats; ++t) {
    if (counts[static_cast<std::size_t>(t)] == 0) throw EmptyBeatError(t);
  }
  return beat_of;
}

}  // namespace

Matrix pool_per_beat(const Matrix& frames, std::span<const double> frame_times, const BeatGrid& grid) {
  if (static_cast<std::size_t>(frames.rows()) != frame_times.size()) {
    throw ShapeError("frame count does not match frame_times");
  }
  const auto beat_of = assign_frames(frame_times, grid);
  Matrix pooled = Matrix::Zero(grid.num_beats, frames.cols());
  std::vector<int> counts(static_cast<std::size_t>(grid.num_beats), 0);
  for (std::size_t i = 0; i < beat_of.size(); ++i) {
    const int b = beat_of[i];
    if (b < 0) continue;
    pooled.row(b) += frames.row(static_cast<Eigen::Index>(i));
    ++counts[static_cast<std::size_t>(b)];
  }
  for (int t = 0; t < grid.num_beats; ++t) pooled.row(t) /= counts[static_cast<std::size_t>(t)];
  return pooled;
}

std::vector<double> onset_envelope_per_beat(const Matrix& frames, std::span<const double> frame_times,
                                            const BeatGrid& grid) {
  if (static_cast<std::size_t>(frames.rows()) != frame_times.size()) {
    throw ShapeError("frame count does not match frame_times");
  }
  const auto beat_of = assign_frames(frame_times, grid);
  std::vector<double> env(static_cast<std::size_t>(grid.num_beats), 0.0);
  for (Eigen::Index i = 1; i < frames.rows(); ++i) {
    const int b = beat_of[static_cast<std::size_t>(i)];
    if (b < 0) continue;
    const double flux = (frames.row(i) - frames.row(i - 1)).cwiseMax(0.0).sum();
    env[static_cast<std::size_t>(b)] = std::max(env[static_cast<std::size_t>(b)], flux);
  }
  return env;
}

namespace {

template <typename T>
T read_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw DomainError("unexpected end of WAV file");
  std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t> raw = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) raw |= static_cast<decltype(raw)>(bytes[i]) << (8 * i);
  T value;
  std::memcpy(&value, &raw, sizeof(T));
  return value;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint32_t> raw;
  std::memcpy(&raw, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T); ++i) out.put(static_cast<char>((raw >> (8 * i)) & 0xff));
}

}  // namespace

WavData read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DomainError("cannot open WAV file " + path.string());
  char tag[4];
  in.read(tag, 4);
  if (!in || std::string(tag, 4) != "RIFF") throw DomainError("not a RIFF file: " + path.string());
  read_le<std::uint32_t>(in);
  in.read(tag, 4);
  if (!in || std::string(tag, 4) != "WAVE") throw DomainError("not a WAVE file: " + path.string());

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  while (in.read(tag, 4)) {
    const std::string id(tag, 4);
    const std::uint32_t size = read_le<std::uint32_t>(in);
    if (id == "fmt ") {
      format = read_le<std::uint16_t>(in);
      channels = read_le<std::uint16_t>(in);
      rate = read_le<std::uint32_t>(in);
      read_le<std::uint32_t>(in);
      read_le<std::uint16_t>(in);
      bits = read_le<std::uint16_t>(in);
      in.ignore(static_cast<std::streamsize>(size) - 16 + (size & 1));
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw DomainError("WAV data chunk before fmt chunk");
      if (channels != 1) throw DomainError("only mono WAV is supported");
      WavData wav;
      wav.sample_rate = rate;
      if (format == 1 && bits == 16) {
        wav.samples.resize(size / 2);
        for (auto& s : wav.samples) s = read_le<std::int16_t>(in) / 32768.0;
      } else if (format == 3 && bits == 32) {
        wav.samples.resize(size / 4);
        for (auto& s : wav.samples) s = read_le<float>(in);
      } else {
        throw DomainError("unsupported WAV encoding (need 16-bit PCM or 32-bit float)");
      }
      return wav;
    } else {
      in.ignore(static_cast<std::streamsize>(size + (size & 1)));
    }
  }
  throw DomainError("WAV file has no data chunk");
}

void write_wav(const std::filesystem::path& path, const WavData& wav) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write WAV file " + path.string());
  const auto n = static_cast<std::uint32_t>(wav.samples.size());
  const auto rate = static_cast<std::uint32_t>(wav.sample_rate);
  out.write("RIFF", 4);
  write_le<std::uint32_t>(out, 36 + 2 * n);
  out.write("WAVEfmt ", 8);
  write_le<std::uint32_t>(out, 16);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint16_t>(out, 1);
  write_le<std::uint32_t>(out, rate);
  write_le<std::uint32_t>(out, rate * 2);
  write_le<std::uint16_t>(out, 2);
  write_le<std::uint16_t>(out, 16);
  out.write("data", 4);
  write_le<std::uint32_t>(out, 2 * n);
  for (double s : wav.samples) {
    const double c = std::clamp(s, -1.0, 1.0);
    write_le<std::int16_t>(out, static_cast<std::int16_t>(std::lround(c * 32767.0)));
  }
}

}  // namespace motionbeat
