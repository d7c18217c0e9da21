#include "motionbeat/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <string>

#include "motionbeat/errors.hpp"
#include "motionbeat/rng.hpp"

namespace motionbeat {

using nlohmann::json;

namespace {

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const json& j, const char* field) {
  if (!j.is_array() || j.empty()) throw DomainError(std::string("dataset field '") + field + "' must be a non-empty array");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (static_cast<Eigen::Index>(row.size()) != cols) throw ShapeError(std::string("ragged matrix in '") + field + "'");
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

template <typename T>
T get_field(const json& rec, const char* key) {
  if (!rec.contains(key)) throw DomainError(std::string("dataset record missing field '") + key + "'");
  return rec.at(key).get<T>();
}

}  // namespace

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DomainError("cannot write dataset " + path.string());
  for (const Clip& clip : data) {
    const auto& grid = clip.audio.grid;
    json rec;
    rec["index"] = clip.meta.index;
    rec["bpm"] = grid.bpm;
    rec["bar_len"] = grid.bar_len;
    rec["num_beats"] = grid.num_beats;
    rec["phase_offset"] = grid.phase_offset;
    rec["beat_boundaries"] = grid.boundaries;
    rec["style"] = clip.meta.style;
    rec["accent_pattern"] = clip.meta.accent_pattern;
    rec["audio_tokens"] = matrix_to_json(clip.audio.tokens);
    rec["motion_tokens"] = matrix_to_json(clip.motion.tokens);
    rec["onset_envelope"] = clip.audio.annotation.onset_envelope;
    rec["contact_pulse"] = clip.motion.annotation.contact_pulse;
    rec["motion_energy"] = clip.motion.annotation.energy;
    rec["bar_accent_mass"] = clip.audio.annotation.bar_accent_mass;
    rec["bar_energy_mass"] = clip.motion.annotation.bar_energy_mass;
    out << rec.dump(-1, ' ', false, json::error_handler_t::strict) << '\n';
  }
  if (!out) throw DomainError("failed writing dataset " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DomainError("cannot open dataset " + path.string());
  Dataset data;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json rec = json::parse(line);
      Clip clip;
      const BeatGrid grid = build_beat_grid(get_field<double>(rec, "bpm"), get_field<int>(rec, "bar_len"),
                                            get_field<int>(rec, "num_beats"), get_field<int>(rec, "phase_offset"));
      clip.meta.index = rec.value("index", static_cast<int>(data.size()));
      clip.meta.bpm = grid.bpm;
      clip.meta.phase_offset = grid.phase_offset;
      clip.meta.style = rec.value("style", 0);
      clip.meta.accent_pattern = rec.value("accent_pattern", std::vector<double>{});

      clip.audio.modality = Modality::audio;
      clip.audio.grid = grid;
      clip.audio.tokens = matrix_from_json(rec.at("audio_tokens"), "audio_tokens");
      clip.audio.annotation.onset_envelope = get_field<std::vector<double>>(rec, "onset_envelope");
      clip.audio.annotation.bar_accent_mass =
          rec.contains("bar_accent_mass") ? rec.at("bar_accent_mass").get<std::vector<std::vector<double>>>()
                                          : bar_mass(clip.audio.annotation.onset_envelope, grid);

      clip.motion.modality = Modality::motion;
      clip.motion.grid = grid;
      clip.motion.tokens = matrix_from_json(rec.at("motion_tokens"), "motion_tokens");
      clip.motion.annotation.contact_pulse = get_field<std::vector<double>>(rec, "contact_pulse");
      clip.motion.annotation.energy = get_field<std::vector<double>>(rec, "motion_energy");
      clip.motion.annotation.bar_energy_mass =
          rec.contains("bar_energy_mass") ? rec.at("bar_energy_mass").get<std::vector<std::vector<double>>>()
                                          : bar_mass(clip.motion.annotation.energy, grid);
      clip.audio.validate();
      clip.motion.validate();
      data.push_back(std::move(clip));
    } catch (const json::exception& e) {
      throw DomainError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    } catch (const DomainError& e) {
      throw DomainError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return data;
}

DatasetSplit split_dataset(int count, std::uint64_t seed) {
  std::vector<std::pair<std::uint64_t, int>> keyed;
  keyed.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) keyed.emplace_back(mix64(seed * 0x100000001b3ULL + static_cast<std::uint64_t>(i)), i);
  std::sort(keyed.begin(), keyed.end());
  const int n_train = static_cast<int>(std::lround(0.8 * count));
  const int n_val = static_cast<int>(std::lround(0.1 * count));
  DatasetSplit split;
  for (int k = 0; k < count; ++k) {
    const int idx = keyed[static_cast<std::size_t>(k)].second;
    if (k < n_train) {
      split.train.push_back(idx);
    } else if (k < n_train + n_val) {
      split.val.push_back(idx);
    } else {
      split.test.push_back(idx);
    }
  }
  for (auto* part : {&split.train, &split.val, &split.test}) std::sort(part->begin(), part->end());
  return split;
}

}  // namespace motionbeat
