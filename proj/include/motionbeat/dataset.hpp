#pragma once

#include <filesystem>
#include <vector>

#include "motionbeat/tokens.hpp"

namespace motionbeat {

// Rhythm metadata used for tempo-aware negative mining.
struct ClipMeta {
  int index = 0;
  double bpm = 120.0;
  int phase_offset = 0;
  int style = 0;
  std::vector<double> accent_pattern;  // length B, indexed by bar position
};

// One paired music-motion clip on a shared beat grid.
struct Clip {
  ClipMeta meta;
  TokenSequence audio;
  TokenSequence motion;
};

using Dataset = std::vector<Clip>;

// JSON-lines dataset files; one clip per line (field names in README).
void write_dataset(const std::filesystem::path& path, const Dataset& data);
Dataset read_dataset(const std::filesystem::path& path);

struct DatasetSplit {
  std::vector<int> train, val, test;
};

// 80/10/10 split ordered by a seeded hash of each pair index.
DatasetSplit split_dataset(int count, std::uint64_t seed);

}  // namespace motionbeat
