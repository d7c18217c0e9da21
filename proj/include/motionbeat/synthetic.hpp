#pragma once

#include <cstdint>
#include <vector>

#include "motionbeat/audio_features.hpp"
#include "motionbeat/dataset.hpp"

namespace motionbeat {

struct SyntheticPairSpec {
  double bpm_min = 90.0;
  double bpm_max = 140.0;
  int bar_len = 4;
  int num_beats = 16;
  std::vector<double> accent_pattern{1.0, 0.25, 0.6, 0.25};  // per bar position, >= 0
  double contact_lag_std = 0.05;    // beats
  double feature_noise_std = 0.05;  // added to pooled tokens of both modalities
  std::uint64_t seed = 0;

  int style = 0;       // selects timbre and movement style
  int num_joints = 4;  // joint 0 is the foot used for contacts
  double motion_fps = 60.0;
  SpectrogramConfig audio{};

  void validate() const;
};

struct SyntheticPair {
  Clip clip;
  std::vector<double> accent_beats;   // event times in beats
  std::vector<double> contact_beats;  // lagged motion contact times in beats, same order
};

// Renders a waveform and a joint trajectory from a shared accent event train,
// then tokenizes both on the clip's beat grid. Annotations come from the event
// trains: onset = accent weight per beat; motion contacts and energy spread each
// lagged event linearly over its two nearest beats (cyclically).
SyntheticPair generate_synthetic_pair(const SyntheticPairSpec& spec);

struct DatasetSpec {
  SyntheticPairSpec base;
  std::vector<std::vector<double>> accent_palette;  // empty: use base.accent_pattern
  bool rotate_patterns = true;   // random cyclic rotation of the chosen pattern
  double accent_perturb = 0.1;   // uniform +- perturbation of each weight, clamped to [0, 1]
  int num_styles = 4;

  void validate() const;
};

// Pair i uses seed base.seed + i.
Dataset generate_dataset(const DatasetSpec& spec, int count);
SyntheticPair generate_dataset_pair(const DatasetSpec& spec, int index);

DatasetSpec default_dataset_spec();

}  // namespace motionbeat
