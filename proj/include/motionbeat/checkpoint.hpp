#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "motionbeat/encoder.hpp"

namespace motionbeat {

// Binary layout, all little-endian:
//   "MBT1"                          4 bytes
//   version                         int32 (1)
//   audio config, motion config     11 x int32 each: num_layers, hidden_dim,
//                                   num_heads, embed_dim, input_dim, bar_len,
//                                   ff_mult, contact_guided, phase_features,
//                                   activation (0 = erf GELU), dropout (0 = none)
//   tensor count                    int32 (audio + motion)
//   tensors                         float32 values, audio stack then motion
//                                   stack, each in encoder_layout() order,
//                                   row-major
std::string serialize_checkpoint(const MotionBeatModel& model);
MotionBeatModel deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const MotionBeatModel& model);
MotionBeatModel load_checkpoint(const std::filesystem::path& path);

}  // namespace motionbeat
