// SPDX-License-Identifier: Apache-2.0
//
// Model checkpoint file, all integers u32 and all payloads f64, little
// endian:
//
//   "MIVM" | version=1 | record_count
//   record: name_len | name bytes | rank (1 or 2) | rank x dim | f64 payload
//
// Records named "meta.*" hold the model's structure as small integers stored
// in f64; the remaining records are the parameter arrays named as in
// parameter_slots(). A 2-rank payload is row-major.

#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "mivc/model.hpp"

namespace mivc {

inline constexpr char kCheckpointMagic[4] = {'M', 'I', 'V', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string encode_checkpoint(const Model& model);
Model decode_checkpoint(std::string_view bytes, const std::string& context = "checkpoint");

void save_checkpoint(const std::filesystem::path& path, const Model& model);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace mivc
