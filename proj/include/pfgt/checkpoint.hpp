#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "pfgt/model.hpp"

namespace pfgt {

// "PFGT" checkpoint: magic bytes, little-endian u32 format version, a
// length-prefixed UTF-8 JSON header (encoder config, prompt activity mask,
// parameter name/shape/frozen/offset table), then the raw little-endian
// float32 arrays in header order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Model& model, const std::string& path);
std::unique_ptr<Model> load_checkpoint(const std::string& path);

// FNV-1a 64 of a file's bytes; used to report checkpoint digests.
std::uint64_t file_digest(const std::string& path);

}  // namespace pfgt
