#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>

#include "kgcf/decoder.hpp"

namespace kgcf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian binary: magic "KGCF", version, layers, encoder width, augmented relations,
// entity count, decoder hidden width, then float64 tensors in for_each_tensor order.
void write_checkpoint(std::ostream& out, const ModelParams& params, std::size_t num_entities);
ModelParams read_checkpoint(std::istream& in, std::size_t& num_entities, const std::string& source);

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, std::size_t num_entities);
ModelParams load_checkpoint(const std::filesystem::path& path, std::size_t& num_entities);

}  // namespace kgcf
