#include "kgcf/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "kgcf/error.hpp"

namespace kgcf {

namespace {

constexpr std::array<char, 4> kMagic{'K', 'G', 'C', 'F'};

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(bytes.data(), bytes.size());
}

std::uint64_t get_u64(std::istream& in, const std::string& source) {
  std::array<unsigned char, 8> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) throw IoError(source + ": truncated checkpoint");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const ModelParams& params, std::size_t num_entities) {
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, kCheckpointVersion);
  put_u64(out, params.encoder.layers);
  put_u64(out, params.encoder.dim);
  put_u64(out, params.encoder.relations);
  put_u64(out, num_entities);
  put_u64(out, params.decoder.hidden);
  params.for_each_tensor([&](std::string_view, std::span<const double> t) {
    for (double x : t) put_u64(out, std::bit_cast<std::uint64_t>(x));
  });
  if (!out) throw IoError("failed to write checkpoint");
}

ModelParams read_checkpoint(std::istream& in, std::size_t& num_entities, const std::string& source) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw VersionError(source + ": not a checkpoint");
  const auto version = get_u64(in, source);
  if (version != kCheckpointVersion) {
    throw VersionError(source + ": checkpoint version " + std::to_string(version) + " is not supported");
  }
  ModelConfig config;
  config.layers = get_u64(in, source);
  config.dim = get_u64(in, source);
  const auto relations = get_u64(in, source);
  num_entities = get_u64(in, source);
  config.decoder_hidden = get_u64(in, source);
  if (config.layers > 1024 || config.dim > (1u << 16) || relations > (1u << 24) || config.decoder_hidden > (1u << 16)) {
    throw VersionError(source + ": implausible checkpoint header");
  }
  auto params = ModelParams::zeros(config, relations);
  params.for_each_tensor([&](std::string_view, std::span<double> t) {
    for (auto& x : t) x = std::bit_cast<double>(get_u64(in, source));
  });
  if (in.peek() != std::char_traits<char>::eof()) throw VersionError(source + ": trailing bytes after checkpoint");
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, std::size_t num_entities) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  write_checkpoint(out, params, num_entities);
}

ModelParams load_checkpoint(const std::filesystem::path& path, std::size_t& num_entities) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return read_checkpoint(in, num_entities, path.string());
}

}  // namespace kgcf
