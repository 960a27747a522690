#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace kgcf {

using Rng = std::mt19937_64;

// Stable 64-bit FNV-1a; std::hash is not guaranteed stable across builds.
std::uint64_t fnv1a64(std::string_view text) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Independent per-component seed stream: hash(master seed, component name).
std::uint64_t derive_seed(std::uint64_t master, std::string_view component) noexcept;
std::uint64_t derive_seed(std::uint64_t master, std::string_view component, std::uint64_t index) noexcept;

}  // namespace kgcf
