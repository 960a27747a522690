#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "kgcf/kg_core.hpp"
#include "kgcf/matrix.hpp"

namespace kgcf {

// Random-walk and skip-gram settings. return_p = inout_q = 1 gives first-order walks.
struct WalkParams {
  int walks_per_node = 10;
  int walk_length = 40;
  int window = 5;
  double return_p = 1.0;
  double inout_q = 1.0;
  int negatives = 5;
  int epochs = 2;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;

  void validate() const;  // throws ConfigError unless every field is positive
};

// Biased second-order walks starting from every non-isolated vertex.
std::vector<std::vector<EntityId>> generate_walks(const SimpleGraph& view, const WalkParams& params);

// |E| x d embedding of one relation view; isolated entities keep zero rows.
// Single-threaded, so the same seed always yields bitwise-identical output.
Matrix embed_relation(const SimpleGraph& view, std::size_t dim, const WalkParams& params);

// M = sum_j psi_j M_{r_j}.
Matrix combine(std::span<const Matrix> matrices, std::span<const double> proportions);

// Per-relation embeddings over the original relations (computed concurrently, seeded per
// relation from params.seed) followed by the proportion-weighted combination.
Matrix build_weighted_embedding(const RelationGraph& graph, std::span<const double> proportions, std::size_t dim,
                                const WalkParams& params);

// Text form: first line `|E| d`, then one row per entity, 17 significant digits.
void write_embedding(std::ostream& out, const Matrix& m);
Matrix read_embedding(std::istream& in, const std::string& source);

}  // namespace kgcf
