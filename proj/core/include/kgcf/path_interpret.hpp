#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "kgcf/cf_matcher.hpp"
#include "kgcf/eval_rank.hpp"

namespace kgcf {

// One weight per augmented edge of the train graph, indexed by EdgeId.
struct EdgeImportance {
  std::vector<double> weights;

  double at(EdgeId id) const { return weights.at(id); }
};

// p^F(h, r, t) with a multiplicative gate on every (layer, edge) message.
double gated_score(const ScoringModel& model, const Triplet& query, const EdgeGates& gates);

// d p^F / d gate at all-ones gates, summed over layers. A layer-l gate only counts when the
// edge's source lies within l hops of h, so edges outside the receptive field weigh 0.
EdgeImportance edge_importance(const ScoringModel& model, const Triplet& query);

struct PathInterpretation {
  std::vector<EdgeId> edges;
  double weight = 0.0;
};

// Sum of edge weights in path order.
double path_weight(const EdgeImportance& importance, const std::vector<EdgeId>& edges);

// Orders paths by weight (descending), then by their (h, r, t) edge sequence.
bool path_before(const RelationGraph& graph, const PathInterpretation& a, const PathInterpretation& b);

// Beam search over simple paths (no repeated entity) of 1..max_len edges from h that stop at t.
// Returns up to k paths, best first. Throws ConfigError unless 1 <= k <= beam.
std::vector<PathInterpretation> top_paths(const RelationGraph& graph, const EdgeImportance& importance, EntityId head,
                                          EntityId tail, std::size_t k, std::size_t max_len, std::size_t beam = 10);

// `(h, r, t)` with vocabulary names; inverse relations carry a `^-1` suffix.
std::string format_triplet(const Dataset& dataset, const RelationGraph& graph, const Triplet& t);

// Plain-text report: query line with treatment bits, the substitute when matched, the score,
// then one `weight<TAB>(h, r, t) ∧ (...)` line per path with per-edge T^F/T^CF annotations.
std::string format_report(const Dataset& dataset, const ScoringModel& model, const TreatmentTable& table,
                          const Triplet& query, double score, const std::vector<PathInterpretation>& paths);

}  // namespace kgcf
