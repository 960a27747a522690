#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "kgcf/decoder.hpp"
#include "kgcf/kg_core.hpp"
#include "kgcf/treatment.hpp"

namespace kgcf {

// Everything needed to score triplets with the factual decoder output.
struct ScoringModel {
  const ModelParams& params;
  const RelationGraph& graph;
  const TreatmentAssignments& treatments;
  EncoderOptions options{};
  bool treatment_input = true;  // false feeds 0 in the treatment column

  TreatmentBit input_treatment(EntityId head, RelationId relation, EntityId tail) const;
};

// p^F(t | h, r) for any augmented relation r.
double score(const ScoringModel& model, const Triplet& triplet);
// p^F(h | t, r^-1): the head-direction score of an original-relation triplet.
double score_head(const ScoringModel& model, const Triplet& triplet);
// p^F(e | h, r) for every entity e, from a single encoder pass.
std::vector<double> score_all_tails(const ScoringModel& model, EntityId head, RelationId relation);

enum class Direction { Head, Tail };

// 1 + #(strictly greater) + 0.5 * #(equal), over candidates that are not filtered out.
double filtered_rank_from_scores(std::span<const double> scores, EntityId answer,
                                 const std::function<bool(EntityId)>& is_filtered);

double filtered_rank(const ScoringModel& model, const Triplet& triplet, Direction direction,
                     const TripletSet& filter);

struct RankResult {
  Triplet triplet;
  double rank_head = 1.0;
  double rank_tail = 1.0;
};

struct MetricsReport {
  std::string split;
  double mrr = 0.0;
  double mr = 0.0;
  double hits_1 = 0.0;
  double hits_3 = 0.0;
  double hits_10 = 0.0;
  std::size_t n_queries = 0;  // directional queries, 2|T|

  std::string to_json() const;
};

// Ranks of each triplet in both directions, computed in parallel and returned in split order.
std::vector<RankResult> rank_split(const ScoringModel& model, std::span<const Triplet> split,
                                   const TripletSet& filter);

MetricsReport metrics_from_ranks(std::span<const RankResult> ranks, std::string split = {});

// Throws StatisticError on an empty split.
MetricsReport evaluate(const ScoringModel& model, std::span<const Triplet> split, const TripletSet& filter,
                       std::string split_name = {});

// Reciprocal ranks in canonical order: head then tail for each triplet.
std::vector<double> reciprocal_ranks(std::span<const RankResult> ranks);

// One JSON object per triplet: h, r, t, rank_head, rank_tail.
void write_ranks(std::ostream& out, std::span<const RankResult> ranks);
std::vector<RankResult> read_ranks(std::istream& in, const std::string& source);

struct TTestResult {
  double t = 0.0;
  double p_value = 1.0;
  std::size_t degrees_of_freedom = 0;
};

// Two-sided paired t-test. All-zero differences give p = 1; constant non-zero differences
// throw StatisticError.
TTestResult significance_test(std::span<const double> a, std::span<const double> b);

}  // namespace kgcf
