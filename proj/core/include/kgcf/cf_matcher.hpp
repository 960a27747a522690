#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "kgcf/kg_core.hpp"
#include "kgcf/matrix.hpp"
#include "kgcf/treatment.hpp"

namespace kgcf {

struct CounterfactualRecord {
  Triplet triplet;
  TreatmentBit t_factual;
  std::optional<EntityPair> substitute;
  TreatmentBit t_counterfactual;
  std::uint8_t a_counterfactual = 1;

  bool matched() const noexcept { return substitute.has_value(); }
  friend bool operator==(const CounterfactualRecord&, const CounterfactualRecord&) = default;
};

// ||m_i - m_a||_2 + ||m_k - m_b||_2 for pairs (i, k) and (a, b).
double pair_distance(const Matrix& embedding, EntityId i, EntityId a, EntityId k, EntityId b);

using TreatmentLookup = std::function<TreatmentBit(EntityId head, EntityId tail)>;

// Nearest candidate pair (excluding the query pair) whose treatment under the query relation is
// the opposite of `query_treatment`; ties go to the lexicographically smallest pair.
std::optional<EntityPair> find_substitute(EntityPair query, TreatmentBit query_treatment,
                                          std::span<const EntityPair> candidates, const Matrix& embedding,
                                          const TreatmentLookup& treatment_of);

std::optional<EntityPair> find_substitute(const Triplet& query, std::span<const EntityPair> candidates,
                                          const Matrix& embedding, const TreatmentAssignments& assignments);

// Write-once table of counterfactual records for the train triplets and their inverse mirrors.
class TreatmentTable {
 public:
  TreatmentTable() = default;
  // `originals` holds one record per train triplet, in train order; mirrors are derived.
  TreatmentTable(std::vector<CounterfactualRecord> originals, std::size_t num_relations);

  std::span<const CounterfactualRecord> originals() const noexcept {
    return {records_.data(), num_originals_};
  }
  // Originals followed by their inverse-relation mirrors.
  std::span<const CounterfactualRecord> records() const noexcept { return records_; }
  const CounterfactualRecord* find(const Triplet& t) const;
  std::size_t num_relations() const noexcept { return num_relations_; }

  double matched_fraction() const;

  // One JSON object per train triplet: h, r, t, tf, tcf, acf, sub_h, sub_t (null when unmatched).
  void write_jsonl(std::ostream& out) const;
  static TreatmentTable read_jsonl(std::istream& in, std::size_t num_relations, const std::string& source);

  friend bool operator==(const TreatmentTable& a, const TreatmentTable& b) { return a.records_ == b.records_; }

 private:
  std::vector<CounterfactualRecord> records_;
  std::size_t num_originals_ = 0;
  std::size_t num_relations_ = 0;
  std::unordered_map<Triplet, std::size_t, TripletHash> index_;
};

// Exhaustive matching over the candidate set, data-parallel over train triplets. A^CF is
// membership of the substitute triplet in the train split.
TreatmentTable build_table(const Dataset& dataset, const Matrix& embedding, const TreatmentAssignments& assignments,
                           std::span<const EntityPair> candidates);

}  // namespace kgcf
