#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "kgcf/kg_core.hpp"

namespace kgcf {

// Binary treatment: 1 when head and tail share a k-core community under the query relation.
struct TreatmentBit {
  std::uint8_t value = 0;

  constexpr TreatmentBit flipped() const noexcept { return {static_cast<std::uint8_t>(1 - value)}; }
  constexpr double as_double() const noexcept { return static_cast<double>(value); }
  friend auto operator<=>(const TreatmentBit&, const TreatmentBit&) = default;
};

inline constexpr TreatmentBit kUntreated{0};
inline constexpr TreatmentBit kTreated{1};

struct KCore {
  std::vector<char> survives;  // per vertex
  SimpleGraph subgraph;        // induced on the survivors

  std::size_t num_survivors() const noexcept;
};

// Maximal subgraph with minimum degree >= k, by repeated deletion of low-degree vertices.
KCore kcore_surviving(const SimpleGraph& graph, int k);

// c: entity -> label for one relation. Components of the k-core are labelled 0..C-1 in order of
// their smallest member; every peeled entity gets its own label >= C.
struct ClusterAssignment {
  RelationId relation = 0;
  int k = 0;
  std::size_t num_components = 0;
  std::vector<std::uint32_t> labels;
};

ClusterAssignment cluster(const KCore& core, RelationId relation, int k);

// Per-relation assignments computed from the train graph only.
class TreatmentAssignments {
 public:
  TreatmentAssignments() = default;
  TreatmentAssignments(std::vector<ClusterAssignment> per_relation, std::size_t num_entities);

  // One assignment per original relation; relations are processed concurrently.
  static TreatmentAssignments compute(const RelationGraph& graph, int k);

  std::size_t num_relations() const noexcept { return per_relation_.size(); }
  std::size_t num_entities() const noexcept { return num_entities_; }
  int k() const noexcept { return per_relation_.empty() ? 0 : per_relation_.front().k; }
  const ClusterAssignment& relation(RelationId r) const;

  // T^F for (h, r, t); inverse relations (r >= |R|) resolve to the original relation.
  TreatmentBit factual(EntityId head, RelationId relation, EntityId tail) const;

  // `# k=<k> entities=<E> relations=<R>` header, then `relation<TAB>entity<TAB>label` lines.
  void write_tsv(std::ostream& out, const Dataset& dataset) const;
  static TreatmentAssignments read_tsv(std::istream& in, const Dataset& dataset, const std::string& source);

  friend bool operator==(const TreatmentAssignments& a, const TreatmentAssignments& b);

 private:
  std::vector<ClusterAssignment> per_relation_;
  std::size_t num_entities_ = 0;
};

TreatmentBit factual_treatment(EntityId head, RelationId relation, EntityId tail,
                               const TreatmentAssignments& assignments);

}  // namespace kgcf
