#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace kgcf {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;
using EdgeId = std::uint32_t;

struct Triplet {
  EntityId head = 0;
  RelationId relation = 0;
  EntityId tail = 0;

  friend auto operator<=>(const Triplet&, const Triplet&) = default;
};

// Ordered (head, tail) pair with the relation erased.
struct EntityPair {
  EntityId head = 0;
  EntityId tail = 0;

  friend auto operator<=>(const EntityPair&, const EntityPair&) = default;
};

struct TripletHash {
  std::size_t operator()(const Triplet& t) const noexcept;
};

using TripletSet = std::unordered_set<Triplet, TripletHash>;

// Bijection between strings and dense indices assigned in first-appearance order.
class Vocabulary {
 public:
  std::uint32_t add(std::string_view name);
  std::optional<std::uint32_t> find(std::string_view name) const;
  std::uint32_t at(std::string_view name) const;  // throws LookupError
  const std::string& name(std::uint32_t index) const;
  std::size_t size() const noexcept { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct SplitReport {
  std::string split;
  std::string source;
  std::size_t lines = 0;
  std::size_t duplicates = 0;
  std::size_t triplets = 0;
};

struct LoadReport {
  std::vector<SplitReport> splits;
  std::size_t entities = 0;
  std::size_t relations = 0;

  std::size_t duplicates() const noexcept;
  std::string to_json() const;
};

struct Dataset {
  std::vector<Triplet> train;
  std::vector<Triplet> valid;
  std::vector<Triplet> test;
  Vocabulary entities;
  Vocabulary relations;  // original relations only
  LoadReport report;

  std::size_t num_entities() const noexcept { return entities.size(); }
  std::size_t num_relations() const noexcept { return relations.size(); }
};

// Reads three `head<TAB>relation<TAB>tail` files. Blank lines are skipped; duplicates inside a
// split are dropped and counted. Throws ParseError on malformed lines and ConfigError when
// the train split is empty.
Dataset load_dataset(const std::filesystem::path& train, const std::filesystem::path& valid,
                     const std::filesystem::path& test);

struct NamedStream {
  std::istream& in;
  std::string name;
};
Dataset parse_dataset(NamedStream train, NamedStream valid, NamedStream test);

// Builds a dataset from already-indexed splits with synthetic vocabularies `e<i>` / `r<j>`.
Dataset make_indexed_dataset(std::size_t num_entities, std::size_t num_relations, std::vector<Triplet> train,
                             std::vector<Triplet> valid = {}, std::vector<Triplet> test = {});

void write_triplets(std::ostream& out, std::span<const Triplet> triplets, const Dataset& dataset);

// Per-relation adjacency views built from the train split, optionally augmented with inverse
// relations j + |R| holding the reversed edges, plus incoming/outgoing edge indices.
class RelationGraph {
 public:
  RelationGraph() = default;
  RelationGraph(std::size_t num_entities, std::size_t num_relations, std::span<const Triplet> train,
                bool include_inverses);

  std::size_t num_entities() const noexcept { return num_entities_; }
  std::size_t num_relations() const noexcept { return num_relations_; }
  std::size_t num_augmented_relations() const noexcept { return relation_edges_.size(); }
  bool has_inverses() const noexcept { return has_inverses_; }

  // Inverse of an augmented relation index (j <-> j + |R|). Requires inverses.
  RelationId inverse(RelationId relation) const;
  bool is_inverse(RelationId relation) const noexcept { return relation >= num_relations_; }
  RelationId original(RelationId relation) const noexcept {
    return is_inverse(relation) ? relation - static_cast<RelationId>(num_relations_) : relation;
  }

  // Frontal slice A_r as an edge list.
  std::span<const EntityPair> relation_edges(RelationId relation) const;

  std::span<const Triplet> edges() const noexcept { return edges_; }
  const Triplet& edge(EdgeId id) const noexcept { return edges_[id]; }
  std::size_t num_edges() const noexcept { return edges_.size(); }

  std::span<const EdgeId> incoming(EntityId entity) const;
  std::span<const EdgeId> outgoing(EntityId entity) const;

  // A^F membership over the augmented edge set.
  bool contains(const Triplet& t) const { return members_.contains(t); }

 private:
  std::size_t num_entities_ = 0;
  std::size_t num_relations_ = 0;
  bool has_inverses_ = false;
  std::vector<std::vector<EntityPair>> relation_edges_;
  std::vector<Triplet> edges_;
  std::vector<std::size_t> in_offsets_;
  std::vector<EdgeId> in_edges_;
  std::vector<std::size_t> out_offsets_;
  std::vector<EdgeId> out_edges_;
  TripletSet members_;
};

RelationGraph build_graph(const Dataset& dataset, bool include_inverses);

// psi_j = share of train triplets carrying relation j.
std::vector<double> relation_proportions(const Dataset& dataset);

enum class CandidateScope { TrainOnly, AllSplits };

CandidateScope parse_scope(std::string_view text);
std::string_view to_string(CandidateScope scope);

// Distinct (head, tail) pairs seen in the chosen splits, sorted.
std::vector<EntityPair> candidate_pairs(const Dataset& dataset, CandidateScope scope = CandidateScope::TrainOnly);

// Undirected simple-graph projection of a relation view: sorted, deduplicated neighbour lists,
// self-loops dropped.
struct SimpleGraph {
  std::vector<std::vector<EntityId>> adjacency;

  std::size_t num_vertices() const noexcept { return adjacency.size(); }
  std::size_t degree(EntityId v) const noexcept { return adjacency[v].size(); }
  std::size_t num_edges() const noexcept;
  bool adjacent(EntityId a, EntityId b) const;
};

SimpleGraph undirected_projection(std::size_t num_entities, std::span<const EntityPair> edges);

// Train ∪ valid ∪ test, used as the ranking filter.
TripletSet all_true_triplets(const Dataset& dataset);

}  // namespace kgcf
