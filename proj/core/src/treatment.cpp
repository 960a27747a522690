#include "kgcf/treatment.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "kgcf/error.hpp"
#include "kgcf/parallel.hpp"

namespace kgcf {

std::size_t KCore::num_survivors() const noexcept {
  std::size_t n = 0;
  for (char s : survives) n += s ? 1 : 0;
  return n;
}

KCore kcore_surviving(const SimpleGraph& graph, int k) {
  if (k < 1) throw ConfigError("k-core order must be >= 1");
  const std::size_t n = graph.num_vertices();
  std::vector<std::size_t> degree(n);
  std::vector<char> survives(n, 1);
  std::deque<EntityId> queue;
  for (EntityId v = 0; v < n; ++v) {
    degree[v] = graph.degree(v);
    if (degree[v] < static_cast<std::size_t>(k)) {
      survives[v] = 0;
      queue.push_back(v);
    }
  }
  while (!queue.empty()) {
    const EntityId v = queue.front();
    queue.pop_front();
    for (EntityId u : graph.adjacency[v]) {
      if (!survives[u]) continue;
      if (--degree[u] < static_cast<std::size_t>(k)) {
        survives[u] = 0;
        queue.push_back(u);
      }
    }
  }

  KCore core;
  core.survives = std::move(survives);
  core.subgraph.adjacency.resize(n);
  for (EntityId v = 0; v < n; ++v) {
    if (!core.survives[v]) continue;
    for (EntityId u : graph.adjacency[v]) {
      if (core.survives[u]) core.subgraph.adjacency[v].push_back(u);
    }
  }
  return core;
}

ClusterAssignment cluster(const KCore& core, RelationId relation, int k) {
  const std::size_t n = core.survives.size();
  constexpr auto kUnset = static_cast<std::uint32_t>(-1);
  ClusterAssignment out{relation, k, 0, std::vector<std::uint32_t>(n, kUnset)};

  // Scanning vertices in index order labels components by their smallest member.
  std::vector<EntityId> stack;
  std::uint32_t next = 0;
  for (EntityId v = 0; v < n; ++v) {
    if (!core.survives[v] || out.labels[v] != kUnset) continue;
    out.labels[v] = next;
    stack.push_back(v);
    while (!stack.empty()) {
      const EntityId x = stack.back();
      stack.pop_back();
      for (EntityId y : core.subgraph.adjacency[x]) {
        if (out.labels[y] == kUnset) {
          out.labels[y] = next;
          stack.push_back(y);
        }
      }
    }
    ++next;
  }
  out.num_components = next;
  for (EntityId v = 0; v < n; ++v) {
    if (out.labels[v] == kUnset) out.labels[v] = next++;
  }
  return out;
}

TreatmentAssignments::TreatmentAssignments(std::vector<ClusterAssignment> per_relation, std::size_t num_entities)
    : per_relation_(std::move(per_relation)), num_entities_(num_entities) {
  for (std::size_t j = 0; j < per_relation_.size(); ++j) {
    if (per_relation_[j].labels.size() != num_entities_) {
      throw ShapeError("assignment for relation " + std::to_string(j) + " does not cover every entity");
    }
  }
}

TreatmentAssignments TreatmentAssignments::compute(const RelationGraph& graph, int k) {
  std::vector<ClusterAssignment> per_relation(graph.num_relations());
  parallel_for(graph.num_relations(), [&](std::size_t j) {
    const auto rel = static_cast<RelationId>(j);
    const auto projected = undirected_projection(graph.num_entities(), graph.relation_edges(rel));
    per_relation[j] = cluster(kcore_surviving(projected, k), rel, k);
  });
  return TreatmentAssignments(std::move(per_relation), graph.num_entities());
}

const ClusterAssignment& TreatmentAssignments::relation(RelationId r) const {
  if (r >= per_relation_.size()) throw LookupError("no treatment assignment for relation " + std::to_string(r));
  return per_relation_[r];
}

TreatmentBit TreatmentAssignments::factual(EntityId head, RelationId relation, EntityId tail) const {
  if (head >= num_entities_ || tail >= num_entities_) {
    throw LookupError("entity index out of range in treatment lookup");
  }
  const std::size_t num = per_relation_.size();
  if (relation >= 2 * num) throw LookupError("relation index out of range in treatment lookup");
  const std::size_t r = relation < num ? relation : relation - num;
  const auto& labels = per_relation_[r].labels;
  return labels[head] == labels[tail] ? kTreated : kUntreated;
}

void TreatmentAssignments::write_tsv(std::ostream& out, const Dataset& dataset) const {
  out << "# k=" << k() << " entities=" << num_entities_ << " relations=" << per_relation_.size() << '\n';
  for (const auto& a : per_relation_) {
    const auto& rel = dataset.relations.name(a.relation);
    for (EntityId e = 0; e < a.labels.size(); ++e) {
      out << rel << '\t' << dataset.entities.name(e) << '\t' << a.labels[e] << '\n';
    }
  }
}

TreatmentAssignments TreatmentAssignments::read_tsv(std::istream& in, const Dataset& dataset,
                                                    const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing assignment header");
  int k = 0;
  std::size_t entities = 0;
  std::size_t relations = 0;
  if (std::sscanf(line.c_str(), "# k=%d entities=%zu relations=%zu", &k, &entities, &relations) != 3) {
    throw ParseError(source, 1, "malformed assignment header");
  }
  if (entities != dataset.num_entities() || relations != dataset.num_relations()) {
    throw ConfigError("assignments in '" + source + "' do not match the dataset vocabulary sizes");
  }
  std::vector<ClusterAssignment> per_relation(relations);
  for (std::size_t j = 0; j < relations; ++j) {
    per_relation[j] = {static_cast<RelationId>(j), k, 0, std::vector<std::uint32_t>(entities, 0)};
  }
  std::vector<std::vector<char>> seen(relations, std::vector<char>(entities, 0));
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string rel, ent, label;
    if (!std::getline(fields, rel, '\t') || !std::getline(fields, ent, '\t') || !std::getline(fields, label)) {
      throw ParseError(source, line_no, "expected relation<TAB>entity<TAB>label");
    }
    const auto r = dataset.relations.find(rel);
    const auto e = dataset.entities.find(ent);
    if (!r || !e) throw ParseError(source, line_no, "unknown relation or entity");
    per_relation[*r].labels[*e] = static_cast<std::uint32_t>(std::stoul(label));
    seen[*r][*e] = 1;
  }
  for (std::size_t j = 0; j < relations; ++j) {
    std::uint32_t max_label = 0;
    for (EntityId e = 0; e < entities; ++e) {
      if (!seen[j][e]) throw ParseError(source, line_no, "assignment table is incomplete");
      max_label = std::max(max_label, per_relation[j].labels[e]);
    }
    // Components are the labels shared by more than one entity; they come first by construction.
    std::vector<std::size_t> sizes(static_cast<std::size_t>(max_label) + 1, 0);
    for (auto l : per_relation[j].labels) ++sizes[l];
    std::size_t components = 0;
    while (components < sizes.size() && sizes[components] > 1) ++components;
    per_relation[j].num_components = components;
  }
  return TreatmentAssignments(std::move(per_relation), entities);
}

bool operator==(const TreatmentAssignments& a, const TreatmentAssignments& b) {
  if (a.num_entities_ != b.num_entities_ || a.per_relation_.size() != b.per_relation_.size()) return false;
  for (std::size_t j = 0; j < a.per_relation_.size(); ++j) {
    if (a.per_relation_[j].labels != b.per_relation_[j].labels || a.per_relation_[j].k != b.per_relation_[j].k) {
      return false;
    }
  }
  return true;
}

TreatmentBit factual_treatment(EntityId head, RelationId relation, EntityId tail,
                               const TreatmentAssignments& assignments) {
  return assignments.factual(head, relation, tail);
}

}  // namespace kgcf
