#include "kgcf/kg_core.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "kgcf/error.hpp"
#include "kgcf/random.hpp"

namespace kgcf {

std::size_t TripletHash::operator()(const Triplet& t) const noexcept {
  std::uint64_t h = splitmix64(t.head);
  h = splitmix64(h ^ t.relation);
  h = splitmix64(h ^ t.tail);
  return static_cast<std::size_t>(h);
}

std::uint32_t Vocabulary::add(std::string_view name) {
  auto [it, inserted] = index_.try_emplace(std::string(name), static_cast<std::uint32_t>(names_.size()));
  if (inserted) names_.emplace_back(name);
  return it->second;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocabulary::at(std::string_view name) const {
  if (auto id = find(name)) return *id;
  throw LookupError("unknown vocabulary entry '" + std::string(name) + "'");
}

const std::string& Vocabulary::name(std::uint32_t index) const {
  if (index >= names_.size()) throw LookupError("vocabulary index " + std::to_string(index) + " out of range");
  return names_[index];
}

std::size_t LoadReport::duplicates() const noexcept {
  std::size_t total = 0;
  for (const auto& s : splits) total += s.duplicates;
  return total;
}

std::string LoadReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["entities"] = entities;
  doc["relations"] = relations;
  doc["duplicates_dropped"] = duplicates();
  auto& arr = doc["splits"] = nlohmann::ordered_json::array();
  for (const auto& s : splits) {
    arr.push_back({{"split", s.split},
                   {"source", s.source},
                   {"lines", s.lines},
                   {"duplicates", s.duplicates},
                   {"triplets", s.triplets}});
  }
  return doc.dump(2);
}

namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

SplitReport read_split(NamedStream source, std::string split, Dataset& dataset, std::vector<Triplet>& out) {
  SplitReport report{std::move(split), source.name};
  TripletSet seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source.in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++report.lines;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ParseError(source.name, line_no, "expected 3 tab-separated fields, found " + std::to_string(fields.size()));
    }
    for (const auto& f : fields) {
      if (f.empty()) throw ParseError(source.name, line_no, "empty field");
    }
    const Triplet t{dataset.entities.add(fields[0]), dataset.relations.add(fields[1]), dataset.entities.add(fields[2])};
    if (!seen.insert(t).second) {
      ++report.duplicates;
      continue;
    }
    out.push_back(t);
  }
  report.triplets = out.size();
  return report;
}

}  // namespace

Dataset parse_dataset(NamedStream train, NamedStream valid, NamedStream test) {
  Dataset dataset;
  dataset.report.splits.push_back(read_split(train, "train", dataset, dataset.train));
  dataset.report.splits.push_back(read_split(valid, "valid", dataset, dataset.valid));
  dataset.report.splits.push_back(read_split(test, "test", dataset, dataset.test));
  if (dataset.train.empty()) throw ConfigError("train split '" + train.name + "' contains no triplets");
  dataset.report.entities = dataset.entities.size();
  dataset.report.relations = dataset.relations.size();
  return dataset;
}

Dataset load_dataset(const std::filesystem::path& train, const std::filesystem::path& valid,
                     const std::filesystem::path& test) {
  auto open = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw IoError("cannot open triple file '" + p.string() + "'");
    return in;
  };
  auto train_in = open(train);
  auto valid_in = open(valid);
  auto test_in = open(test);
  return parse_dataset({train_in, train.string()}, {valid_in, valid.string()}, {test_in, test.string()});
}

Dataset make_indexed_dataset(std::size_t num_entities, std::size_t num_relations, std::vector<Triplet> train,
                             std::vector<Triplet> valid, std::vector<Triplet> test) {
  Dataset dataset;
  for (std::size_t e = 0; e < num_entities; ++e) dataset.entities.add("e" + std::to_string(e));
  for (std::size_t r = 0; r < num_relations; ++r) dataset.relations.add("r" + std::to_string(r));
  auto check = [&](const std::vector<Triplet>& split) {
    for (const auto& t : split) {
      if (t.head >= num_entities || t.tail >= num_entities || t.relation >= num_relations) {
        throw LookupError("triplet index out of range");
      }
    }
  };
  auto dedup = [](std::vector<Triplet>& split, const char* name) {
    SplitReport report{name, "<memory>", split.size()};
    TripletSet seen;
    std::vector<Triplet> kept;
    for (const auto& t : split) {
      if (seen.insert(t).second) {
        kept.push_back(t);
      } else {
        ++report.duplicates;
      }
    }
    split = std::move(kept);
    report.triplets = split.size();
    return report;
  };
  check(train);
  check(valid);
  check(test);
  dataset.report.splits.push_back(dedup(train, "train"));
  dataset.report.splits.push_back(dedup(valid, "valid"));
  dataset.report.splits.push_back(dedup(test, "test"));
  if (train.empty()) throw ConfigError("train split contains no triplets");
  dataset.train = std::move(train);
  dataset.valid = std::move(valid);
  dataset.test = std::move(test);
  dataset.report.entities = num_entities;
  dataset.report.relations = num_relations;
  return dataset;
}

void write_triplets(std::ostream& out, std::span<const Triplet> triplets, const Dataset& dataset) {
  for (const auto& t : triplets) {
    out << dataset.entities.name(t.head) << '\t' << dataset.relations.name(t.relation) << '\t'
        << dataset.entities.name(t.tail) << '\n';
  }
}

RelationGraph::RelationGraph(std::size_t num_entities, std::size_t num_relations, std::span<const Triplet> train,
                             bool include_inverses)
    : num_entities_(num_entities), num_relations_(num_relations), has_inverses_(include_inverses) {
  const std::size_t augmented = include_inverses ? 2 * num_relations : num_relations;
  relation_edges_.resize(augmented);
  edges_.reserve(include_inverses ? 2 * train.size() : train.size());
  for (const auto& t : train) {
    if (t.head >= num_entities || t.tail >= num_entities || t.relation >= num_relations) {
      throw LookupError("train triplet index out of range");
    }
    relation_edges_[t.relation].push_back({t.head, t.tail});
    edges_.push_back(t);
  }
  if (include_inverses) {
    for (const auto& t : train) {
      const auto inv = static_cast<RelationId>(t.relation + num_relations);
      relation_edges_[inv].push_back({t.tail, t.head});
      edges_.push_back({t.tail, inv, t.head});
    }
  }

  auto build_index = [&](auto key, std::vector<std::size_t>& offsets, std::vector<EdgeId>& index) {
    offsets.assign(num_entities + 1, 0);
    for (const auto& e : edges_) ++offsets[key(e) + 1];
    for (std::size_t i = 0; i < num_entities; ++i) offsets[i + 1] += offsets[i];
    index.assign(edges_.size(), 0);
    std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
    for (EdgeId id = 0; id < edges_.size(); ++id) index[cursor[key(edges_[id])]++] = id;
  };
  build_index([](const Triplet& e) { return e.tail; }, in_offsets_, in_edges_);
  build_index([](const Triplet& e) { return e.head; }, out_offsets_, out_edges_);

  members_.reserve(edges_.size());
  for (const auto& e : edges_) members_.insert(e);
}

RelationId RelationGraph::inverse(RelationId relation) const {
  if (!has_inverses_) throw LookupError("graph was built without inverse relations");
  if (relation >= relation_edges_.size()) throw LookupError("relation index out of range");
  return is_inverse(relation) ? relation - static_cast<RelationId>(num_relations_)
                              : relation + static_cast<RelationId>(num_relations_);
}

std::span<const EntityPair> RelationGraph::relation_edges(RelationId relation) const {
  if (relation >= relation_edges_.size()) throw LookupError("relation index out of range");
  return relation_edges_[relation];
}

std::span<const EdgeId> RelationGraph::incoming(EntityId entity) const {
  if (entity >= num_entities_) throw LookupError("entity index out of range");
  return {in_edges_.data() + in_offsets_[entity], in_offsets_[entity + 1] - in_offsets_[entity]};
}

std::span<const EdgeId> RelationGraph::outgoing(EntityId entity) const {
  if (entity >= num_entities_) throw LookupError("entity index out of range");
  return {out_edges_.data() + out_offsets_[entity], out_offsets_[entity + 1] - out_offsets_[entity]};
}

RelationGraph build_graph(const Dataset& dataset, bool include_inverses) {
  return RelationGraph(dataset.num_entities(), dataset.num_relations(), dataset.train, include_inverses);
}

std::vector<double> relation_proportions(const Dataset& dataset) {
  if (dataset.train.empty()) throw ConfigError("train split is empty");
  std::vector<std::size_t> counts(dataset.num_relations(), 0);
  for (const auto& t : dataset.train) ++counts[t.relation];
  std::vector<double> psi(counts.size());
  const auto total = static_cast<double>(dataset.train.size());
  for (std::size_t j = 0; j < counts.size(); ++j) psi[j] = static_cast<double>(counts[j]) / total;
  return psi;
}

CandidateScope parse_scope(std::string_view text) {
  if (text == "train" || text == "train-only") return CandidateScope::TrainOnly;
  if (text == "all" || text == "all-splits") return CandidateScope::AllSplits;
  throw ConfigError("unknown candidate scope '" + std::string(text) + "' (expected train-only or all-splits)");
}

std::string_view to_string(CandidateScope scope) {
  return scope == CandidateScope::TrainOnly ? "train-only" : "all-splits";
}

std::vector<EntityPair> candidate_pairs(const Dataset& dataset, CandidateScope scope) {
  std::vector<EntityPair> pairs;
  auto add = [&](const std::vector<Triplet>& split) {
    for (const auto& t : split) pairs.push_back({t.head, t.tail});
  };
  add(dataset.train);
  if (scope == CandidateScope::AllSplits) {
    add(dataset.valid);
    add(dataset.test);
  }
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  return pairs;
}

std::size_t SimpleGraph::num_edges() const noexcept {
  std::size_t total = 0;
  for (const auto& n : adjacency) total += n.size();
  return total / 2;
}

bool SimpleGraph::adjacent(EntityId a, EntityId b) const {
  const auto& n = adjacency[a];
  return std::binary_search(n.begin(), n.end(), b);
}

SimpleGraph undirected_projection(std::size_t num_entities, std::span<const EntityPair> edges) {
  SimpleGraph g;
  g.adjacency.resize(num_entities);
  for (const auto& e : edges) {
    if (e.head >= num_entities || e.tail >= num_entities) throw LookupError("edge endpoint out of range");
    if (e.head == e.tail) continue;
    g.adjacency[e.head].push_back(e.tail);
    g.adjacency[e.tail].push_back(e.head);
  }
  for (auto& n : g.adjacency) {
    std::sort(n.begin(), n.end());
    n.erase(std::unique(n.begin(), n.end()), n.end());
  }
  return g;
}

TripletSet all_true_triplets(const Dataset& dataset) {
  TripletSet set;
  set.reserve(dataset.train.size() + dataset.valid.size() + dataset.test.size());
  set.insert(dataset.train.begin(), dataset.train.end());
  set.insert(dataset.valid.begin(), dataset.valid.end());
  set.insert(dataset.test.begin(), dataset.test.end());
  return set;
}

}  // namespace kgcf
