#include "kgcf/cf_matcher.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

#include "json.hpp"
#include "kgcf/error.hpp"
#include "kgcf/parallel.hpp"

namespace kgcf {

namespace {

double row_distance(const Matrix& m, EntityId x, EntityId y) {
  const auto a = m.row(x);
  const auto b = m.row(y);
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    sum += d * d;
  }
  return std::sqrt(sum);
}

struct Nearest {
  double distance = std::numeric_limits<double>::infinity();
  std::optional<EntityPair> pair;

  void offer(double d, EntityPair p) {
    if (!pair || d < distance || (d == distance && p < *pair)) {
      distance = d;
      pair = p;
    }
  }
};

}  // namespace

double pair_distance(const Matrix& embedding, EntityId i, EntityId a, EntityId k, EntityId b) {
  const auto n = embedding.rows();
  if (i >= n || a >= n || k >= n || b >= n) throw LookupError("pair_distance: entity index out of range");
  return row_distance(embedding, i, a) + row_distance(embedding, k, b);
}

std::optional<EntityPair> find_substitute(EntityPair query, TreatmentBit query_treatment,
                                          std::span<const EntityPair> candidates, const Matrix& embedding,
                                          const TreatmentLookup& treatment_of) {
  const TreatmentBit wanted = query_treatment.flipped();
  Nearest best;
  for (const auto& c : candidates) {
    if (c == query) continue;
    if (treatment_of(c.head, c.tail) != wanted) continue;
    best.offer(pair_distance(embedding, query.head, c.head, query.tail, c.tail), c);
  }
  return best.pair;
}

std::optional<EntityPair> find_substitute(const Triplet& query, std::span<const EntityPair> candidates,
                                          const Matrix& embedding, const TreatmentAssignments& assignments) {
  const auto tf = assignments.factual(query.head, query.relation, query.tail);
  return find_substitute({query.head, query.tail}, tf, candidates, embedding,
                         [&](EntityId h, EntityId t) { return assignments.factual(h, query.relation, t); });
}

TreatmentTable::TreatmentTable(std::vector<CounterfactualRecord> originals, std::size_t num_relations)
    : records_(std::move(originals)), num_originals_(records_.size()), num_relations_(num_relations) {
  records_.reserve(2 * num_originals_);
  for (std::size_t i = 0; i < num_originals_; ++i) {
    const auto& rec = records_[i];
    if (rec.triplet.relation >= num_relations_) throw LookupError("record relation out of range");
    CounterfactualRecord mirror = rec;
    mirror.triplet = {rec.triplet.tail, static_cast<RelationId>(rec.triplet.relation + num_relations_),
                      rec.triplet.head};
    if (rec.substitute) mirror.substitute = EntityPair{rec.substitute->tail, rec.substitute->head};
    records_.push_back(mirror);
  }
  index_.reserve(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i) index_.emplace(records_[i].triplet, i);
}

const CounterfactualRecord* TreatmentTable::find(const Triplet& t) const {
  auto it = index_.find(t);
  return it == index_.end() ? nullptr : &records_[it->second];
}

double TreatmentTable::matched_fraction() const {
  if (num_originals_ == 0) return 0.0;
  std::size_t matched = 0;
  for (const auto& r : originals()) matched += r.matched() ? 1 : 0;
  return static_cast<double>(matched) / static_cast<double>(num_originals_);
}

void TreatmentTable::write_jsonl(std::ostream& out) const {
  for (const auto& r : originals()) {
    nlohmann::ordered_json obj;
    obj["h"] = r.triplet.head;
    obj["r"] = r.triplet.relation;
    obj["t"] = r.triplet.tail;
    obj["tf"] = r.t_factual.value;
    obj["tcf"] = r.t_counterfactual.value;
    obj["acf"] = r.a_counterfactual;
    obj["sub_h"] = r.substitute ? nlohmann::ordered_json(r.substitute->head) : nlohmann::ordered_json(nullptr);
    obj["sub_t"] = r.substitute ? nlohmann::ordered_json(r.substitute->tail) : nlohmann::ordered_json(nullptr);
    out << obj.dump() << '\n';
  }
}

TreatmentTable TreatmentTable::read_jsonl(std::istream& in, std::size_t num_relations, const std::string& source) {
  std::vector<CounterfactualRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      CounterfactualRecord r;
      r.triplet = {obj.at("h").get<EntityId>(), obj.at("r").get<RelationId>(), obj.at("t").get<EntityId>()};
      r.t_factual = {obj.at("tf").get<std::uint8_t>()};
      r.t_counterfactual = {obj.at("tcf").get<std::uint8_t>()};
      r.a_counterfactual = obj.at("acf").get<std::uint8_t>();
      if (!obj.at("sub_h").is_null()) {
        r.substitute = EntityPair{obj.at("sub_h").get<EntityId>(), obj.at("sub_t").get<EntityId>()};
      }
      records.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return TreatmentTable(std::move(records), num_relations);
}

TreatmentTable build_table(const Dataset& dataset, const Matrix& embedding, const TreatmentAssignments& assignments,
                           std::span<const EntityPair> candidates) {
  if (embedding.rows() != dataset.num_entities()) {
    throw ShapeError("embedding rows (" + std::to_string(embedding.rows()) + ") differ from entity count (" +
                     std::to_string(dataset.num_entities()) + ")");
  }
  const TripletSet train_facts(dataset.train.begin(), dataset.train.end());
  const std::size_t relations = dataset.num_relations();
  std::vector<std::vector<std::size_t>> by_relation(relations);
  for (std::size_t i = 0; i < dataset.train.size(); ++i) by_relation[dataset.train[i].relation].push_back(i);

  std::vector<CounterfactualRecord> records(dataset.train.size());
  for (std::size_t j = 0; j < relations; ++j) {
    if (by_relation[j].empty()) continue;
    const auto rel = static_cast<RelationId>(j);
    // Candidates split once per relation by their treatment under that relation.
    std::vector<EntityPair> split[2];
    for (const auto& c : candidates) split[assignments.factual(c.head, rel, c.tail).value].push_back(c);

    const auto& members = by_relation[j];
    parallel_for(members.size(), [&](std::size_t m) {
      const Triplet& t = dataset.train[members[m]];
      CounterfactualRecord rec;
      rec.triplet = t;
      rec.t_factual = assignments.factual(t.head, rel, t.tail);
      const EntityPair query{t.head, t.tail};
      Nearest best;
      for (const auto& c : split[rec.t_factual.flipped().value]) {
        if (c == query) continue;
        best.offer(pair_distance(embedding, t.head, c.head, t.tail, c.tail), c);
      }
      if (best.pair) {
        rec.substitute = best.pair;
        rec.t_counterfactual = rec.t_factual.flipped();
        rec.a_counterfactual = train_facts.contains({best.pair->head, rel, best.pair->tail}) ? 1 : 0;
      } else {
        rec.t_counterfactual = rec.t_factual;
        rec.a_counterfactual = 1;
      }
      records[members[m]] = rec;
    });
  }
  return TreatmentTable(std::move(records), relations);
}

}  // namespace kgcf
