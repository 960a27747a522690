#include "kgcf/eval_rank.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "kgcf/error.hpp"
#include "kgcf/parallel.hpp"

namespace kgcf {

TreatmentBit ScoringModel::input_treatment(EntityId head, RelationId relation, EntityId tail) const {
  const auto bit = treatments.factual(head, relation, tail);
  return treatment_input ? bit : kUntreated;
}

namespace {

void check_triplet(const ScoringModel& model, const Triplet& t) {
  if (t.head >= model.graph.num_entities() || t.tail >= model.graph.num_entities()) {
    throw LookupError("entity index out of range");
  }
  if (t.relation >= model.graph.num_augmented_relations()) throw LookupError("relation index out of range");
}

}  // namespace

double score(const ScoringModel& model, const Triplet& triplet) {
  check_triplet(model, triplet);
  const auto field = encode(triplet.head, triplet.relation, model.params.encoder, model.graph, model.options);
  return decode(field.row(triplet.tail), model.input_treatment(triplet.head, triplet.relation, triplet.tail),
                model.params.decoder)
      .probability;
}

double score_head(const ScoringModel& model, const Triplet& triplet) {
  check_triplet(model, triplet);
  return score(model, {triplet.tail, model.graph.inverse(triplet.relation), triplet.head});
}

std::vector<double> score_all_tails(const ScoringModel& model, EntityId head, RelationId relation) {
  check_triplet(model, {head, relation, head});
  const auto field = encode(head, relation, model.params.encoder, model.graph, model.options);
  std::vector<double> scores(field.rows());
  for (EntityId e = 0; e < field.rows(); ++e) {
    scores[e] = decode(field.row(e), model.input_treatment(head, relation, e), model.params.decoder).probability;
  }
  return scores;
}

double filtered_rank_from_scores(std::span<const double> scores, EntityId answer,
                                 const std::function<bool(EntityId)>& is_filtered) {
  const double target = scores[answer];
  double greater = 0.0;
  double equal = 0.0;
  for (EntityId e = 0; e < scores.size(); ++e) {
    if (e == answer || is_filtered(e)) continue;
    if (scores[e] > target) {
      greater += 1.0;
    } else if (scores[e] == target) {
      equal += 1.0;
    }
  }
  return 1.0 + greater + 0.5 * equal;
}

double filtered_rank(const ScoringModel& model, const Triplet& triplet, Direction direction,
                     const TripletSet& filter) {
  check_triplet(model, triplet);
  if (direction == Direction::Tail) {
    const auto scores = score_all_tails(model, triplet.head, triplet.relation);
    return filtered_rank_from_scores(scores, triplet.tail, [&](EntityId e) {
      return filter.contains({triplet.head, triplet.relation, e});
    });
  }
  const auto scores = score_all_tails(model, triplet.tail, model.graph.inverse(triplet.relation));
  return filtered_rank_from_scores(scores, triplet.head, [&](EntityId e) {
    return filter.contains({e, triplet.relation, triplet.tail});
  });
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["split"] = split;
  doc["mrr"] = mrr;
  doc["mr"] = mr;
  doc["hits_1"] = hits_1;
  doc["hits_3"] = hits_3;
  doc["hits_10"] = hits_10;
  doc["n_queries"] = n_queries;
  return doc.dump(2);
}

std::vector<RankResult> rank_split(const ScoringModel& model, std::span<const Triplet> split,
                                   const TripletSet& filter) {
  std::vector<RankResult> out(split.size());
  parallel_for(split.size(), [&](std::size_t i) {
    out[i].triplet = split[i];
    out[i].rank_head = filtered_rank(model, split[i], Direction::Head, filter);
    out[i].rank_tail = filtered_rank(model, split[i], Direction::Tail, filter);
  });
  return out;
}

MetricsReport metrics_from_ranks(std::span<const RankResult> ranks, std::string split) {
  if (ranks.empty()) throw StatisticError("metrics are undefined on an empty split");
  MetricsReport report;
  report.split = std::move(split);
  double rr = 0.0, r = 0.0, h1 = 0.0, h3 = 0.0, h10 = 0.0;
  for (const auto& q : ranks) {
    for (double rank : {q.rank_head, q.rank_tail}) {
      rr += 1.0 / rank;
      r += rank;
      h1 += rank <= 1.0 ? 1.0 : 0.0;
      h3 += rank <= 3.0 ? 1.0 : 0.0;
      h10 += rank <= 10.0 ? 1.0 : 0.0;
    }
  }
  const double n = 2.0 * static_cast<double>(ranks.size());
  report.mrr = rr / n;
  report.mr = r / n;
  report.hits_1 = h1 / n;
  report.hits_3 = h3 / n;
  report.hits_10 = h10 / n;
  report.n_queries = 2 * ranks.size();
  return report;
}

MetricsReport evaluate(const ScoringModel& model, std::span<const Triplet> split, const TripletSet& filter,
                       std::string split_name) {
  if (split.empty()) throw StatisticError("cannot evaluate an empty split");
  return metrics_from_ranks(rank_split(model, split, filter), std::move(split_name));
}

std::vector<double> reciprocal_ranks(std::span<const RankResult> ranks) {
  std::vector<double> out;
  out.reserve(2 * ranks.size());
  for (const auto& q : ranks) {
    out.push_back(1.0 / q.rank_head);
    out.push_back(1.0 / q.rank_tail);
  }
  return out;
}

void write_ranks(std::ostream& out, std::span<const RankResult> ranks) {
  for (const auto& q : ranks) {
    nlohmann::ordered_json obj;
    obj["h"] = q.triplet.head;
    obj["r"] = q.triplet.relation;
    obj["t"] = q.triplet.tail;
    obj["rank_head"] = q.rank_head;
    obj["rank_tail"] = q.rank_tail;
    out << obj.dump() << '\n';
  }
}

std::vector<RankResult> read_ranks(std::istream& in, const std::string& source) {
  std::vector<RankResult> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto obj = nlohmann::json::parse(line);
      out.push_back({{obj.at("h").get<EntityId>(), obj.at("r").get<RelationId>(), obj.at("t").get<EntityId>()},
                     obj.at("rank_head").get<double>(),
                     obj.at("rank_tail").get<double>()});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(source, line_no, e.what());
    }
  }
  return out;
}

TTestResult significance_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ShapeError("paired t-test needs lists of equal length");
  if (a.size() < 2) throw StatisticError("paired t-test needs at least two pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  bool all_zero = true;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    all_zero = all_zero && d == 0.0;
    ss += (d - mean) * (d - mean);
  }
  TTestResult result;
  result.degrees_of_freedom = a.size() - 1;
  if (all_zero) return result;
  if (ss == 0.0) throw StatisticError("paired t-test is degenerate: differences have zero variance");
  const double sd = std::sqrt(ss / (n - 1.0));
  result.t = mean / (sd / std::sqrt(n));
  const boost::math::students_t dist(n - 1.0);
  result.p_value = 2.0 * boost::math::cdf(boost::math::complement(dist, std::fabs(result.t)));
  return result;
}

}  // namespace kgcf
