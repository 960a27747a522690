#include "kgcf/path_interpret.hpp"

#include <algorithm>
#include <cstdio>
#include <deque>
#include <limits>
#include <sstream>

#include "kgcf/error.hpp"

namespace kgcf {

double gated_score(const ScoringModel& model, const Triplet& query, const EdgeGates& gates) {
  const auto tape =
      encode_with_tape(query.head, query.relation, model.params.encoder, model.graph, model.options, &gates);
  return decode(tape.output().row(query.tail), model.input_treatment(query.head, query.relation, query.tail),
                model.params.decoder)
      .probability;
}

namespace {

std::vector<std::size_t> hop_distance(const RelationGraph& graph, EntityId source) {
  constexpr auto unreached = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist(graph.num_entities(), unreached);
  std::deque<EntityId> queue{source};
  dist[source] = 0;
  while (!queue.empty()) {
    const EntityId u = queue.front();
    queue.pop_front();
    for (EdgeId id : graph.outgoing(u)) {
      const EntityId v = graph.edge(id).tail;
      if (dist[v] != unreached) continue;
      dist[v] = dist[u] + 1;
      queue.push_back(v);
    }
  }
  return dist;
}

}  // namespace

EdgeImportance edge_importance(const ScoringModel& model, const Triplet& query) {
  if (query.head >= model.graph.num_entities() || query.tail >= model.graph.num_entities()) {
    throw LookupError("interpret: entity index out of range");
  }
  const auto& params = model.params;
  const auto gates = unit_gates(params.encoder.layers, model.graph.num_edges());
  const auto tape =
      encode_with_tape(query.head, query.relation, params.encoder, model.graph, model.options, &gates);
  const auto z = tape.output().row(query.tail);
  const auto bit = model.input_treatment(query.head, query.relation, query.tail);
  const auto dec = decode(z, bit, params.decoder);

  auto grads = params.zeros_like();
  Matrix d_output(model.graph.num_entities(), params.encoder.dim);
  decode_backward(z, bit, dec, dec.probability * (1.0 - dec.probability), {}, params.decoder, grads.decoder,
                  d_output.row(query.tail));
  EdgeGates gate_grads(params.encoder.layers, std::vector<double>(model.graph.num_edges(), 0.0));
  encoder_backward(tape, params.encoder, model.graph, d_output, grads.encoder, model.options, &gates, &gate_grads);

  const auto dist = hop_distance(model.graph, query.head);
  EdgeImportance out;
  out.weights.assign(model.graph.num_edges(), 0.0);
  for (std::size_t l = 0; l < params.encoder.layers; ++l) {
    for (EdgeId id = 0; id < model.graph.num_edges(); ++id) {
      if (dist[model.graph.edge(id).head] <= l) out.weights[id] += gate_grads[l][id];
    }
  }
  return out;
}

double path_weight(const EdgeImportance& importance, const std::vector<EdgeId>& edges) {
  double w = 0.0;
  for (EdgeId id : edges) w += importance.at(id);
  return w;
}

bool path_before(const RelationGraph& graph, const PathInterpretation& a, const PathInterpretation& b) {
  if (a.weight != b.weight) return a.weight > b.weight;
  return std::lexicographical_compare(a.edges.begin(), a.edges.end(), b.edges.begin(), b.edges.end(),
                                      [&](EdgeId x, EdgeId y) { return graph.edge(x) < graph.edge(y); });
}

std::vector<PathInterpretation> top_paths(const RelationGraph& graph, const EdgeImportance& importance, EntityId head,
                                          EntityId tail, std::size_t k, std::size_t max_len, std::size_t beam) {
  if (k < 1) throw ConfigError("top_paths: k must be >= 1");
  if (beam < k) throw ConfigError("top_paths: beam width must be >= k");
  if (importance.weights.size() != graph.num_edges()) throw ShapeError("top_paths: importance does not match graph");
  if (head >= graph.num_entities() || tail >= graph.num_entities()) throw LookupError("top_paths: entity out of range");

  struct Partial {
    PathInterpretation path;
    std::vector<EntityId> visited;  // sorted
    EntityId end;
  };
  const auto before = [&](const Partial& a, const Partial& b) { return path_before(graph, a.path, b.path); };

  std::vector<PathInterpretation> done;
  std::vector<Partial> frontier{{{}, {head}, head}};
  for (std::size_t depth = 0; depth < max_len && !frontier.empty(); ++depth) {
    std::vector<Partial> next;
    for (const auto& p : frontier) {
      for (EdgeId id : graph.outgoing(p.end)) {
        const EntityId v = graph.edge(id).tail;
        const bool seen = std::binary_search(p.visited.begin(), p.visited.end(), v);
        const bool self_loop_query = v == p.end && p.path.edges.empty() && v == tail;
        if (seen && !self_loop_query) continue;
        PathInterpretation path = p.path;
        path.edges.push_back(id);
        path.weight += importance.at(id);
        if (v == tail) {
          done.push_back(std::move(path));
          continue;
        }
        auto visited = p.visited;
        visited.insert(std::upper_bound(visited.begin(), visited.end(), v), v);
        next.push_back({std::move(path), std::move(visited), v});
      }
    }
    std::sort(next.begin(), next.end(), before);
    if (next.size() > beam) next.resize(beam);
    frontier = std::move(next);
  }
  std::sort(done.begin(), done.end(), [&](const auto& a, const auto& b) { return path_before(graph, a, b); });
  if (done.size() > k) done.resize(k);
  return done;
}

std::string format_triplet(const Dataset& dataset, const RelationGraph& graph, const Triplet& t) {
  std::string rel = dataset.relations.name(graph.original(t.relation));
  if (graph.is_inverse(t.relation)) rel += "^-1";
  return "(" + dataset.entities.name(t.head) + ", " + rel + ", " + dataset.entities.name(t.tail) + ")";
}

namespace {

std::string treatment_pair(const ScoringModel& model, const TreatmentTable& table, const Triplet& t) {
  const auto tf = model.treatments.factual(t.head, t.relation, t.tail);
  std::string out = std::to_string(static_cast<int>(tf.value)) + "/";
  if (const auto* rec = table.find(t)) {
    out += std::to_string(static_cast<int>(rec->t_counterfactual.value));
  } else {
    out += "-";
  }
  return out;
}

std::string format_weight(double w) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", w);
  return buf;
}

}  // namespace

std::string format_report(const Dataset& dataset, const ScoringModel& model, const TreatmentTable& table,
                          const Triplet& query, double score, const std::vector<PathInterpretation>& paths) {
  std::ostringstream out;
  const auto& graph = model.graph;
  const auto* rec = table.find(query);
  out << "query\t" << format_triplet(dataset, graph, query) << "\tT^F/T^CF=" << treatment_pair(model, table, query);
  if (rec) out << "\tA^CF=" << static_cast<int>(rec->a_counterfactual);
  out << '\n';
  if (rec && rec->matched()) {
    const Triplet sub{rec->substitute->head, query.relation, rec->substitute->tail};
    out << "SoCR\t" << format_triplet(dataset, graph, sub) << '\n';
  }
  out << "score\t" << format_weight(score) << '\n';
  for (const auto& p : paths) {
    out << format_weight(p.weight) << '\t';
    std::string bits;
    for (std::size_t i = 0; i < p.edges.size(); ++i) {
      const auto& e = graph.edge(p.edges[i]);
      if (i > 0) {
        out << " \xE2\x88\xA7 ";
        bits += ' ';
      }
      out << format_triplet(dataset, graph, e);
      bits += treatment_pair(model, table, e);
    }
    out << "\tT^F/T^CF=" << bits << '\n';
  }
  return out.str();
}

}  // namespace kgcf
