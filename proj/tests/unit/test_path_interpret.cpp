#include <cmath>
#include <random>

#include "doctest.h"
#include "kgcf/error.hpp"
#include "kgcf/path_interpret.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace kgcf;

namespace {

double sigmoid_slope(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 - s);
}

// h=0, a=1, b=2, t=3: edges 0:(h,a) 1:(a,t) 2:(h,b) 3:(b,t)
RelationGraph diamond() {
  return RelationGraph(4, 1, std::vector<Triplet>{{0, 0, 1}, {1, 0, 3}, {0, 0, 2}, {2, 0, 3}}, false);
}

}  // namespace

TEST_CASE("best path of weight 0.5") {
  const auto g = diamond();
  const EdgeImportance imp{{0.3, 0.2, 0.1, 0.1}};
  const auto one = top_paths(g, imp, 0, 3, 1, 2);
  REQUIRE(one.size() == 1);
  CHECK(one[0].edges == std::vector<EdgeId>{0, 1});
  CHECK(one[0].weight == doctest::Approx(0.5).epsilon(1e-12));
  const auto two = top_paths(g, imp, 0, 3, 2, 2);
  REQUIRE(two.size() == 2);
  CHECK(two[1].edges == std::vector<EdgeId>{2, 3});
  CHECK(two[1].weight == doctest::Approx(0.2).epsilon(1e-12));
  // too short to reach t
  CHECK(top_paths(g, imp, 0, 3, 1, 1).empty());
}

TEST_CASE("equal weights are ordered by edge sequence") {
  const auto g = diamond();
  const EdgeImportance imp{{0.25, 0.25, 0.25, 0.25}};
  const auto paths = top_paths(g, imp, 0, 3, 2, 2);
  REQUIRE(paths.size() == 2);
  // (0, r, 1) sorts before (0, r, 2)
  CHECK(paths[0].edges == std::vector<EdgeId>{0, 1});
}

TEST_CASE("h equal to t needs a self-loop") {
  const auto g = diamond();
  const EdgeImportance imp{{0.3, 0.2, 0.1, 0.1}};
  CHECK(top_paths(g, imp, 0, 0, 3, 3).empty());

  const RelationGraph loop(2, 1, std::vector<Triplet>{{0, 0, 0}, {0, 0, 1}, {1, 0, 0}}, false);
  const auto paths = top_paths(loop, EdgeImportance{{0.7, 0.1, 0.1}}, 0, 0, 3, 3);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].edges == std::vector<EdgeId>{0});
}

TEST_CASE("search arguments are validated") {
  const auto g = diamond();
  const EdgeImportance imp{{0.3, 0.2, 0.1, 0.1}};
  CHECK_THROWS_AS(top_paths(g, imp, 0, 3, 0, 2), ConfigError);
  CHECK_THROWS_AS(top_paths(g, imp, 0, 3, 5, 2, 4), ConfigError);
  CHECK_THROWS_AS(top_paths(g, EdgeImportance{{0.1}}, 0, 3, 1, 2), ShapeError);
  CHECK_THROWS_AS(top_paths(g, imp, 0, 9, 1, 2), LookupError);
}

TEST_CASE("beam search equals exhaustive enumeration when the beam is wide") {
  Rng rng(derive_seed(1, "paths"));
  std::normal_distribution<double> w(0.0, 1.0);
  std::size_t compared = 0;
  for (int round = 0; round < 60; ++round) {
    const std::size_t n = 6 + round % 5;
    const RelationGraph g(n, 2, testing::random_triplets(n, 2, 0.12, rng), true);
    EdgeImportance imp;
    for (std::size_t i = 0; i < g.num_edges(); ++i) imp.weights.push_back(round % 4 == 0 ? std::round(w(rng)) : w(rng));
    const EntityId h = static_cast<EntityId>(rng() % n), t = static_cast<EntityId>(rng() % n);
    const std::size_t max_len = 1 + round % 3;
    const auto all = testing::enumerate_paths(g, imp, h, t, max_len);
    if (all.size() > 200) continue;
    const std::size_t k = 1 + round % 5;
    const auto got = top_paths(g, imp, h, t, k, max_len, 5000);
    REQUIRE(got.size() == std::min(k, all.size()));
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(got[i].edges == all[i].edges);
      CHECK(got[i].weight == all[i].weight);
      CHECK(std::fabs(got[i].weight - path_weight(imp, got[i].edges)) <= 1e-12);
      // chained from h to t
      EntityId at = h;
      for (EdgeId id : got[i].edges) {
        CHECK(g.edge(id).head == at);
        at = g.edge(id).tail;
      }
      CHECK(at == t);
    }
    ++compared;
  }
  CHECK(compared > 30);
}

TEST_CASE("two-edge chain importance by hand") {
  // 0 -> 1 -> 2, d_f = 1, two layers
  const RelationGraph g(3, 1, std::vector<Triplet>{{0, 0, 1}, {1, 0, 2}}, false);
  const auto ds = make_indexed_dataset(3, 1, {{0, 0, 1}, {1, 0, 2}});
  const auto tr = TreatmentAssignments::compute(g, 2);
  auto params = ModelParams::zeros({2, 1, 1}, 1);
  auto& e = params.encoder;
  e.boundary(0, 0) = 1.0;
  e.relation[0](0, 0) = 2.0;
  e.relation[1](0, 0) = 3.0;
  e.weight[0](0, 0) = 1.0;
  e.weight[1](0, 0) = 1.0;
  e.bias[0][0] = 1.0;
  params.decoder.w1(0, 0) = 1.0;
  params.decoder.w2[0] = 1.0;
  const ScoringModel model{params, g, tr};

  // z1 = relu(agg + 1): z1[1] = 2 g1 + 1 = 3; z2[2] = 3 g2 z1[1] = 9; p = sigmoid(9)
  CHECK(score(model, {0, 0, 2}) == doctest::Approx(1.0 / (1.0 + std::exp(-9.0))).epsilon(1e-14));
  const auto imp = edge_importance(model, {0, 0, 2});
  REQUIRE(imp.weights.size() == 2);
  CHECK(imp.at(0) == doctest::Approx(6.0 * sigmoid_slope(9.0)).epsilon(1e-12));
  CHECK(imp.at(1) == doctest::Approx(9.0 * sigmoid_slope(9.0)).epsilon(1e-12));
  const auto paths = top_paths(g, imp, 0, 2, 1, 2);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].weight == doctest::Approx(15.0 * sigmoid_slope(9.0)).epsilon(1e-12));
}

TEST_CASE("zero decoder and unreachable edges weigh nothing") {
  const auto p = testing::prepare(make_indexed_dataset(6, 1, {{0, 0, 1}, {1, 0, 2}, {3, 0, 4}, {4, 0, 5}}), 2, 4, 1);
  Rng rng(2);
  auto params = ModelParams::initialize({2, 3, 4}, p.graph.num_augmented_relations(), rng);
  const ScoringModel model{params, p.graph, p.treatments};
  const auto imp = edge_importance(model, {0, 0, 2});
  for (EdgeId id = 0; id < p.graph.num_edges(); ++id) {
    if (p.graph.edge(id).head >= 3) CHECK(imp.at(id) == 0.0);
  }

  params.decoder = DecoderParams::zeros(3, 4);
  const ScoringModel flat{params, p.graph, p.treatments};
  for (double w : edge_importance(flat, {0, 0, 2}).weights) CHECK(w == 0.0);
}

TEST_CASE("unit gates reproduce the ungated score bitwise") {
  Rng rng(3);
  for (int round = 0; round < 10; ++round) {
    const auto p = testing::prepare(make_indexed_dataset(8, 2, testing::random_triplets(8, 2, 0.15, rng)), 2, 4, 1);
    const auto params = ModelParams::initialize({3, 4, 5}, p.graph.num_augmented_relations(), rng);
    const ScoringModel model{params, p.graph, p.treatments};
    const Triplet q{static_cast<EntityId>(round % 8), static_cast<RelationId>(round % 4), 3};
    CHECK(gated_score(model, q, unit_gates(3, p.graph.num_edges())) == score(model, q));
  }
}

TEST_CASE("importance equals the summed gate derivatives when biases vanish") {
  Rng rng(4);
  for (int round = 0; round < 8; ++round) {
    const auto p = testing::prepare(make_indexed_dataset(7, 2, testing::random_triplets(7, 2, 0.15, rng)), 2, 4, 1);
    auto params = ModelParams::initialize({2, 3, 4}, p.graph.num_augmented_relations(), rng);
    for (auto& b : params.encoder.bias) {
      for (auto& x : b) x = 0.0;
    }
    const ScoringModel model{params, p.graph, p.treatments};
    const Triplet q{static_cast<EntityId>(round % 7), static_cast<RelationId>(round % 4), 6};
    const auto imp = edge_importance(model, q);
    const double h = 1e-6;
    std::vector<double> numeric;
    for (EdgeId id = 0; id < p.graph.num_edges(); ++id) {
      double sum = 0.0;
      for (std::size_t l = 0; l < 2; ++l) {
        auto up = unit_gates(2, p.graph.num_edges()), down = up;
        up[l][id] += h;
        down[l][id] -= h;
        sum += (gated_score(model, q, up) - gated_score(model, q, down)) / (2.0 * h);
      }
      numeric.push_back(sum);
    }
    CHECK(testing::gradient_mismatches(imp.weights, numeric, 1e-5, 1e-8) == 0);
  }
}

TEST_CASE("report formatting") {
  const auto p = testing::prepare(testing::compositional_kg(1, 12), 2, 8, 1);
  const auto params = ModelParams::zeros({2, 4, 4}, p.graph.num_augmented_relations());
  const ScoringModel model{params, p.graph, p.treatments};
  const auto& first = p.dataset.train.front();
  const RelationId inv = p.graph.inverse(first.relation);
  const auto text = format_triplet(p.dataset, p.graph, {first.tail, inv, first.head});
  CHECK(text == "(" + p.dataset.entities.name(first.tail) + ", " + p.dataset.relations.name(first.relation) +
                    "^-1, " + p.dataset.entities.name(first.head) + ")");

  const CounterfactualRecord* rec = nullptr;
  for (const auto& r : p.table.originals()) {
    if (r.matched()) {
      rec = &r;
      break;
    }
  }
  REQUIRE(rec != nullptr);
  const auto q = rec->triplet;
  const auto imp = edge_importance(model, q);
  const auto paths = top_paths(p.graph, imp, q.head, q.tail, 3, 2);
  const auto report = format_report(p.dataset, model, p.table, q, score(model, q), paths);
  CHECK(report.rfind("query\t" + format_triplet(p.dataset, p.graph, q), 0) == 0);
  CHECK(report.find("SoCR\t") != std::string::npos);
  CHECK(report.find("score\t0.5") != std::string::npos);
}
