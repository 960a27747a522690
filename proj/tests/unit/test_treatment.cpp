#include <bit>
#include <random>
#include <sstream>

#include "doctest.h"
#include "kgcf/error.hpp"
#include "kgcf/treatment.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace kgcf;

namespace {

// a=0, b=1, c=2, d=3
const std::vector<EntityPair> kTrianglePendant{{0, 1}, {1, 2}, {2, 0}, {2, 3}};

std::vector<EntityId> survivors(const KCore& core) {
  std::vector<EntityId> out;
  for (EntityId v = 0; v < core.survives.size(); ++v) {
    if (core.survives[v]) out.push_back(v);
  }
  return out;
}

}  // namespace

TEST_CASE("triangle survives, pendant is peeled") {
  const auto core = kcore_surviving(undirected_projection(4, kTrianglePendant), 2);
  CHECK(survivors(core) == std::vector<EntityId>{0, 1, 2});
  CHECK(core.subgraph.num_edges() == 3);
}

TEST_CASE("single edge has an empty 2-core") {
  const std::vector<EntityPair> edges{{0, 1}};
  CHECK(kcore_surviving(undirected_projection(2, edges), 2).num_survivors() == 0);
}

TEST_CASE("k below one is rejected") {
  CHECK_THROWS_AS(kcore_surviving(undirected_projection(2, std::vector<EntityPair>{{0, 1}}), 0), ConfigError);
}

TEST_CASE("k-core is the maximal qualifying subset on n=20 graphs") {
  Rng rng(derive_seed(5, "kcore-maximality"));
  for (int round = 0; round < 6; ++round) {
    const std::size_t n = 20;
    const int k = 2 + round % 2;
    const auto edges = testing::random_graph(n, 0.12 + 0.02 * round, rng);
    std::vector<std::uint32_t> adj(n, 0);
    for (const auto& e : edges) {
      adj[e.head] |= 1u << e.tail;
      adj[e.tail] |= 1u << e.head;
    }
    const auto core = kcore_surviving(undirected_projection(n, edges), k);
    std::uint32_t result = 0;
    for (EntityId v = 0; v < n; ++v) result |= core.survives[v] ? (1u << v) : 0u;
    bool ok = true;
    for (std::uint32_t s = 1; s < (1u << n) && ok; ++s) {
      bool qualifies = true;
      for (std::uint32_t rest = s; rest != 0 && qualifies; rest &= rest - 1) {
        const int v = std::countr_zero(rest);
        qualifies = std::popcount(adj[v] & s) >= k;
      }
      if (qualifies && (s & ~result) != 0) ok = false;
    }
    CHECK(ok);
    // the result itself qualifies
    for (EntityId v = 0; v < n; ++v) {
      if (core.survives[v]) CHECK(std::popcount(adj[v] & result) >= k);
    }
  }
}

TEST_CASE("peeling is monotone in k") {
  Rng rng(21);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = 30;
    const auto edges = testing::random_graph(n, 0.15, rng);
    const auto g = undirected_projection(n, edges);
    for (int k = 1; k < 5; ++k) {
      const auto lo = kcore_surviving(g, k);
      const auto hi = kcore_surviving(g, k + 1);
      for (EntityId v = 0; v < n; ++v) CHECK((!hi.survives[v] || lo.survives[v]));
    }
  }
}

TEST_CASE("cluster labels") {
  SUBCASE("one surviving triangle and a pendant") {
    const auto c = cluster(kcore_surviving(undirected_projection(4, kTrianglePendant), 2), 0, 2);
    CHECK(c.labels == std::vector<std::uint32_t>{0, 0, 0, 1});
    CHECK(c.num_components == 1);
  }
  SUBCASE("two disjoint triangles") {
    const std::vector<EntityPair> edges{{0, 1}, {1, 2}, {2, 0}, {3, 4}, {4, 5}, {5, 3}};
    const auto c = cluster(kcore_surviving(undirected_projection(6, edges), 2), 0, 2);
    CHECK(c.num_components == 2);
    CHECK(c.labels == std::vector<std::uint32_t>{0, 0, 0, 1, 1, 1});
  }
  SUBCASE("empty core gives singletons") {
    const auto c = cluster(kcore_surviving(undirected_projection(3, std::vector<EntityPair>{}), 2), 0, 2);
    CHECK(c.labels == std::vector<std::uint32_t>{0, 1, 2});
  }
}

TEST_CASE("labels agree with a component oracle") {
  Rng rng(8);
  for (int round = 0; round < 40; ++round) {
    const std::size_t n = 25;
    const auto edges = testing::random_graph(n, 0.1, rng);
    const auto core = kcore_surviving(undirected_projection(n, edges), 2);
    const auto c = cluster(core, 0, 2);
    const auto comp = testing::brute_force_components(n, edges, core.survives);
    for (EntityId a = 0; a < n; ++a) {
      for (EntityId b = 0; b < n; ++b) {
        const bool same = core.survives[a] && core.survives[b] && comp[a] == comp[b];
        CHECK((c.labels[a] == c.labels[b]) == (same || a == b));
      }
    }
  }
}

TEST_CASE("factual treatment on the triangle-plus-pendant relation") {
  const auto ds = make_indexed_dataset(5, 1, {{0, 0, 1}, {1, 0, 2}, {2, 0, 0}, {2, 0, 3}});
  const auto g = build_graph(ds, true);
  const auto tr = TreatmentAssignments::compute(g, 2);
  CHECK(tr.factual(0, 0, 1) == kTreated);
  CHECK(tr.factual(0, 0, 3) == kUntreated);
  CHECK(tr.factual(3, 0, 4) == kUntreated);
  CHECK(tr.factual(1, 1, 0) == kTreated);  // inverse relation resolves to the original
  CHECK_THROWS_AS(tr.factual(0, 2, 1), LookupError);
}

TEST_CASE("treatment is symmetric") {
  Rng rng(13);
  const auto train = testing::random_triplets(20, 3, 0.05, rng);
  const auto g = build_graph(make_indexed_dataset(20, 3, train), true);
  const auto tr = TreatmentAssignments::compute(g, 2);
  for (EntityId h = 0; h < 20; ++h) {
    for (EntityId t = 0; t < 20; ++t) {
      for (RelationId r = 0; r < 6; ++r) CHECK(tr.factual(h, r, t) == tr.factual(t, r, h));
    }
  }
}

TEST_CASE("assignments round-trip through tsv") {
  Rng rng(2);
  const auto ds = make_indexed_dataset(15, 2, testing::random_triplets(15, 2, 0.1, rng));
  const auto tr = TreatmentAssignments::compute(build_graph(ds, true), 2);
  std::stringstream buf;
  tr.write_tsv(buf, ds);
  CHECK(buf.str().rfind("# k=2 entities=15 relations=2\n", 0) == 0);
  const auto back = TreatmentAssignments::read_tsv(buf, ds, "mem");
  CHECK(back == tr);

  std::istringstream bad("# k=2 entities=3 relations=2\n");
  CHECK_THROWS_AS(TreatmentAssignments::read_tsv(bad, ds, "mem"), ConfigError);
}
