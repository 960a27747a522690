#include <cmath>
#include <random>
#include <sstream>

#include "doctest.h"
#include "kgcf/cf_embedding.hpp"
#include "kgcf/error.hpp"
#include "support/synthetic.hpp"

using namespace kgcf;

namespace {

double dist(const Matrix& m, EntityId a, EntityId b) {
  double s = 0.0;
  for (std::size_t k = 0; k < m.cols(); ++k) s += (m(a, k) - m(b, k)) * (m(a, k) - m(b, k));
  return std::sqrt(s);
}

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  Matrix m(rows, cols);
  for (auto& x : m.values()) x = u(rng);
  return m;
}

}  // namespace

TEST_CASE("empty view embeds to zeros") {
  const auto view = undirected_projection(4, std::vector<EntityPair>{});
  const auto m = embed_relation(view, 2, WalkParams{});
  CHECK(m.rows() == 4);
  CHECK(m.cols() == 2);
  CHECK(m == Matrix(4, 2));
}

TEST_CASE("same seed gives identical matrices") {
  Rng rng(4);
  const auto view = undirected_projection(30, testing::random_graph(30, 0.1, rng));
  WalkParams p;
  p.seed = 99;
  p.return_p = 0.5;
  p.inout_q = 2.0;
  const auto a = embed_relation(view, 8, p);
  const auto b = embed_relation(view, 8, p);
  CHECK(a == b);
  p.seed = 100;
  CHECK_FALSE(embed_relation(view, 8, p) == a);
}

TEST_CASE("path a-b-c puts a closer to b than to c in most seeds" * doctest::may_fail()) {
  const std::vector<EntityPair> path{{0, 1}, {1, 2}};
  const auto view = undirected_projection(3, path);
  int closer = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    WalkParams p;
    p.seed = seed;
    const auto m = embed_relation(view, 8, p);
    closer += dist(m, 0, 1) < dist(m, 0, 2);
  }
  MESSAGE("closer in " << closer << " of 100 seeds");
  CHECK(closer >= 90);
}

TEST_CASE("a and c share every context on the path and end up nearly equal") {
  const auto view = undirected_projection(3, std::vector<EntityPair>{{0, 1}, {1, 2}});
  int equivalent = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    WalkParams p;
    p.seed = seed;
    const auto m = embed_relation(view, 8, p);
    equivalent += dist(m, 0, 2) < dist(m, 0, 1);
  }
  CHECK(equivalent >= 18);
}

TEST_CASE("entities in the same clique are closer than across cliques") {
  // two disjoint 5-cliques
  std::vector<EntityPair> edges;
  for (EntityId base : {0u, 5u}) {
    for (EntityId a = 0; a < 5; ++a) {
      for (EntityId b = a + 1; b < 5; ++b) edges.push_back({base + a, base + b});
    }
  }
  const auto view = undirected_projection(10, edges);
  int ok = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    WalkParams p;
    p.seed = seed;
    const auto m = embed_relation(view, 8, p);
    double within = 0.0, across = 0.0;
    for (EntityId a = 0; a < 10; ++a) {
      for (EntityId b = a + 1; b < 10; ++b) ((a < 5) == (b < 5) ? within : across) += dist(m, a, b);
    }
    ok += within / 20.0 < across / 25.0;
  }
  CHECK(ok >= 18);
}

TEST_CASE("isolated entities keep zero rows") {
  const std::vector<Triplet> train{{0, 0, 1}, {1, 0, 2}, {2, 0, 0}, {0, 1, 2}};
  const RelationGraph g(5, 2, train, false);
  const auto m = build_weighted_embedding(g, std::vector<double>{0.75, 0.25}, 4, WalkParams{});
  for (EntityId e : {3u, 4u}) {
    for (double x : m.row(e)) CHECK(x == 0.0);
  }
  bool any = false;
  for (double x : m.row(0)) any = any || x != 0.0;
  CHECK(any);
}

TEST_CASE("walks start from every non-isolated vertex and follow edges") {
  Rng rng(5);
  const auto view = undirected_projection(12, testing::random_graph(12, 0.2, rng));
  WalkParams p;
  p.walks_per_node = 3;
  p.walk_length = 7;
  p.return_p = 4.0;
  p.inout_q = 0.25;
  const auto walks = generate_walks(view, p);
  std::vector<int> starts(12, 0);
  for (const auto& w : walks) {
    REQUIRE_FALSE(w.empty());
    ++starts[w.front()];
    CHECK(w.size() <= 7);
    for (std::size_t i = 1; i < w.size(); ++i) CHECK(view.adjacent(w[i - 1], w[i]));
  }
  for (EntityId v = 0; v < 12; ++v) CHECK(starts[v] == (view.degree(v) > 0 ? 3 : 0));
}

TEST_CASE("walk parameters are validated") {
  WalkParams p;
  p.window = 0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = WalkParams{};
  p.inout_q = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_THROWS_AS(embed_relation(undirected_projection(2, std::vector<EntityPair>{}), 0, WalkParams{}), ConfigError);
}

TEST_CASE("combine examples") {
  const Matrix ones(3, 2, 1.0), zeros(3, 2, 0.0), fours(3, 2, 4.0), eights(3, 2, 8.0);
  CHECK(combine(std::vector<Matrix>{fours}, std::vector<double>{1.0}) == fours);
  CHECK(combine(std::vector<Matrix>{ones, zeros}, std::vector<double>{0.5, 0.5}) == Matrix(3, 2, 0.5));
  CHECK(combine(std::vector<Matrix>{fours, eights}, std::vector<double>{0.75, 0.25}) == Matrix(3, 2, 5.0));
}

TEST_CASE("combine rejects mismatched shapes") {
  CHECK_THROWS_AS(combine(std::vector<Matrix>{Matrix(3, 2), Matrix(3, 3)}, std::vector<double>{0.5, 0.5}),
                  ShapeError);
  CHECK_THROWS_AS(combine(std::vector<Matrix>{Matrix(3, 2)}, std::vector<double>{0.5, 0.5}), ShapeError);
}

TEST_CASE("combine is linear in the inputs") {
  Rng rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int round = 0; round < 50; ++round) {
    const std::size_t n = 1 + round % 4;
    std::vector<Matrix> ms, scaled;
    std::vector<double> psi;
    const double c = u(rng) * 10.0 - 5.0;
    for (std::size_t j = 0; j < n; ++j) {
      ms.push_back(random_matrix(6, 3, rng));
      psi.push_back(u(rng));
      scaled.push_back(ms.back());
      for (auto& x : scaled.back().values()) x *= c;
    }
    const auto lhs = combine(scaled, psi);
    const auto rhs = combine(ms, psi);
    for (std::size_t i = 0; i < lhs.size(); ++i) {
      CHECK(lhs.values()[i] == doctest::Approx(c * rhs.values()[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("embedding text round-trips exactly") {
  Rng rng(23);
  auto m = random_matrix(7, 5, rng);
  m(0, 0) = 1e-300;
  m(1, 1) = -0.1;
  std::stringstream buf;
  write_embedding(buf, m);
  CHECK(read_embedding(buf, "mem") == m);

  std::istringstream bad("2 3\n1 2 3\n1 2\n");
  CHECK_THROWS_AS(read_embedding(bad, "mem"), ParseError);
}
