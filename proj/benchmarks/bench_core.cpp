#include <benchmark/benchmark.h>

#include <random>

#include "kgcf/cf_embedding.hpp"
#include "kgcf/cf_matcher.hpp"
#include "kgcf/nbf_encoder.hpp"
#include "kgcf/trainer.hpp"
#include "kgcf/treatment.hpp"

using namespace kgcf;

namespace {

Dataset random_kg(std::size_t entities, std::size_t relations, std::size_t triplets, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<EntityId> e(0, static_cast<EntityId>(entities - 1));
  std::uniform_int_distribution<RelationId> r(0, static_cast<RelationId>(relations - 1));
  std::vector<Triplet> train;
  for (std::size_t i = 0; i < triplets; ++i) train.push_back({e(rng), r(rng), e(rng)});
  return make_indexed_dataset(entities, relations, train);
}

struct Fixture {
  Dataset dataset;
  RelationGraph graph;
  TreatmentAssignments treatments;
  Matrix embedding;
  TreatmentTable table;

  explicit Fixture(std::size_t entities) {
    dataset = random_kg(entities, 4, entities * 4, 1);
    graph = build_graph(dataset, true);
    treatments = TreatmentAssignments::compute(graph, 2);
    WalkParams wp;
    wp.walks_per_node = 4;
    wp.walk_length = 10;
    embedding = build_weighted_embedding(graph, relation_proportions(dataset), 16, wp);
    table = build_table(dataset, embedding, treatments, candidate_pairs(dataset));
  }
};

}  // namespace

static void BM_KCore(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto graph = build_graph(random_kg(n, 1, n * 4, 2), false);
  const auto g = undirected_projection(n, graph.relation_edges(0));
  for (auto _ : state) benchmark::DoNotOptimize(kcore_surviving(g, 2));
}
BENCHMARK(BM_KCore)->Arg(1000)->Arg(10000);

static void BM_Encode(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  Rng rng(3);
  const auto p = EncoderParams::initialize(3, 32, f.graph.num_augmented_relations(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(encode(0, 0, p, f.graph));
}
BENCHMARK(BM_Encode)->Arg(200)->Arg(1000);

static void BM_Matching(benchmark::State& state) {
  const Fixture f(static_cast<std::size_t>(state.range(0)));
  const auto candidates = candidate_pairs(f.dataset);
  for (auto _ : state) benchmark::DoNotOptimize(build_table(f.dataset, f.embedding, f.treatments, candidates));
}
BENCHMARK(BM_Matching)->Arg(100)->Arg(300);

static void BM_BatchLoss(benchmark::State& state) {
  const Fixture f(200);
  Rng rng(4);
  const auto params = ModelParams::initialize({3, 16, 32}, f.graph.num_augmented_relations(), rng);
  std::vector<TrainingSample> batch;
  for (const auto& rec : f.table.records()) {
    batch.push_back({&rec, sample_negatives(rec.triplet, 8, rng, f.dataset.num_entities())});
    if (batch.size() == 16) break;
  }
  const bool grads = state.range(0) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(batch_loss(params, f.graph, f.treatments, batch, LossConfig{}, grads));
}
BENCHMARK(BM_BatchLoss)->Arg(0)->Arg(1);

BENCHMARK_MAIN();
