#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "doctest.h"
#include "kgcf/checkpoint.hpp"
#include "kgcf/error.hpp"
#include "kgcf/pipeline.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace kgcf;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Small, fast settings over a dataset written to a fresh directory.
PipelineConfig small_config(const Dataset& dataset, const std::string& tag) {
  const auto dir = testing::temp_dir(tag);
  testing::write_dataset_dir(dataset, dir / "data");
  auto c = PipelineConfig::defaults();
  c.data_dir = dir / "data";
  c.out = dir / "out";
  c.embedding_dim = 8;
  c.walks.walks_per_node = 4;
  c.walks.walk_length = 10;
  c.train.model = {2, 6, 8};
  c.train.epochs = 3;
  c.train.negatives = 4;
  c.train.batch_size = 16;
  c.seed = 5;
  return c;
}

int run_cli(const std::string& args, const fs::path& stdout_file) {
  const char* cli = std::getenv("KGCF_CLI");
  REQUIRE(cli != nullptr);
  const std::string cmd = std::string(cli) + " " + args + " > " + stdout_file.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config keys parse, override and reject unknowns") {
  auto c = PipelineConfig::parse(R"({"treatment.k": 3, "train.alpha": "0.25", "candidates.scope": "all",
                                     "encoder.layers": 4, "seed": 11})",
                                 "mem");
  CHECK(c.k == 3);
  CHECK(c.train.loss.alpha == 0.25);
  CHECK(c.scope == CandidateScope::AllSplits);
  CHECK(c.train.model.layers == 4);
  CHECK(c.seed == 11);

  c.set("train.beta", "0.5");
  c.set("out", "/tmp/x");
  CHECK(c.train.loss.beta == 0.5);
  CHECK(c.out == fs::path("/tmp/x"));
  CHECK_THROWS_AS(c.set("train.gamma", "1"), ConfigError);
  CHECK_THROWS_AS(c.set("treatment.k", "two"), ConfigError);
  CHECK_THROWS_AS(c.set("train.epochs", "-1"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::parse(R"({"nope": 1})", "mem"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::parse("[1, 2]", "mem"), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::parse("{", "mem"), ConfigError);

  // every key survives a round trip through the JSON form
  const auto back = PipelineConfig::parse(c.to_json(), "mem");
  CHECK(back.to_json() == c.to_json());
  for (const auto& key : PipelineConfig::keys()) CHECK(c.to_json().find("\"" + key + "\"") != std::string::npos);
}

TEST_CASE("config file and data directory from the environment") {
  const auto dir = testing::temp_dir("config");
  {
    std::ofstream out(dir / "c.json");
    out << R"({"embedding.dim": 12, "train.epochs": 2})";
  }
  const auto c = PipelineConfig::load(dir / "c.json");
  CHECK(c.embedding_dim == 12);
  CHECK(c.train.epochs == 2);
  CHECK_THROWS(PipelineConfig::load(dir / "missing.json"));

  ::setenv("KGCF_DATA", "/srv/kg", 1);
  CHECK(PipelineConfig::defaults().data_dir == fs::path("/srv/kg"));
  ::unsetenv("KGCF_DATA");
  CHECK(PipelineConfig::defaults().data_dir == fs::path("data"));
}

TEST_CASE("seeds are derived per component") {
  auto c = PipelineConfig::defaults();
  c.seed = 3;
  CHECK(c.seeded_train().seed == derive_seed(3, "train"));
  CHECK(c.seeded_walks().seed == derive_seed(3, "embedding"));
  c.seed = 4;
  CHECK(c.seeded_train().seed != derive_seed(3, "train"));
}

TEST_CASE("prepare writes identical artifacts on rerun") {
  auto c = small_config(testing::compositional_kg(1, 30), "prepare");
  std::ostringstream log;
  const auto summary = cmd_prepare(c, log);
  CHECK(summary.treated_fraction.size() == 3);
  CHECK(summary.to_json().find("matched_fraction") != std::string::npos);
  std::vector<std::string> first;
  for (const char* f : {kAssignmentsFile, kEmbeddingFile, kTableFile}) first.push_back(slurp(c.out / f));

  const auto original_out = c.out;
  c.out = original_out.parent_path() / "again";
  cmd_prepare(c, log);
  std::size_t i = 0;
  for (const char* f : {kAssignmentsFile, kEmbeddingFile, kTableFile}) {
    CAPTURE(f);
    CHECK(slurp(c.out / f) == first[i++]);
  }
}

TEST_CASE("triangle plus pendant treats three of four triplets") {
  auto ds = make_indexed_dataset(4, 1, {{0, 0, 1}, {1, 0, 2}, {2, 0, 0}, {2, 0, 3}}, {{1, 0, 3}}, {{0, 0, 3}});
  auto c = small_config(ds, "toy");
  std::ostringstream log;
  const auto summary = cmd_prepare(c, log);
  REQUIRE(summary.treated_fraction.size() == 1);
  CHECK(summary.treated_fraction[0].second == 0.75);
}

TEST_CASE("k above the largest degree treats only self-loops") {
  const auto ds = testing::compositional_kg(2, 20);
  auto c = small_config(ds, "bigk");
  c.k = 1000;
  std::ostringstream log;
  const auto summary = cmd_prepare(c, log);
  // every entity is peeled into its own label
  REQUIRE(summary.treated_fraction.size() == ds.num_relations());
  for (RelationId r = 0; r < ds.num_relations(); ++r) {
    double loops = 0.0, total = 0.0;
    for (const auto& t : ds.train) {
      if (t.relation != r) continue;
      total += 1.0;
      loops += t.head == t.tail;
    }
    CHECK(summary.treated_fraction[r].second == loops / total);
  }
}

TEST_CASE("train, eval, interpret and ate on prepared artifacts") {
  auto c = small_config(testing::compositional_kg(3, 30), "train");
  std::ostringstream log;
  cmd_prepare(c, log);

  const auto result = cmd_train(c);
  REQUIRE(result.log.size() == 3);
  CHECK(fs::exists(c.out / kCheckpointFile));
  std::size_t lines = 0;
  for (char ch : slurp(c.out / kTrainLogFile)) lines += ch == '\n';
  CHECK(lines == 3);

  SUBCASE("eval on valid reproduces the kept epoch's MRR") {
    const auto report = cmd_eval(c, "valid", c.out / "ranks.jsonl");
    double best = 0.0;
    for (const auto& e : result.log) best = std::max(best, *e.valid_mrr);
    CHECK(report.mrr == best);
    CHECK(slurp(c.out / kMetricsFile) == report.to_json() + "\n");
    std::ifstream ranks(c.out / "ranks.jsonl");
    CHECK(read_ranks(ranks, "ranks").size() == load_config_dataset(c).valid.size());
    CHECK_THROWS_AS(cmd_eval(c, "holdout"), ConfigError);
  }
  SUBCASE("checkpoint that does not fit the config") {
    auto other = c;
    other.train.model.layers = 3;
    CHECK_THROWS_AS(cmd_eval(other, "valid"), VersionError);
  }
  SUBCASE("prepared artifacts that do not fit the config") {
    auto other = c;
    other.embedding_dim = 9;
    CHECK_THROWS_AS(cmd_train(other), ConfigError);
    other = c;
    other.k = 3;
    CHECK_THROWS_AS(cmd_train(other), ConfigError);
  }
  SUBCASE("ate matches the table") {
    const auto state = load_prepared(c);
    CHECK(cmd_ate(c) == estimate_ate(state.table.originals()));
  }
  SUBCASE("interpretation report") {
    const auto state = load_prepared(c);
    const auto& q = state.dataset.valid.front();
    const auto& ds = state.dataset;
    const auto report = cmd_interpret(c, ds.entities.name(q.head), ds.relations.name(q.relation),
                                      ds.entities.name(q.tail), 3, 10);
    CHECK(slurp(c.out / kInterpretFile) == report);
    CHECK(report.rfind("query\t", 0) == 0);

    std::size_t entities = 0;
    const auto params = load_checkpoint(c.out / kCheckpointFile, entities);
    const ScoringModel model{params, state.graph, state.treatments};
    const auto imp = edge_importance(model, q);
    for (const auto& path : top_paths(state.graph, imp, q.head, q.tail, 3, 2)) {
      CHECK(std::fabs(path.weight - path_weight(imp, path.edges)) <= 1e-12);
    }
    const auto inv = cmd_interpret(c, ds.entities.name(q.tail), ds.relations.name(q.relation) + "^-1",
                                   ds.entities.name(q.head), 2, 10);
    CHECK(inv.find("^-1") != std::string::npos);
    CHECK_THROWS_AS(cmd_interpret(c, "nobody", ds.relations.name(0), ds.entities.name(0), 1, 10), LookupError);
  }
}

TEST_CASE("zero epochs write the initial model") {
  auto c = small_config(testing::compositional_kg(4, 20), "zero");
  c.train.epochs = 0;
  c.train.loss.alpha = 0.0;
  c.train.loss.beta = 0.0;
  std::ostringstream log;
  cmd_prepare(c, log);
  const auto result = cmd_train(c);
  CHECK(result.log.empty());
  std::size_t entities = 0;
  const auto state = load_prepared(c);
  CHECK(load_checkpoint(c.out / kCheckpointFile, entities) ==
        initial_params(c.seeded_train(), state.graph.num_augmented_relations()));
}

TEST_CASE("train without prepare reports the missing artifact") {
  auto c = small_config(testing::compositional_kg(5, 20), "noprep");
  CHECK_THROWS_AS(cmd_train(c), IoError);
}

TEST_CASE("sweep writes one row per cell") {
  auto c = small_config(testing::compositional_kg(6, 20), "sweep");
  c.train.epochs = 1;
  std::ostringstream log;
  cmd_prepare(c, log);
  const auto cells = cmd_sweep(c, {0.0, 0.1}, {0.01});
  REQUIRE(cells.size() == 2);
  CHECK(cells[1].alpha == 0.1);
  const auto text = slurp(c.out / kSweepFile);
  std::size_t lines = 0;
  for (char ch : text) lines += ch == '\n';
  CHECK(lines == 3);
  CHECK(text.rfind("alpha\tbeta\tvalid_mrr\tbest_epoch\n", 0) == 0);
}

TEST_CASE("command-line runs of the pipeline") {
  if (std::getenv("KGCF_CLI") == nullptr) {
    MESSAGE("KGCF_CLI not set; skipping command-line checks");
    return;
  }
  const auto c = small_config(testing::compositional_kg(7, 25), "cli");
  const auto dir = c.out.parent_path();
  {
    std::ofstream cfg(dir / "config.json");
    cfg << R"({"embedding.dim": 8, "embedding.walks_per_node": 4, "embedding.walk_length": 10,
               "encoder.layers": 2, "encoder.hidden": 6, "decoder.hidden": 8, "train.negatives": 4})";
  }
  const std::string common = "--config " + (dir / "config.json").string() + " --data.dir " + c.data_dir.string() +
                             " --out " + c.out.string() + " --seed 5 --epochs 2";
  CHECK(run_cli(common + " prepare", dir / "prepare.txt") == 0);
  CHECK(run_cli(common + " train", dir / "train.txt") == 0);
  CHECK(run_cli(common + " eval --split test --ranks " + (dir / "a.jsonl").string(), dir / "eval.txt") == 0);
  const auto metrics = slurp(c.out / kMetricsFile);
  CHECK(metrics.find("\"split\": \"test\"") != std::string::npos);
  CHECK(slurp(dir / "eval.txt").find("mrr") != std::string::npos);
  CHECK(run_cli(common + " ate", dir / "ate.txt") == 0);
  CHECK(run_cli(common + " --alpha 0 --beta 0 train", dir / "train0.txt") == 0);
  CHECK(run_cli(common + " --alpha 0 --beta 0 eval --split test --ranks " + (dir / "b.jsonl").string(),
                dir / "eval0.txt") == 0);
  const int sig = run_cli("significance " + (dir / "a.jsonl").string() + " " + (dir / "b.jsonl").string(),
                          dir / "sig.txt");
  // identical ranks are a degenerate statistic, anything else yields a p-value
  CHECK((sig == 0 || slurp(dir / "sig.txt").find("error:") != std::string::npos));

  CHECK(run_cli(common + " --k-core zero prepare", dir / "bad.txt") == 1);
  CHECK(slurp(dir / "bad.txt").find("error:") != std::string::npos);
  CHECK(run_cli("--no-such-flag prepare", dir / "bad2.txt") != 0);
  CHECK(run_cli(common + " eval --split holdout", dir / "bad3.txt") == 1);
}
