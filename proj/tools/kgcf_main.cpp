#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "kgcf/error.hpp"
#include "kgcf/eval_rank.hpp"
#include "kgcf/pipeline.hpp"

namespace {

struct Override {
  std::string key;
  std::string value;
  bool given = false;
};

std::vector<kgcf::RankResult> read_ranks_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw kgcf::IoError("cannot open '" + path + "'");
  return kgcf::read_ranks(in, path);
}

int run(int argc, char** argv) {
  CLI::App app{"Counterfactual relation augmentation for knowledge graph completion"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  app.add_option("--config", config_path, "JSON config of dotted keys")->check(CLI::ExistingFile);

  // Dotted keys first, then the short aliases, so an alias wins when both are given.
  std::vector<Override> dotted;
  dotted.reserve(kgcf::PipelineConfig::keys().size());
  for (const auto& key : kgcf::PipelineConfig::keys()) {
    if (key == "seed" || key == "out") continue;
    dotted.push_back({key, {}, false});
  }
  for (auto& o : dotted) app.add_option("--" + o.key, o.value, "config key " + o.key);

  std::vector<Override> aliases{
      {"seed", {}, false},           {"treatment.k", {}, false},     {"embedding.dim", {}, false},
      {"encoder.layers", {}, false}, {"encoder.hidden", {}, false},  {"train.alpha", {}, false},
      {"train.beta", {}, false},     {"train.negatives", {}, false}, {"train.epochs", {}, false},
      {"train.batch", {}, false},    {"candidates.scope", {}, false}, {"out", {}, false},
  };
  const std::vector<std::string> alias_flags{"--seed",   "--k-core", "--dim",       "--layers",
                                             "--hidden", "--alpha",  "--beta",      "--negatives",
                                             "--epochs", "--batch",  "--scope",     "--out"};
  for (std::size_t i = 0; i < aliases.size(); ++i) {
    app.add_option(alias_flags[i], aliases[i].value, "sets " + aliases[i].key);
  }

  auto* prepare = app.add_subcommand("prepare", "Compute treatments, embedding and counterfactual table");
  auto* train = app.add_subcommand("train", "Train the model on prepared artifacts");

  auto* eval = app.add_subcommand("eval", "Filtered ranking metrics of the trained model");
  std::string split = "test";
  std::string ranks_out;
  eval->add_option("--split", split, "train, valid or test")->capture_default_str();
  eval->add_option("--ranks", ranks_out, "write per-triplet ranks to this file");

  auto* interpret = app.add_subcommand("interpret", "Top path interpretations of one prediction");
  std::string qh, qr, qt;
  std::size_t top_k = 5, beam = 10;
  interpret->add_option("head", qh)->required();
  interpret->add_option("relation", qr, "relation name, optionally suffixed ^-1")->required();
  interpret->add_option("tail", qt)->required();
  interpret->add_option("--top-k", top_k)->capture_default_str();
  interpret->add_option("--beam", beam)->capture_default_str();

  auto* ate = app.add_subcommand("ate", "Average treatment effect over the counterfactual table");

  auto* sweep = app.add_subcommand("sweep", "Grid search over alpha and beta");
  std::vector<double> alphas{0.001, 0.01, 0.1, 1.0};
  std::vector<double> betas{0.001, 0.01, 0.1, 1.0};
  sweep->add_option("--alphas", alphas)->capture_default_str();
  sweep->add_option("--betas", betas)->capture_default_str();

  auto* significance = app.add_subcommand("significance", "Paired t-test between two rank files");
  std::string ranks_a, ranks_b;
  significance->add_option("ranks_a", ranks_a)->required()->check(CLI::ExistingFile);
  significance->add_option("ranks_b", ranks_b)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  auto config = config_path.empty() ? kgcf::PipelineConfig::defaults() : kgcf::PipelineConfig::load(config_path);
  for (auto* group : {&dotted, &aliases}) {
    for (const auto& o : *group) {
      if (!o.value.empty()) config.set(o.key, o.value);
    }
  }

  if (*prepare) {
    const auto summary = kgcf::cmd_prepare(config, std::cout);
    std::cout << summary.to_json() << '\n';
  } else if (*train) {
    const auto result = kgcf::cmd_train(config);
    std::printf("best_epoch=%zu epochs=%zu checkpoint=%s\n", result.best_epoch, result.log.size(),
                (config.out / kgcf::kCheckpointFile).string().c_str());
    for (const auto& e : result.log) std::cout << e.to_json() << '\n';
  } else if (*eval) {
    std::optional<std::filesystem::path> ranks;
    if (!ranks_out.empty()) ranks = ranks_out;
    std::cout << kgcf::cmd_eval(config, split, ranks).to_json() << '\n';
  } else if (*interpret) {
    std::cout << kgcf::cmd_interpret(config, qh, qr, qt, top_k, beam);
  } else if (*ate) {
    std::printf("{\"ate\": %.17g}\n", kgcf::cmd_ate(config));
  } else if (*sweep) {
    for (const auto& c : kgcf::cmd_sweep(config, alphas, betas)) {
      if (c.valid_mrr) {
        std::printf("alpha=%g beta=%g valid_mrr=%.6f best_epoch=%zu\n", c.alpha, c.beta, *c.valid_mrr, c.best_epoch);
      } else {
        std::printf("alpha=%g beta=%g valid_mrr=null best_epoch=%zu\n", c.alpha, c.beta, c.best_epoch);
      }
    }
  } else if (*significance) {
    const auto a = kgcf::reciprocal_ranks(read_ranks_file(ranks_a));
    const auto b = kgcf::reciprocal_ranks(read_ranks_file(ranks_b));
    const auto t = kgcf::significance_test(a, b);
    std::printf("{\"t\": %.17g, \"df\": %zu, \"p_value\": %.17g}\n", t.t, t.degrees_of_freedom, t.p_value);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const kgcf::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
