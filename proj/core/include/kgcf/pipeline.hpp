#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kgcf/cf_embedding.hpp"
#include "kgcf/eval_rank.hpp"
#include "kgcf/kg_core.hpp"
#include "kgcf/trainer.hpp"

namespace kgcf {

// Every setting of an end-to-end run. Keys are flat and dotted, e.g. `train.alpha`.
struct PipelineConfig {
  std::filesystem::path data_dir = "data";
  std::string train_file = "train.txt";
  std::string valid_file = "valid.txt";
  std::string test_file = "test.txt";
  int k = 2;
  std::size_t embedding_dim = 32;
  WalkParams walks{};
  CandidateScope scope = CandidateScope::TrainOnly;
  TrainConfig train{};
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";

  // Defaults, with data.dir taken from KGCF_DATA when set.
  static PipelineConfig defaults();
  // Reads a JSON object of dotted keys on top of the defaults.
  static PipelineConfig load(const std::filesystem::path& path);
  static PipelineConfig parse(std::string_view json_text, const std::string& source);

  // Sets one key from its textual value. Throws ConfigError on unknown keys or bad values.
  void set(std::string_view key, std::string_view value);
  static const std::vector<std::string>& keys();

  std::string to_json() const;
  void validate() const;

  std::filesystem::path train_path() const { return data_dir / train_file; }
  std::filesystem::path valid_path() const { return data_dir / valid_file; }
  std::filesystem::path test_path() const { return data_dir / test_file; }
  // Walk and training parameters with seeds derived from the master seed.
  WalkParams seeded_walks() const;
  TrainConfig seeded_train() const;
};

inline constexpr const char* kAssignmentsFile = "assignments.tsv";
inline constexpr const char* kEmbeddingFile = "embedding.txt";
inline constexpr const char* kTableFile = "cf_table.jsonl";
inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kTrainLogFile = "train_log.jsonl";
inline constexpr const char* kMetricsFile = "metrics.json";
inline constexpr const char* kInterpretFile = "interpret.txt";
inline constexpr const char* kSweepFile = "sweep.tsv";

struct PrepareSummary {
  double matched_fraction = 0.0;
  std::vector<std::pair<std::string, double>> treated_fraction;  // per relation, share of train triplets with T^F = 1

  std::string to_json() const;
};

// Everything the later commands need, loaded from the data and prepared artifacts and checked
// against the config.
struct PreparedState {
  Dataset dataset;
  RelationGraph graph;
  TreatmentAssignments treatments;
  TreatmentTable table;
};

Dataset load_config_dataset(const PipelineConfig& config);
PreparedState load_prepared(const PipelineConfig& config);

PrepareSummary cmd_prepare(const PipelineConfig& config, std::ostream& log);
TrainResult cmd_train(const PipelineConfig& config);
TrainResult cmd_train(const PipelineConfig& config, const PreparedState& state);
// `ranks_path`, when set, receives per-triplet ranks for significance testing.
MetricsReport cmd_eval(const PipelineConfig& config, const std::string& split,
                       const std::optional<std::filesystem::path>& ranks_path = std::nullopt);
// Query given by vocabulary names; writes and returns the interpretation report.
std::string cmd_interpret(const PipelineConfig& config, const std::string& head, const std::string& relation,
                          const std::string& tail, std::size_t k, std::size_t beam);
double cmd_ate(const PipelineConfig& config);

struct SweepCell {
  double alpha = 0.0;
  double beta = 0.0;
  std::optional<double> valid_mrr;
  std::size_t best_epoch = 0;
};
// Trains once per (alpha, beta) pair and writes the grid; checkpoints are not kept.
std::vector<SweepCell> cmd_sweep(const PipelineConfig& config, const std::vector<double>& alphas,
                                 const std::vector<double>& betas);

}  // namespace kgcf
