#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "kgcf/cf_matcher.hpp"
#include "kgcf/decoder.hpp"
#include "kgcf/kg_core.hpp"
#include "kgcf/losses.hpp"
#include "kgcf/random.hpp"
#include "kgcf/treatment.hpp"

namespace kgcf {

struct LossConfig {
  double alpha = 0.001;
  double beta = 0.1;
  DiscrepancyKind disc = DiscrepancyKind::Frobenius;
  bool factual_only = false;    // drop the counterfactual and discrepancy terms entirely
  bool treatment_input = true;  // false feeds 0 in the decoder's treatment column
  EncoderOptions encoder{};
};

struct TrainConfig {
  ModelConfig model{};
  LossConfig loss{};
  double learning_rate = 5e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 20;
  std::size_t negatives = 32;
  std::uint64_t seed = 0;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

// n corruptions of `positive`, each replacing the head or the tail (chosen uniformly) with a
// uniformly drawn different entity.
std::vector<Triplet> sample_negatives(const Triplet& positive, std::size_t n, Rng& rng, std::size_t num_entities);

struct TrainingSample {
  const CounterfactualRecord* record = nullptr;
  std::vector<Triplet> negatives;
};

struct BatchResult {
  LossBreakdown loss;
  std::optional<ModelParams> grads;
};

// Loss of one batch and, when requested, its gradient with respect to every parameter.
BatchResult batch_loss(const ModelParams& params, const RelationGraph& graph, const TreatmentAssignments& treatments,
                       std::span<const TrainingSample> batch, const LossConfig& config, bool with_gradients);

class Adam {
 public:
  explicit Adam(const ModelParams& shape, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);
  void step(ModelParams& params, const ModelParams& grads);
  std::size_t steps() const noexcept { return steps_; }

 private:
  ModelParams m_;
  ModelParams v_;
  double lr_;
  double beta1_;
  double beta2_;
  double epsilon_;
  std::size_t steps_ = 0;
};

struct EpochLog {
  std::size_t epoch = 0;
  LossBreakdown loss;
  std::optional<double> valid_mrr;

  std::string to_json() const;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;  // 0 when the initial parameters were kept
};

using StepObserver = std::function<void(std::size_t epoch, std::size_t batch, const ModelParams& params)>;

ModelParams initial_params(const TrainConfig& config, std::size_t augmented_relations);

// Minibatch Adam over the shuffled table records (train triplets and their inverse mirrors).
// The returned parameters are those of the epoch with the best validation MRR.
TrainResult train(const TrainConfig& config, const Dataset& dataset, const RelationGraph& graph,
                  const TreatmentAssignments& treatments, const TreatmentTable& table,
                  const StepObserver& observer = {});

void write_train_log(std::ostream& out, std::span<const EpochLog> log);

}  // namespace kgcf
