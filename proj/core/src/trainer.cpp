#include "kgcf/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "json.hpp"
#include "kgcf/error.hpp"
#include "kgcf/eval_rank.hpp"
#include "kgcf/parallel.hpp"

namespace kgcf {

void TrainConfig::validate() const {
  const auto& l = loss;
  if (!(l.alpha >= 0.0) || !std::isfinite(l.alpha)) throw ConfigError("alpha must be a finite value >= 0");
  if (!(l.beta >= 0.0) || !std::isfinite(l.beta)) throw ConfigError("beta must be a finite value >= 0");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (negatives < 1) throw ConfigError("negatives must be >= 1");
  if (model.layers < 1) throw ConfigError("encoder layers must be >= 1");
  if (model.dim < 1) throw ConfigError("encoder width must be >= 1");
  if (model.decoder_hidden < 1) throw ConfigError("decoder hidden width must be >= 1");
}

std::vector<Triplet> sample_negatives(const Triplet& positive, std::size_t n, Rng& rng, std::size_t num_entities) {
  if (num_entities < 2) throw ConfigError("negative sampling needs at least two entities");
  std::uniform_int_distribution<int> slot(0, 1);
  std::uniform_int_distribution<EntityId> pick(0, static_cast<EntityId>(num_entities - 2));
  std::vector<Triplet> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto neg = positive;
    const bool head = slot(rng) == 0;
    const EntityId original = head ? positive.head : positive.tail;
    EntityId e = pick(rng);
    if (e >= original) ++e;
    (head ? neg.head : neg.tail) = e;
    out.push_back(neg);
  }
  return out;
}

namespace {

struct SampleOutput {
  double nll_f = 0.0;
  double nll_cf = 0.0;
  std::vector<double> hidden_f;
  std::vector<double> hidden_cf;
};

TreatmentBit input_bit(const LossConfig& config, TreatmentBit bit) {
  return config.treatment_input ? bit : kUntreated;
}

struct PositiveHidden {
  std::vector<double> factual;
  std::vector<double> counterfactual;
};

PositiveHidden positive_hidden(const ModelParams& params, const RelationGraph& graph, const TrainingSample& sample,
                               const LossConfig& config) {
  const auto& rec = *sample.record;
  const auto& t = rec.triplet;
  const auto field = encode(t.head, t.relation, params.encoder, graph, config.encoder);
  const auto z = field.row(t.tail);
  return {decode(z, input_bit(config, rec.t_factual), params.decoder).hidden,
          decode(z, input_bit(config, rec.t_counterfactual), params.decoder).hidden};
}

// Forward pass of one positive and its negatives; with `grads` set, also the reverse pass.
// `batch` is the batch size used to scale gradients, `d_hidden_*` the discrepancy gradients.
SampleOutput sample_pass(const ModelParams& params, const RelationGraph& graph, const TreatmentAssignments& treatments,
                         const TrainingSample& sample, const LossConfig& config, std::size_t batch,
                         std::span<const double> d_hidden_f, std::span<const double> d_hidden_cf,
                         ModelParams* grads) {
  const auto& rec = *sample.record;
  const auto& pos = rec.triplet;
  const std::size_t n = sample.negatives.size();
  const auto tape_tail = encode_with_tape(pos.head, pos.relation, params.encoder, graph, config.encoder);
  const bool any_head = std::any_of(sample.negatives.begin(), sample.negatives.end(),
                                    [&](const Triplet& neg) { return neg.head != pos.head; });
  const RelationId inverse = graph.inverse(pos.relation);
  std::optional<EncodeTape> tape_head;
  if (any_head) tape_head = encode_with_tape(pos.tail, inverse, params.encoder, graph, config.encoder);

  const auto z = tape_tail.output().row(pos.tail);
  const auto dec_f = decode(z, input_bit(config, rec.t_factual), params.decoder);
  std::optional<Decoded> dec_cf;
  if (!config.factual_only) dec_cf = decode(z, input_bit(config, rec.t_counterfactual), params.decoder);

  struct NegativeView {
    bool head;
    EntityId row;
    TreatmentBit bit;
    Decoded decoded;
  };
  std::vector<NegativeView> views;
  views.reserve(n);
  std::vector<double> neg_scores;
  neg_scores.reserve(n);
  for (const auto& neg : sample.negatives) {
    NegativeView v;
    v.head = neg.head != pos.head;
    if (v.head) {
      v.row = neg.head;
      v.bit = treatments.factual(pos.tail, inverse, neg.head);
    } else {
      v.row = neg.tail;
      v.bit = treatments.factual(pos.head, pos.relation, neg.tail);
    }
    const auto& field = v.head ? tape_head->output() : tape_tail.output();
    v.decoded = decode(field.row(v.row), input_bit(config, v.bit), params.decoder);
    neg_scores.push_back(v.decoded.probability);
    views.push_back(std::move(v));
  }

  SampleOutput out;
  out.nll_f = nll_term({dec_f.probability, true, neg_scores});
  out.hidden_f = dec_f.hidden;
  if (dec_cf) {
    out.nll_cf = nll_term({dec_cf->probability, rec.a_counterfactual != 0, neg_scores});
    out.hidden_cf = dec_cf->hidden;
  }
  if (grads == nullptr) return out;

  const double inv_batch = 1.0 / static_cast<double>(batch);
  Matrix d_tail(graph.num_entities(), params.encoder.dim);
  std::optional<Matrix> d_head;
  if (tape_head) d_head.emplace(graph.num_entities(), params.encoder.dim);

  decode_backward(z, input_bit(config, rec.t_factual), dec_f, inv_batch * nll_logit_gradient(dec_f.probability, true),
                  d_hidden_f, params.decoder, grads->decoder, d_tail.row(pos.tail));
  if (dec_cf) {
    const double g = config.alpha * inv_batch * nll_logit_gradient(dec_cf->probability, rec.a_counterfactual != 0);
    decode_backward(z, input_bit(config, rec.t_counterfactual), *dec_cf, g, d_hidden_cf, params.decoder,
                    grads->decoder, d_tail.row(pos.tail));
  }
  // Negatives carry T^CF = T^F, so the counterfactual term repeats the factual one.
  const double neg_scale =
      (config.factual_only ? 1.0 : 1.0 + config.alpha) * inv_batch / static_cast<double>(n == 0 ? 1 : n);
  for (const auto& v : views) {
    const auto& field = v.head ? tape_head->output() : tape_tail.output();
    auto& d_field = v.head ? *d_head : d_tail;
    decode_backward(field.row(v.row), input_bit(config, v.bit), v.decoded,
                    neg_scale * nll_logit_gradient(v.decoded.probability, false), {}, params.decoder,
                    grads->decoder, d_field.row(v.row));
  }
  encoder_backward(tape_tail, params.encoder, graph, d_tail, grads->encoder, config.encoder);
  if (tape_head) encoder_backward(*tape_head, params.encoder, graph, *d_head, grads->encoder, config.encoder);
  return out;
}

Matrix stack_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy(rows[i].begin(), rows[i].end(), m.row(i).begin());
  return m;
}

}  // namespace

BatchResult batch_loss(const ModelParams& params, const RelationGraph& graph, const TreatmentAssignments& treatments,
                       std::span<const TrainingSample> batch, const LossConfig& config, bool with_gradients) {
  if (batch.empty()) throw StatisticError("loss over an empty batch");
  const std::size_t size = batch.size();
  const std::size_t hidden = params.decoder.hidden;
  const bool counterfactual = !config.factual_only;

  // The discrepancy couples the whole batch, so its gradient needs every positive's hidden
  // activations before any reverse pass.
  Matrix d_p(size, hidden);
  Matrix d_q(size, hidden);
  std::optional<double> disc_value;
  if (counterfactual && with_gradients) {
    std::vector<PositiveHidden> hid(size);
    parallel_for(size, [&](std::size_t i) { hid[i] = positive_hidden(params, graph, batch[i], config); });
    std::vector<std::vector<double>> p_rows(size), q_rows(size);
    for (std::size_t i = 0; i < size; ++i) {
      p_rows[i] = std::move(hid[i].factual);
      q_rows[i] = std::move(hid[i].counterfactual);
    }
    const auto p = stack_rows(p_rows);
    const auto q = stack_rows(q_rows);
    disc_value = discrepancy(p, q, config.disc);
    discrepancy_gradient(p, q, config.disc, config.beta, d_p, d_q);
  }

  std::vector<SampleOutput> outputs(size);
  std::vector<ModelParams> sample_grads(with_gradients ? size : 0);
  parallel_for(size, [&](std::size_t i) {
    ModelParams* g = nullptr;
    if (with_gradients) {
      sample_grads[i] = params.zeros_like();
      g = &sample_grads[i];
    }
    std::span<const double> dh_f, dh_cf;
    if (counterfactual && with_gradients) {
      dh_f = d_p.row(i);
      dh_cf = d_q.row(i);
    }
    outputs[i] = sample_pass(params, graph, treatments, batch[i], config, size, dh_f, dh_cf, g);
  });

  double l_f = 0.0, l_cf = 0.0;
  for (const auto& o : outputs) {
    l_f += o.nll_f;
    l_cf += o.nll_cf;
  }
  l_f /= static_cast<double>(size);
  l_cf /= static_cast<double>(size);
  double l_disc = 0.0;
  if (counterfactual) {
    if (disc_value) {
      l_disc = *disc_value;
    } else {
      std::vector<std::vector<double>> p_rows(size), q_rows(size);
      for (std::size_t i = 0; i < size; ++i) {
        p_rows[i] = outputs[i].hidden_f;
        q_rows[i] = outputs[i].hidden_cf;
      }
      l_disc = discrepancy(stack_rows(p_rows), stack_rows(q_rows), config.disc);
    }
  }

  BatchResult result;
  result.loss = counterfactual ? total_loss(l_f, l_cf, l_disc, config.alpha, config.beta) : LossBreakdown{l_f, 0.0, 0.0, l_f};
  if (with_gradients) {
    auto total = params.zeros_like();
    for (const auto& g : sample_grads) total.add(g);
    result.grads = std::move(total);
  }
  return result;
}

Adam::Adam(const ModelParams& shape, double learning_rate, double beta1, double beta2, double epsilon)
    : m_(shape.zeros_like()), v_(shape.zeros_like()), lr_(learning_rate), beta1_(beta1), beta2_(beta2),
      epsilon_(epsilon) {}

namespace {

std::vector<std::span<double>> mutable_tensors(ModelParams& p) {
  std::vector<std::span<double>> out;
  p.for_each_tensor([&](std::string_view, std::span<double> t) { out.push_back(t); });
  return out;
}

std::vector<std::span<const double>> const_tensors(const ModelParams& p) {
  std::vector<std::span<const double>> out;
  p.for_each_tensor([&](std::string_view, std::span<const double> t) { out.push_back(t); });
  return out;
}

}  // namespace

void Adam::step(ModelParams& params, const ModelParams& grads) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  auto p = mutable_tensors(params);
  auto m = mutable_tensors(m_);
  auto v = mutable_tensors(v_);
  const auto g = const_tensors(grads);
  if (p.size() != g.size()) throw ShapeError("Adam: gradient layout does not match the parameters");
  for (std::size_t t = 0; t < p.size(); ++t) {
    if (p[t].size() != g[t].size()) throw ShapeError("Adam: gradient tensor size mismatch");
    for (std::size_t i = 0; i < p[t].size(); ++i) {
      const double gi = g[t][i];
      m[t][i] = beta1_ * m[t][i] + (1.0 - beta1_) * gi;
      v[t][i] = beta2_ * v[t][i] + (1.0 - beta2_) * gi * gi;
      const double mhat = m[t][i] / c1;
      const double vhat = v[t][i] / c2;
      p[t][i] -= lr_ * mhat / (std::sqrt(vhat) + epsilon_);
    }
  }
}

std::string EpochLog::to_json() const {
  nlohmann::ordered_json obj;
  obj["epoch"] = epoch;
  obj["l_f"] = loss.l_f;
  obj["l_cf"] = loss.l_cf;
  obj["l_disc"] = loss.l_disc;
  obj["total"] = loss.total;
  if (valid_mrr) {
    obj["valid_mrr"] = *valid_mrr;
  } else {
    obj["valid_mrr"] = nullptr;
  }
  return obj.dump();
}

void write_train_log(std::ostream& out, std::span<const EpochLog> log) {
  for (const auto& e : log) out << e.to_json() << '\n';
}

ModelParams initial_params(const TrainConfig& config, std::size_t augmented_relations) {
  Rng rng(derive_seed(config.seed, "model-init"));
  return ModelParams::initialize(config.model, augmented_relations, rng);
}

TrainResult train(const TrainConfig& config, const Dataset& dataset, const RelationGraph& graph,
                  const TreatmentAssignments& treatments, const TreatmentTable& table, const StepObserver& observer) {
  config.validate();
  if (!graph.has_inverses() || graph.num_relations() != dataset.num_relations()) {
    throw ShapeError("training needs the inverse-augmented train graph of the dataset");
  }
  TrainResult result;
  result.params = initial_params(config, graph.num_augmented_relations());
  if (config.epochs == 0) return result;

  auto params = result.params;
  Adam adam(params, config.learning_rate);
  Rng rng(derive_seed(config.seed, "train"));
  const auto records = table.records();
  const auto filter = all_true_triplets(dataset);
  std::vector<std::size_t> order(records.size());
  double best_mrr = -std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    LossBreakdown sum;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<TrainingSample> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) {
        const auto& rec = records[order[i]];
        batch.push_back({&rec, sample_negatives(rec.triplet, config.negatives, rng, graph.num_entities())});
      }
      const std::string where = "epoch " + std::to_string(epoch) + ", batch " + std::to_string(batch_index);
      BatchResult step;
      try {
        step = batch_loss(params, graph, treatments, batch, config.loss, true);
      } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " (" + where + ")");
      }
      if (!std::isfinite(step.loss.total)) throw NumericError("non-finite training loss at " + where);
      adam.step(params, *step.grads);
      if (observer) observer(epoch, batch_index, params);
      const double w = static_cast<double>(batch.size());
      sum.l_f += w * step.loss.l_f;
      sum.l_cf += w * step.loss.l_cf;
      sum.l_disc += w * step.loss.l_disc;
      sum.total += w * step.loss.total;
    }
    const double n = static_cast<double>(order.size());
    EpochLog entry{epoch, {sum.l_f / n, sum.l_cf / n, sum.l_disc / n, sum.total / n}, std::nullopt};
    if (!dataset.valid.empty()) {
      const ScoringModel model{params, graph, treatments, config.loss.encoder, config.loss.treatment_input};
      entry.valid_mrr = evaluate(model, dataset.valid, filter, "valid").mrr;
      if (*entry.valid_mrr > best_mrr) {
        best_mrr = *entry.valid_mrr;
        result.params = params;
        result.best_epoch = epoch;
      }
    } else {
      result.params = params;
      result.best_epoch = epoch;
    }
    result.log.push_back(entry);
  }
  return result;
}

}  // namespace kgcf
