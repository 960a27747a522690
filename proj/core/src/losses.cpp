#include "kgcf/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kgcf/error.hpp"

namespace kgcf {

double clamp_probability(double p) noexcept {
  return std::clamp(p, kProbabilityEpsilon, 1.0 - kProbabilityEpsilon);
}

double nll_term(const ScoredPositive& scored) {
  const double p = clamp_probability(scored.positive);
  double loss = scored.positive_target ? -std::log(p) : -std::log(1.0 - p);
  if (!scored.negatives.empty()) {
    double neg = 0.0;
    for (double q : scored.negatives) neg += std::log(1.0 - clamp_probability(q));
    loss -= neg / static_cast<double>(scored.negatives.size());
  }
  return loss;
}

double batch_nll(std::span<const ScoredPositive> batch) {
  if (batch.empty()) throw StatisticError("loss over an empty batch");
  double sum = 0.0;
  for (const auto& s : batch) sum += nll_term(s);
  return sum / static_cast<double>(batch.size());
}

double nll_logit_gradient(double p, bool target) noexcept {
  if (p <= kProbabilityEpsilon || p >= 1.0 - kProbabilityEpsilon) return 0.0;
  return target ? -(1.0 - p) : p;
}

DiscrepancyKind parse_discrepancy(std::string_view text) {
  if (text == "frobenius") return DiscrepancyKind::Frobenius;
  if (text == "kl") return DiscrepancyKind::KL;
  throw ConfigError("unknown discrepancy '" + std::string(text) + "' (expected frobenius or kl)");
}

std::string_view to_string(DiscrepancyKind kind) { return kind == DiscrepancyKind::Frobenius ? "frobenius" : "kl"; }

namespace {

void check_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("discrepancy: activation shapes differ (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
  }
  if (a.rows() == 0) throw ShapeError("discrepancy: empty batch");
}

std::vector<double> softmax(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  std::vector<double> p(x.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) sum += (p[i] = std::exp(x[i] - m));
  for (auto& v : p) v /= sum;
  return p;
}

double log_sum_exp(std::span<const double> x) {
  const double m = *std::max_element(x.begin(), x.end());
  double sum = 0.0;
  for (double v : x) sum += std::exp(v - m);
  return m + std::log(sum);
}

double row_kl(std::span<const double> a, std::span<const double> b) {
  const auto p = softmax(a);
  const double shift = log_sum_exp(b) - log_sum_exp(a);
  double kl = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) kl += p[i] * (a[i] - b[i]);
  return kl + shift;
}

}  // namespace

double discrepancy(const Matrix& factual, const Matrix& counterfactual, DiscrepancyKind kind) {
  check_same_shape(factual, counterfactual);
  const auto batch = static_cast<double>(factual.rows());
  if (kind == DiscrepancyKind::Frobenius) {
    double sum = 0.0;
    const auto a = factual.values();
    const auto b = counterfactual.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      sum += d * d;
    }
    return std::sqrt(sum) / batch;
  }
  double total = 0.0;
  for (std::size_t r = 0; r < factual.rows(); ++r) total += row_kl(factual.row(r), counterfactual.row(r));
  return total / batch;
}

void discrepancy_gradient(const Matrix& factual, const Matrix& counterfactual, DiscrepancyKind kind, double scale,
                          Matrix& d_factual, Matrix& d_counterfactual) {
  check_same_shape(factual, counterfactual);
  const auto batch = static_cast<double>(factual.rows());
  if (kind == DiscrepancyKind::Frobenius) {
    double sum = 0.0;
    const auto a = factual.values();
    const auto b = counterfactual.values();
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]) * (a[i] - b[i]);
    const double norm = std::sqrt(sum);
    if (norm == 0.0) return;  // subgradient 0 at identical activations
    auto da = d_factual.values();
    auto db = d_counterfactual.values();
    const double c = scale / (norm * batch);
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double g = c * (a[i] - b[i]);
      da[i] += g;
      db[i] -= g;
    }
    return;
  }
  for (std::size_t r = 0; r < factual.rows(); ++r) {
    const auto a = factual.row(r);
    const auto b = counterfactual.row(r);
    const auto p = softmax(a);
    const auto q = softmax(b);
    double mean_gap = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mean_gap += p[i] * (a[i] - b[i]);
    auto da = d_factual.row(r);
    auto db = d_counterfactual.row(r);
    for (std::size_t i = 0; i < a.size(); ++i) {
      da[i] += scale / batch * p[i] * ((a[i] - b[i]) - mean_gap);
      db[i] += scale / batch * (q[i] - p[i]);
    }
  }
}

LossBreakdown total_loss(double l_f, double l_cf, double l_disc, double alpha, double beta) {
  return {l_f, l_cf, l_disc, l_f + alpha * l_cf + beta * l_disc};
}

double estimate_ate(std::span<const CounterfactualRecord> records) {
  double sum = 0.0;
  std::size_t matched = 0;
  for (const auto& r : records) {
    if (!r.matched()) continue;
    const double tf = r.t_factual.as_double();
    const double af = 1.0;
    const double acf = static_cast<double>(r.a_counterfactual);
    sum += tf * (af - acf) + (1.0 - tf) * (acf - af);
    ++matched;
  }
  if (matched == 0) throw StatisticError("ATE is undefined without matched records");
  return sum / static_cast<double>(matched);
}

}  // namespace kgcf
