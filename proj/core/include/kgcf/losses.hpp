#pragma once

#include <span>
#include <string_view>

#include "kgcf/cf_matcher.hpp"
#include "kgcf/matrix.hpp"

namespace kgcf {

inline constexpr double kProbabilityEpsilon = 1e-12;

double clamp_probability(double p) noexcept;

// Scores of one positive and its negatives under one treatment view.
struct ScoredPositive {
  double positive = 0.5;
  bool positive_target = true;  // false turns the positive term into -log(1 - p)
  std::span<const double> negatives;
};

// -log p(pos) - (1/n) sum log(1 - p(neg_i)), clamped to [eps, 1 - eps].
double nll_term(const ScoredPositive& scored);

// Mean of nll_term over the positives of a batch. Used for both the factual loss and, with
// counterfactual scores and A^CF targets, the counterfactual loss.
double batch_nll(std::span<const ScoredPositive> batch);

// d(term)/d(logit) for -log p (target = true) or -log(1 - p) (target = false); zero where clamped.
double nll_logit_gradient(double p, bool target) noexcept;

enum class DiscrepancyKind { Frobenius, KL };

DiscrepancyKind parse_discrepancy(std::string_view text);
std::string_view to_string(DiscrepancyKind kind);

// ||P - Q||_F / batch, or mean row KL(softmax(P) || softmax(Q)). Rows are batch entries.
double discrepancy(const Matrix& factual, const Matrix& counterfactual, DiscrepancyKind kind);

// Adds scale * d(disc)/dP and scale * d(disc)/dQ into the given matrices.
void discrepancy_gradient(const Matrix& factual, const Matrix& counterfactual, DiscrepancyKind kind, double scale,
                          Matrix& d_factual, Matrix& d_counterfactual);

struct LossBreakdown {
  double l_f = 0.0;
  double l_cf = 0.0;
  double l_disc = 0.0;
  double total = 0.0;
};

// total = L_F + alpha * L_CF + beta * L_disc
LossBreakdown total_loss(double l_f, double l_cf, double l_disc, double alpha, double beta);

// Mean over matched records of T^F (A^F - A^CF) + (1 - T^F)(A^CF - A^F), with A^F = 1.
// Throws StatisticError when no record is matched.
double estimate_ate(std::span<const CounterfactualRecord> records);

}  // namespace kgcf
