#include "kgcf/decoder.hpp"

#include <cmath>
#include <random>

#include "kgcf/error.hpp"

namespace kgcf {

DecoderParams DecoderParams::zeros(std::size_t representation_dim, std::size_t hidden) {
  DecoderParams p;
  p.input = representation_dim + 1;
  p.hidden = hidden;
  p.w1 = Matrix(p.input, hidden);
  p.b1.assign(hidden, 0.0);
  p.w2.assign(hidden, 0.0);
  p.b2.assign(1, 0.0);
  return p;
}

DecoderParams DecoderParams::initialize(std::size_t representation_dim, std::size_t hidden, Rng& rng) {
  if (hidden < 1) throw ConfigError("decoder hidden width must be >= 1");
  auto p = zeros(representation_dim, hidden);
  std::uniform_real_distribution<double> first(-1.0 / std::sqrt(static_cast<double>(p.input)),
                                               1.0 / std::sqrt(static_cast<double>(p.input)));
  std::uniform_real_distribution<double> second(-1.0 / std::sqrt(static_cast<double>(hidden)),
                                                1.0 / std::sqrt(static_cast<double>(hidden)));
  for (auto& x : p.w1.values()) x = first(rng);
  for (auto& x : p.b1) x = first(rng);
  for (auto& x : p.w2) x = second(rng);
  for (auto& x : p.b2) x = second(rng);
  return p;
}

ModelParams ModelParams::zeros(const ModelConfig& config, std::size_t relations) {
  return {EncoderParams::zeros(config.layers, config.dim, relations),
          DecoderParams::zeros(config.dim, config.decoder_hidden)};
}

ModelParams ModelParams::initialize(const ModelConfig& config, std::size_t relations, Rng& rng) {
  ModelParams p;
  p.encoder = EncoderParams::initialize(config.layers, config.dim, relations, rng);
  p.decoder = DecoderParams::initialize(config.dim, config.decoder_hidden, rng);
  return p;
}

ModelParams ModelParams::zeros_like() const {
  return {EncoderParams::zeros(encoder.layers, encoder.dim, encoder.relations),
          DecoderParams::zeros(decoder.input - 1, decoder.hidden)};
}

std::size_t ModelParams::num_parameters() const {
  std::size_t n = 0;
  for_each_tensor([&](std::string_view, std::span<const double> t) { n += t.size(); });
  return n;
}

void ModelParams::add(const ModelParams& other) {
  std::vector<std::span<const double>> src;
  other.for_each_tensor([&](std::string_view, std::span<const double> t) { src.push_back(t); });
  std::size_t i = 0;
  for_each_tensor([&](std::string_view, std::span<double> t) {
    const auto s = src[i++];
    for (std::size_t k = 0; k < t.size(); ++k) t[k] += s[k];
  });
}

Decoded decode(std::span<const double> z, TreatmentBit treatment, const DecoderParams& params) {
  if (z.size() + 1 != params.input) throw ShapeError("decode: representation width does not match the decoder");
  Decoded out;
  out.hidden.assign(params.b1.begin(), params.b1.end());
  for (std::size_t k = 0; k < z.size(); ++k) {
    const double x = z[k];
    if (x == 0.0) continue;
    const auto w = params.w1.row(k);
    for (std::size_t j = 0; j < params.hidden; ++j) out.hidden[j] += x * w[j];
  }
  if (treatment.value) {
    const auto w = params.w1.row(z.size());
    for (std::size_t j = 0; j < params.hidden; ++j) out.hidden[j] += w[j];
  }
  double logit = params.b2[0];
  for (std::size_t j = 0; j < params.hidden; ++j) {
    if (out.hidden[j] < 0.0) out.hidden[j] = 0.0;
    logit += params.w2[j] * out.hidden[j];
  }
  if (!std::isfinite(logit)) throw NumericError("decode: non-finite logit");
  out.logit = logit;
  out.probability = 1.0 / (1.0 + std::exp(-logit));
  return out;
}

void decode_backward(std::span<const double> z, TreatmentBit treatment, const Decoded& forward, double d_logit,
                     std::span<const double> d_hidden, const DecoderParams& params, DecoderParams& grads,
                     std::span<double> dz) {
  const std::size_t hidden = params.hidden;
  grads.b2[0] += d_logit;
  std::vector<double> dpre(hidden);
  for (std::size_t j = 0; j < hidden; ++j) {
    grads.w2[j] += d_logit * forward.hidden[j];
    double dh = d_logit * params.w2[j];
    if (!d_hidden.empty()) dh += d_hidden[j];
    dpre[j] = forward.hidden[j] > 0.0 ? dh : 0.0;
    grads.b1[j] += dpre[j];
  }
  for (std::size_t k = 0; k < z.size(); ++k) {
    auto gw = grads.w1.row(k);
    const auto w = params.w1.row(k);
    double acc = 0.0;
    for (std::size_t j = 0; j < hidden; ++j) {
      gw[j] += z[k] * dpre[j];
      acc += w[j] * dpre[j];
    }
    dz[k] += acc;
  }
  if (treatment.value) {
    auto gw = grads.w1.row(z.size());
    for (std::size_t j = 0; j < hidden; ++j) gw[j] += dpre[j];
  }
}

}  // namespace kgcf
