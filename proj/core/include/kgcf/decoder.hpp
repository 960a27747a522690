#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "kgcf/matrix.hpp"
#include "kgcf/nbf_encoder.hpp"
#include "kgcf/random.hpp"
#include "kgcf/treatment.hpp"

namespace kgcf {

// Two-layer MLP g([z, T]) -> probability. Input width is the pair-representation size plus one
// treatment column (the last row of w1).
struct DecoderParams {
  std::size_t input = 0;
  std::size_t hidden = 0;
  Matrix w1;                // input x hidden
  std::vector<double> b1;   // hidden
  std::vector<double> w2;   // hidden
  std::vector<double> b2;   // 1

  static DecoderParams zeros(std::size_t representation_dim, std::size_t hidden);
  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
  static DecoderParams initialize(std::size_t representation_dim, std::size_t hidden, Rng& rng);

  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn("w1", w1.values());
    fn("b1", std::span<double>(b1));
    fn("w2", std::span<double>(w2));
    fn("b2", std::span<double>(b2));
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    fn("w1", w1.values());
    fn("b1", std::span<const double>(b1));
    fn("w2", std::span<const double>(w2));
    fn("b2", std::span<const double>(b2));
  }

  friend bool operator==(const DecoderParams&, const DecoderParams&) = default;
};

struct ModelConfig {
  std::size_t layers = 6;
  std::size_t dim = 32;
  std::size_t decoder_hidden = 64;
};

struct ModelParams {
  EncoderParams encoder;
  DecoderParams decoder;

  static ModelParams zeros(const ModelConfig& config, std::size_t relations);
  static ModelParams initialize(const ModelConfig& config, std::size_t relations, Rng& rng);
  ModelParams zeros_like() const;
  std::size_t num_parameters() const;

  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    encoder.for_each_tensor(fn);
    decoder.for_each_tensor(fn);
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    encoder.for_each_tensor(fn);
    decoder.for_each_tensor(fn);
  }

  // this += other, tensor by tensor in checkpoint order.
  void add(const ModelParams& other);

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct Decoded {
  std::vector<double> hidden;  // ReLU outputs of the first layer
  double logit = 0.0;
  double probability = 0.5;
};

Decoded decode(std::span<const double> z, TreatmentBit treatment, const DecoderParams& params);

// Accumulates parameter gradients and d/dz given d(loss)/d(logit) and an optional extra
// gradient on the hidden activations.
void decode_backward(std::span<const double> z, TreatmentBit treatment, const Decoded& forward, double d_logit,
                     std::span<const double> d_hidden, const DecoderParams& params, DecoderParams& grads,
                     std::span<double> dz);

}  // namespace kgcf
