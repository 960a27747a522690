#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "kgcf/kg_core.hpp"
#include "kgcf/matrix.hpp"
#include "kgcf/random.hpp"

namespace kgcf {

// Generalized Bellman-Ford encoder parameters. Relation-indexed tensors cover the augmented
// relation set (originals plus inverses).
struct EncoderParams {
  std::size_t layers = 0;
  std::size_t dim = 0;
  std::size_t relations = 0;
  std::vector<Matrix> relation;            // per layer: relations x dim edge embeddings w(r)
  std::vector<Matrix> weight;              // per layer: dim x dim, out[j] = sum_k in[k] * weight(k, j)
  std::vector<std::vector<double>> bias;   // per layer: dim
  Matrix boundary;                         // relations x dim, the 1_r vectors

  static EncoderParams zeros(std::size_t layers, std::size_t dim, std::size_t relations);
  // Uniform in [-1/sqrt(dim), 1/sqrt(dim)].
  static EncoderParams initialize(std::size_t layers, std::size_t dim, std::size_t relations, Rng& rng);

  // Visits every tensor in checkpoint order: per layer relation, weight, bias; then boundary.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    for (std::size_t l = 0; l < layers; ++l) {
      fn("relation", relation[l].values());
      fn("weight", weight[l].values());
      fn("bias", std::span<double>(bias[l]));
    }
    fn("boundary", boundary.values());
  }
  template <typename Fn>
  void for_each_tensor(Fn&& fn) const {
    for (std::size_t l = 0; l < layers; ++l) {
      fn("relation", relation[l].values());
      fn("weight", weight[l].values());
      fn("bias", std::span<const double>(bias[l]));
    }
    fn("boundary", boundary.values());
  }

  friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

struct EncoderOptions {
  bool linear = false;  // test hook: ReLU replaced by identity
};

// Multiplicative gate per (layer, augmented edge) on the message of that edge.
using EdgeGates = std::vector<std::vector<double>>;
EdgeGates unit_gates(std::size_t layers, std::size_t num_edges);

// Field z_r(h, .): row h holds 1_r, all other rows are zero.
Matrix boundary(EntityId head, RelationId relation, const EncoderParams& params, std::size_t num_entities);

// One round: row e <- act(linear(z0[e] + sum over incoming (s, q, e) of z[s] * w_l(q))).
Matrix layer_step(const Matrix& field, const RelationGraph& graph, const EncoderParams& params, std::size_t layer,
                  const Matrix& boundary_field, const EncoderOptions& options = {},
                  std::span<const double> gates = {});

// Forward activations kept for the reverse pass.
struct EncodeTape {
  EntityId head = 0;
  RelationId relation = 0;
  std::vector<Matrix> fields;      // z^0 .. z^L; z^0 is the boundary field
  std::vector<Matrix> aggregates;  // per layer, input of the linear map

  const Matrix& output() const { return fields.back(); }
};

EncodeTape encode_with_tape(EntityId head, RelationId relation, const EncoderParams& params,
                            const RelationGraph& graph, const EncoderOptions& options = {},
                            const EdgeGates* gates = nullptr);

// z_r(h, t) for every tail t in one pass.
Matrix encode(EntityId head, RelationId relation, const EncoderParams& params, const RelationGraph& graph,
              const EncoderOptions& options = {});

// Reverse pass: accumulates d(loss)/d(params) into `grads` given d(loss)/d(output field).
// When `gate_grads` is set it receives d(loss)/d(gate) per layer and edge.
void encoder_backward(const EncodeTape& tape, const EncoderParams& params, const RelationGraph& graph,
                      const Matrix& d_output, EncoderParams& grads, const EncoderOptions& options = {},
                      const EdgeGates* gates = nullptr, EdgeGates* gate_grads = nullptr);

}  // namespace kgcf
