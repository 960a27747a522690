#include "kgcf/nbf_encoder.hpp"

#include <cmath>
#include <random>
#include <string>

#include "kgcf/error.hpp"

namespace kgcf {

EncoderParams EncoderParams::zeros(std::size_t layers, std::size_t dim, std::size_t relations) {
  EncoderParams p;
  p.layers = layers;
  p.dim = dim;
  p.relations = relations;
  for (std::size_t l = 0; l < layers; ++l) {
    p.relation.emplace_back(relations, dim);
    p.weight.emplace_back(dim, dim);
    p.bias.emplace_back(dim, 0.0);
  }
  p.boundary = Matrix(relations, dim);
  return p;
}

EncoderParams EncoderParams::initialize(std::size_t layers, std::size_t dim, std::size_t relations, Rng& rng) {
  if (dim < 1) throw ConfigError("encoder hidden dimension must be >= 1");
  auto p = zeros(layers, dim, relations);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  std::uniform_real_distribution<double> u(-bound, bound);
  p.for_each_tensor([&](std::string_view, std::span<double> t) {
    for (auto& x : t) x = u(rng);
  });
  return p;
}

EdgeGates unit_gates(std::size_t layers, std::size_t num_edges) {
  return EdgeGates(layers, std::vector<double>(num_edges, 1.0));
}

Matrix boundary(EntityId head, RelationId relation, const EncoderParams& params, std::size_t num_entities) {
  if (head >= num_entities) throw LookupError("boundary: head entity out of range");
  if (relation >= params.relations) throw LookupError("boundary: relation out of range");
  Matrix field(num_entities, params.dim);
  const auto src = params.boundary.row(relation);
  auto dst = field.row(head);
  for (std::size_t k = 0; k < params.dim; ++k) dst[k] = src[k];
  return field;
}

namespace {

// Aggregation of one layer; returns the pre-linear aggregate.
Matrix aggregate(const Matrix& field, const RelationGraph& graph, const Matrix& rel, const Matrix& boundary_field,
                 std::span<const double> gates) {
  const std::size_t n = field.rows();
  const std::size_t dim = field.cols();
  Matrix agg = boundary_field;
  for (EntityId e = 0; e < n; ++e) {
    auto out = agg.row(e);
    for (EdgeId id : graph.incoming(e)) {
      const Triplet& edge = graph.edge(id);
      const auto z = field.row(edge.head);
      const auto w = rel.row(edge.relation);
      if (gates.empty()) {
        for (std::size_t k = 0; k < dim; ++k) out[k] += z[k] * w[k];
      } else {
        const double g = gates[id];
        for (std::size_t k = 0; k < dim; ++k) out[k] += g * (z[k] * w[k]);
      }
    }
  }
  return agg;
}

Matrix apply_linear(const Matrix& agg, const Matrix& weight, std::span<const double> bias, bool linear) {
  const std::size_t n = agg.rows();
  const std::size_t dim = agg.cols();
  Matrix out(n, dim);
  for (std::size_t e = 0; e < n; ++e) {
    const auto a = agg.row(e);
    auto o = out.row(e);
    for (std::size_t j = 0; j < dim; ++j) o[j] = bias[j];
    for (std::size_t k = 0; k < dim; ++k) {
      const double ak = a[k];
      if (ak == 0.0) continue;
      const auto wk = weight.row(k);
      for (std::size_t j = 0; j < dim; ++j) o[j] += ak * wk[j];
    }
    if (!linear) {
      for (std::size_t j = 0; j < dim; ++j) o[j] = o[j] < 0.0 ? 0.0 : o[j];
    }
  }
  return out;
}

void check_finite(const Matrix& m, std::size_t layer) {
  for (double x : m.values()) {
    if (!std::isfinite(x)) throw NumericError("encode: layer " + std::to_string(layer) + " produced a non-finite value");
  }
}

void check_shapes(const EncoderParams& params, const RelationGraph& graph) {
  if (params.relations != graph.num_augmented_relations()) {
    throw ShapeError("encoder has " + std::to_string(params.relations) + " relation slots but the graph has " +
                     std::to_string(graph.num_augmented_relations()));
  }
}

}  // namespace

Matrix layer_step(const Matrix& field, const RelationGraph& graph, const EncoderParams& params, std::size_t layer,
                  const Matrix& boundary_field, const EncoderOptions& options, std::span<const double> gates) {
  check_shapes(params, graph);
  if (layer >= params.layers) throw LookupError("layer index out of range");
  if (field.rows() != graph.num_entities() || field.cols() != params.dim || boundary_field.rows() != field.rows() ||
      boundary_field.cols() != field.cols()) {
    throw ShapeError("layer_step: field shape mismatch");
  }
  const auto agg = aggregate(field, graph, params.relation[layer], boundary_field, gates);
  return apply_linear(agg, params.weight[layer], params.bias[layer], options.linear);
}

EncodeTape encode_with_tape(EntityId head, RelationId relation, const EncoderParams& params,
                            const RelationGraph& graph, const EncoderOptions& options, const EdgeGates* gates) {
  check_shapes(params, graph);
  EncodeTape tape;
  tape.head = head;
  tape.relation = relation;
  tape.fields.reserve(params.layers + 1);
  tape.aggregates.reserve(params.layers);
  tape.fields.push_back(boundary(head, relation, params, graph.num_entities()));
  for (std::size_t l = 0; l < params.layers; ++l) {
    std::span<const double> g;
    if (gates) g = (*gates)[l];
    tape.aggregates.push_back(aggregate(tape.fields.back(), graph, params.relation[l], tape.fields.front(), g));
    tape.fields.push_back(apply_linear(tape.aggregates.back(), params.weight[l], params.bias[l], options.linear));
    check_finite(tape.fields.back(), l);
  }
  return tape;
}

Matrix encode(EntityId head, RelationId relation, const EncoderParams& params, const RelationGraph& graph,
              const EncoderOptions& options) {
  check_shapes(params, graph);
  const Matrix z0 = boundary(head, relation, params, graph.num_entities());
  Matrix field = z0;
  for (std::size_t l = 0; l < params.layers; ++l) {
    field = apply_linear(aggregate(field, graph, params.relation[l], z0, {}), params.weight[l], params.bias[l],
                      options.linear);
    check_finite(field, l);
  }
  return field;
}

void encoder_backward(const EncodeTape& tape, const EncoderParams& params, const RelationGraph& graph,
                      const Matrix& d_output, EncoderParams& grads, const EncoderOptions& options,
                      const EdgeGates* gates, EdgeGates* gate_grads) {
  const std::size_t n = graph.num_entities();
  const std::size_t dim = params.dim;
  if (d_output.rows() != n || d_output.cols() != dim) throw ShapeError("encoder_backward: gradient shape mismatch");
  if (gate_grads && gate_grads->size() != params.layers) {
    gate_grads->assign(params.layers, std::vector<double>(graph.num_edges(), 0.0));
  }

  Matrix dz = d_output;
  Matrix d_boundary(n, dim);
  Matrix dpre(n, dim);
  Matrix dagg(n, dim);
  std::vector<char> active(n);
  for (std::size_t l = params.layers; l-- > 0;) {
    const Matrix& z_in = tape.fields[l];
    const Matrix& z_out = tape.fields[l + 1];
    const Matrix& agg = tape.aggregates[l];
    const Matrix& weight = params.weight[l];
    const Matrix& rel = params.relation[l];

    for (std::size_t e = 0; e < n; ++e) {
      const auto d = dz.row(e);
      const auto z = z_out.row(e);
      auto p = dpre.row(e);
      bool any = false;
      for (std::size_t j = 0; j < dim; ++j) {
        p[j] = (options.linear || z[j] > 0.0) ? d[j] : 0.0;
        any = any || p[j] != 0.0;
      }
      active[e] = any ? 1 : 0;
    }

    auto& dW = grads.weight[l];
    auto& db = grads.bias[l];
    for (std::size_t e = 0; e < n; ++e) {
      auto da = dagg.row(e);
      if (!active[e]) {
        for (auto& x : da) x = 0.0;
        continue;
      }
      const auto p = dpre.row(e);
      const auto a = agg.row(e);
      for (std::size_t j = 0; j < dim; ++j) db[j] += p[j];
      for (std::size_t k = 0; k < dim; ++k) {
        const auto wk = weight.row(k);
        auto dWk = dW.row(k);
        double acc = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
          dWk[j] += a[k] * p[j];
          acc += p[j] * wk[j];
        }
        da[k] = acc;
      }
    }

    // Boundary term enters every layer's aggregate; messages flow back to their sources.
    Matrix dz_prev(n, dim);
    auto& drel = grads.relation[l];
    for (EntityId e = 0; e < n; ++e) {
      if (!active[e]) continue;
      const auto da = dagg.row(e);
      auto db0 = d_boundary.row(e);
      for (std::size_t k = 0; k < dim; ++k) db0[k] += da[k];
      for (EdgeId id : graph.incoming(e)) {
        const Triplet& edge = graph.edge(id);
        const auto z = z_in.row(edge.head);
        const auto w = rel.row(edge.relation);
        auto dzs = dz_prev.row(edge.head);
        auto dw = drel.row(edge.relation);
        const double g = gates ? (*gates)[l][id] : 1.0;
        double dgate = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
          dzs[k] += g * da[k] * w[k];
          dw[k] += g * da[k] * z[k];
          dgate += da[k] * (z[k] * w[k]);
        }
        if (gate_grads) (*gate_grads)[l][id] += dgate;
      }
    }
    dz = std::move(dz_prev);
  }

  // z^0 is both the first layer input and the boundary term; only row `head` is parametrized.
  auto dr = grads.boundary.row(tape.relation);
  const auto a = d_boundary.row(tape.head);
  const auto b = dz.row(tape.head);
  for (std::size_t k = 0; k < dim; ++k) dr[k] += a[k] + b[k];
}

}  // namespace kgcf
