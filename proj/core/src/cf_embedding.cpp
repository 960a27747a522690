#include "kgcf/cf_embedding.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <string>

#include "kgcf/error.hpp"
#include "kgcf/parallel.hpp"
#include "kgcf/random.hpp"

namespace kgcf {

void WalkParams::validate() const {
  if (walks_per_node < 1 || walk_length < 1 || window < 1 || negatives < 1 || epochs < 1) {
    throw ConfigError("walk parameters must be positive integers");
  }
  if (!(return_p > 0.0) || !(inout_q > 0.0) || !(learning_rate > 0.0)) {
    throw ConfigError("walk return_p, inout_q and learning_rate must be positive");
  }
}

namespace {

EntityId next_step(const SimpleGraph& view, EntityId prev, EntityId cur, bool has_prev, const WalkParams& params,
                   Rng& rng, std::vector<double>& weights) {
  const auto& nbrs = view.adjacency[cur];
  if (!has_prev || (params.return_p == 1.0 && params.inout_q == 1.0)) {
    std::uniform_int_distribution<std::size_t> pick(0, nbrs.size() - 1);
    return nbrs[pick(rng)];
  }
  weights.resize(nbrs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < nbrs.size(); ++i) {
    const EntityId x = nbrs[i];
    double w;
    if (x == prev) {
      w = 1.0 / params.return_p;
    } else if (view.adjacent(prev, x)) {
      w = 1.0;
    } else {
      w = 1.0 / params.inout_q;
    }
    total += w;
    weights[i] = total;
  }
  std::uniform_real_distribution<double> u(0.0, total);
  const double draw = u(rng);
  const auto it = std::upper_bound(weights.begin(), weights.end(), draw);
  return nbrs[std::min<std::size_t>(static_cast<std::size_t>(it - weights.begin()), nbrs.size() - 1)];
}

std::vector<std::vector<EntityId>> walks_with(const SimpleGraph& view, const WalkParams& params, Rng& rng) {
  std::vector<EntityId> starts;
  for (EntityId v = 0; v < view.num_vertices(); ++v) {
    if (view.degree(v) > 0) starts.push_back(v);
  }
  std::vector<std::vector<EntityId>> walks;
  walks.reserve(starts.size() * static_cast<std::size_t>(params.walks_per_node));
  std::vector<double> weights;
  for (int round = 0; round < params.walks_per_node; ++round) {
    std::shuffle(starts.begin(), starts.end(), rng);
    for (EntityId s : starts) {
      std::vector<EntityId> walk{s};
      walk.reserve(static_cast<std::size_t>(params.walk_length));
      while (walk.size() < static_cast<std::size_t>(params.walk_length)) {
        const bool has_prev = walk.size() >= 2;
        const EntityId prev = has_prev ? walk[walk.size() - 2] : walk.back();
        walk.push_back(next_step(view, prev, walk.back(), has_prev, params, rng, weights));
      }
      walks.push_back(std::move(walk));
    }
  }
  return walks;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

std::vector<std::vector<EntityId>> generate_walks(const SimpleGraph& view, const WalkParams& params) {
  params.validate();
  Rng rng(derive_seed(params.seed, "walks"));
  return walks_with(view, params, rng);
}

Matrix embed_relation(const SimpleGraph& view, std::size_t dim, const WalkParams& params) {
  if (dim < 1) throw ConfigError("embedding dimension must be >= 1");
  params.validate();
  const std::size_t n = view.num_vertices();
  Matrix out(n, dim);
  if (view.num_edges() == 0) return out;

  Rng walk_rng(derive_seed(params.seed, "walks"));
  const auto walks = walks_with(view, params, walk_rng);

  Rng rng(derive_seed(params.seed, "skipgram"));
  Matrix input(n, dim);
  Matrix output(n, dim);
  {
    std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(dim), 0.5 / static_cast<double>(dim));
    for (auto& x : input.values()) x = init(rng);
  }

  // Unigram^0.75 over walk occurrences.
  std::vector<double> freq(n, 0.0);
  std::size_t tokens = 0;
  for (const auto& w : walks) {
    for (EntityId v : w) freq[v] += 1.0;
    tokens += w.size();
  }
  for (auto& f : freq) f = std::pow(f, 0.75);
  std::discrete_distribution<EntityId> noise(freq.begin(), freq.end());

  const double total_steps = static_cast<double>(tokens) * params.epochs;
  double step = 0.0;
  std::vector<double> grad_in(dim);
  const auto window = static_cast<std::ptrdiff_t>(params.window);
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    for (const auto& walk : walks) {
      const auto len = static_cast<std::ptrdiff_t>(walk.size());
      for (std::ptrdiff_t i = 0; i < len; ++i, step += 1.0) {
        const double lr = params.learning_rate * std::max(1.0 - step / total_steps, 1e-4);
        const EntityId center = walk[static_cast<std::size_t>(i)];
        auto in = input.row(center);
        for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(0, i - window); j <= std::min(len - 1, i + window); ++j) {
          if (j == i) continue;
          const EntityId context = walk[static_cast<std::size_t>(j)];
          std::fill(grad_in.begin(), grad_in.end(), 0.0);
          for (int s = 0; s <= params.negatives; ++s) {
            EntityId target = context;
            double label = 1.0;
            if (s > 0) {
              target = noise(rng);
              if (target == context) continue;
              label = 0.0;
            }
            auto out_row = output.row(target);
            double dot = 0.0;
            for (std::size_t k = 0; k < dim; ++k) dot += in[k] * out_row[k];
            const double g = (label - sigmoid(dot)) * lr;
            for (std::size_t k = 0; k < dim; ++k) {
              grad_in[k] += g * out_row[k];
              out_row[k] += g * in[k];
            }
          }
          for (std::size_t k = 0; k < dim; ++k) in[k] += grad_in[k];
        }
      }
    }
  }

  for (EntityId v = 0; v < n; ++v) {
    if (view.degree(v) == 0) continue;
    auto src = input.row(v);
    std::copy(src.begin(), src.end(), out.row(v).begin());
  }
  for (double x : out.values()) {
    if (!std::isfinite(x)) throw NumericError("embed_relation: non-finite embedding entry");
  }
  return out;
}

Matrix combine(std::span<const Matrix> matrices, std::span<const double> proportions) {
  if (matrices.size() != proportions.size()) {
    throw ShapeError("combine: " + std::to_string(matrices.size()) + " matrices but " +
                     std::to_string(proportions.size()) + " proportions");
  }
  if (matrices.empty()) throw ShapeError("combine: no matrices");
  Matrix out(matrices.front().rows(), matrices.front().cols());
  for (std::size_t j = 0; j < matrices.size(); ++j) {
    const auto& m = matrices[j];
    if (m.rows() != out.rows() || m.cols() != out.cols()) throw ShapeError("combine: dimension mismatch");
    auto dst = out.values();
    auto src = m.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += proportions[j] * src[i];
  }
  return out;
}

Matrix build_weighted_embedding(const RelationGraph& graph, std::span<const double> proportions, std::size_t dim,
                                const WalkParams& params) {
  const std::size_t relations = graph.num_relations();
  if (proportions.size() != relations) throw ShapeError("one proportion per original relation is required");
  Matrix out(graph.num_entities(), dim);

  // Bounded memory: embed one chunk of relations concurrently, then accumulate in relation order.
  const std::size_t chunk = std::max<std::size_t>(1, worker_count());
  std::vector<Matrix> pending(chunk);
  for (std::size_t begin = 0; begin < relations; begin += chunk) {
    const std::size_t count = std::min(chunk, relations - begin);
    parallel_for(count, [&](std::size_t i) {
      const auto rel = static_cast<RelationId>(begin + i);
      WalkParams local = params;
      local.seed = derive_seed(params.seed, "relation", rel);
      pending[i] = embed_relation(undirected_projection(graph.num_entities(), graph.relation_edges(rel)), dim, local);
    });
    for (std::size_t i = 0; i < count; ++i) {
      auto dst = out.values();
      auto src = pending[i].values();
      const double psi = proportions[begin + i];
      for (std::size_t x = 0; x < dst.size(); ++x) dst[x] += psi * src[x];
      pending[i] = Matrix();
    }
  }
  return out;
}

void write_embedding(std::ostream& out, const Matrix& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  char buf[40];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(r, c));
      if (c) out << ' ';
      out << buf;
    }
    out << '\n';
  }
}

Matrix read_embedding(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, "missing embedding header");
  std::istringstream header(line);
  std::size_t rows = 0, cols = 0;
  if (!(header >> rows >> cols)) throw ParseError(source, 1, "expected `rows cols` header");
  Matrix m(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    if (!std::getline(in, line)) throw ParseError(source, r + 2, "missing embedding row");
    const char* p = line.c_str();
    for (std::size_t c = 0; c < cols; ++c) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) throw ParseError(source, r + 2, "expected " + std::to_string(cols) + " values");
      m(r, c) = v;
      p = end;
    }
  }
  return m;
}

}  // namespace kgcf
