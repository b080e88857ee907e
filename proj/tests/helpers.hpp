// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <initializer_list>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "gsnp/autodiff.hpp"
#include "gsnp/graph.hpp"

namespace gsnp::testing {

inline KnowledgeGraph graph_of(std::initializer_list<std::array<const char*, 3>> triples, bool inverses = false) {
  KnowledgeGraph::Builder b;
  for (const auto& t : triples) b.add(t[0], t[1], t[2]);
  auto kg = std::move(b).build();
  return inverses ? add_inverse_edges(kg) : kg;
}

/// Entities n0..n{nodes-1} always interned; edges drawn uniformly.
inline KnowledgeGraph random_graph(std::uint64_t seed, int nodes, int edges, int relations, bool inverses = true) {
  std::mt19937_64 rng(seed);
  KnowledgeGraph::Builder b;
  for (int i = 0; i < nodes; ++i) b.add_entity("n" + std::to_string(i));
  for (int r = 0; r < relations; ++r) b.add_relation("r" + std::to_string(r));
  std::uniform_int_distribution<int> node(0, nodes - 1);
  std::uniform_int_distribution<int> rel(0, relations - 1);
  for (int e = 0; e < edges; ++e)
    b.add("n" + std::to_string(node(rng)), "r" + std::to_string(rel(rng)), "n" + std::to_string(node(rng)));
  auto kg = std::move(b).build();
  return inverses ? add_inverse_edges(kg) : kg;
}

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m(i) = u(rng);
  return m;
}

/// Moves entries away from `kinks` so central differences stay on one smooth piece.
inline Matrix avoid_kinks(Matrix m, std::initializer_list<double> kinks, double gap = 1e-2) {
  for (Eigen::Index i = 0; i < m.size(); ++i)
    for (double k : kinks)
      if (std::abs(m(i) - k) < gap) m(i) = k + (m(i) >= k ? gap : -gap);
  return m;
}

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  return scale < 1e-8 ? std::abs(analytic - numeric) : std::abs(analytic - numeric) / scale;
}

using ScalarFn = std::function<Tensor(Tape&, std::span<const Tensor>)>;

/// Largest relative error between reverse-mode gradients and central
/// differences over every input entry.
inline double max_gradient_error(const ScalarFn& f, const std::vector<Matrix>& inputs, double step = 1e-5) {
  Tape tape;
  std::vector<Tensor> leaves;
  for (const auto& m : inputs) leaves.push_back(tape.variable(m));
  const Tensor out = f(tape, leaves);
  tape.backward(out);
  double worst = 0.0;
  auto eval = [&](const std::vector<Matrix>& xs) {
    Tape t;
    std::vector<Tensor> ls;
    for (const auto& m : xs) ls.push_back(t.constant(m));
    return f(t, ls).item();
  };
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Matrix g = leaves[k].grad();
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      auto plus = inputs;
      auto minus = inputs;
      plus[k](i) += step;
      minus[k](i) -= step;
      const double numeric = (eval(plus) - eval(minus)) / (2.0 * step);
      worst = std::max(worst, relative_error(g(i), numeric));
    }
  }
  return worst;
}

/// Brute-force enclosing subgraph: all-pairs shortest paths on the undirected
/// view, then every triple with both endpoints within k of h and of t.
inline std::vector<Triple> oracle_enclosing_edges(const KnowledgeGraph& kg, EntityId h, EntityId t, int k,
                                                  std::optional<RelationId> target = std::nullopt) {
  const std::size_t n = kg.num_entities();
  constexpr int inf = 1 << 20;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (const auto& tr : kg.triples())
    if (tr.head != tr.tail) d[tr.head][tr.tail] = d[tr.tail][tr.head] = 1;
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][m] + d[m][j]);
  auto inside = [&](EntityId x) { return d[h][x] <= k && d[t][x] <= k; };
  std::vector<Triple> out;
  for (const auto& tr : kg.triples()) {
    if (!inside(tr.head) || !inside(tr.tail)) continue;
    if (target) {
      if (tr == Triple{h, *target, t}) continue;
      const auto inv = kg.inverse_of(*target);
      if (inv && tr == Triple{t, *inv, h}) continue;
    }
    out.push_back(tr);
  }
  return out;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gsnp_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace gsnp::testing
