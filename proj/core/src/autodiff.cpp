// SPDX-License-Identifier: Apache-2.0
#include "gsnp/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "gsnp/error.hpp"

namespace gsnp {

std::string shape_of(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

const Matrix& Tensor::value() const {
  if (!tape_) throw Error("use of an unbound tensor");
  return tape_->value(id_);
}

Matrix Tensor::grad() const {
  const Matrix& g = tape_->grad(id_);
  if (g.size() == 0) return Matrix::Zero(rows(), cols());
  return g;
}

double Tensor::item() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("item() on a " + shape_of(v) + " tensor");
  return v(0, 0);
}

bool Tensor::requires_grad() const { return tape_ && tape_->requires_grad(id_); }

// ---------------------------------------------------------------------------

Tensor Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr});
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::variable(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), grad_enabled_, nullptr});
  return Tensor(this, nodes_.size() - 1);
}

Tensor Tape::parameter(const ParameterStore& store, const std::string& name) {
  auto it = bound_params_.find(name);
  if (it != bound_params_.end()) return Tensor(this, it->second);
  Tensor t = variable(store.get(name).value);
  bound_params_.emplace(name, t.id());
  return t;
}

Tensor Tape::record(Matrix value, std::span<const Tensor> parents, BackwardFn backward) {
  bool needs = false;
  for (const auto& p : parents) {
    if (p.tape() != this) throw Error("operation mixes tensors from different tapes");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), Matrix(), needs, needs ? std::move(backward) : BackwardFn{}});
  return Tensor(this, nodes_.size() - 1);
}

void Tape::accumulate(const Tensor& target, const Matrix& g) {
  Node& n = nodes_[target.id()];
  if (!n.requires_grad) return;
  if (g.rows() != n.value.rows() || g.cols() != n.value.cols())
    throw ShapeError("gradient " + shape_of(g) + " does not match value " + shape_of(n.value));
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(const Tensor& loss) {
  if (loss.tape() != this) throw Error("backward on a tensor from another tape");
  const Matrix& v = nodes_[loss.id()].value;
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("backward needs a scalar loss, got " + shape_of(v));
  accumulate(loss, Matrix::Ones(1, 1));
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad, n.value);
  }
}

GradientMap Tape::parameter_gradients() const {
  GradientMap out;
  for (const auto& [name, id] : bound_params_) {
    const Node& n = nodes_[id];
    out.emplace(name, n.grad.size() == 0 ? Matrix::Zero(n.value.rows(), n.value.cols()) : n.grad);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

Tape& tape_of(const Tensor& x) {
  if (!x.valid()) throw Error("operation on an unbound tensor");
  return *x.tape();
}

Tape& tape_of(std::span<const Tensor> xs) {
  if (xs.empty()) throw ShapeError("operation on an empty tensor list");
  return tape_of(xs.front());
}

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string(op) + ": shapes " + shape_of(a) + " and " + shape_of(b) + " differ");
}

bool is_row_broadcast(const Matrix& x, const Matrix& y) {
  return y.rows() == 1 && y.cols() == x.cols() && x.rows() != 1;
}

}  // namespace

Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b) {
  const Matrix& xv = x.value();
  const Matrix& Wv = W.value();
  const Matrix& bv = b.value();
  if (xv.cols() != Wv.rows())
    throw ShapeError("linear: input " + shape_of(xv) + " does not fit weight " + shape_of(Wv));
  if (bv.rows() != 1 || bv.cols() != Wv.cols())
    throw ShapeError("linear: bias " + shape_of(bv) + " does not fit weight " + shape_of(Wv));
  Matrix out = xv * Wv;
  out.rowwise() += bv.row(0);
  const Tensor parents[] = {x, W, b};
  return tape_of(x).record(std::move(out), parents, [x, W, b](Tape& t, const Matrix& g, const Matrix&) {
    if (x.requires_grad()) t.accumulate(x, g * W.value().transpose());
    if (W.requires_grad()) t.accumulate(W, x.value().transpose() * g);
    if (b.requires_grad()) t.accumulate(b, g.colwise().sum());
  });
}

Tensor relu(const Tensor& x) {
  Matrix out = x.value().cwiseMax(0.0);
  const Tensor parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(x, (x.value().array() > 0.0).select(g, 0.0));
  });
}

Tensor sigmoid(const Tensor& x) {
  Matrix out = (1.0 / (1.0 + (-x.value().array()).exp())).matrix();
  const Tensor parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x](Tape& t, const Matrix& g, const Matrix& y) {
    t.accumulate(x, (g.array() * y.array() * (1.0 - y.array())).matrix());
  });
}

Tensor concat_cols(std::span<const Tensor> parts) {
  Tape& tape = tape_of(parts);
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows)
      throw ShapeError("concat_cols: shapes " + shape_of(parts.front().value()) + " and " + shape_of(p.value()) +
                       " have different row counts");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  std::vector<Tensor> kept(parts.begin(), parts.end());
  return tape.record(std::move(out), parts, [kept](Tape& t, const Matrix& g, const Matrix&) {
    Eigen::Index o = 0;
    for (const auto& p : kept) {
      if (p.requires_grad()) t.accumulate(p, g.middleCols(o, p.cols()));
      o += p.cols();
    }
  });
}

Tensor concat_rows(std::span<const Tensor> parts) {
  Tape& tape = tape_of(parts);
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols)
      throw ShapeError("concat_rows: shapes " + shape_of(parts.front().value()) + " and " + shape_of(p.value()) +
                       " have different column counts");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  std::vector<Tensor> kept(parts.begin(), parts.end());
  return tape.record(std::move(out), parts, [kept](Tape& t, const Matrix& g, const Matrix&) {
    Eigen::Index o = 0;
    for (const auto& p : kept) {
      if (p.requires_grad()) t.accumulate(p, g.middleRows(o, p.rows()));
      o += p.rows();
    }
  });
}

Tensor add(const Tensor& x, const Tensor& y) {
  const Matrix& xv = x.value();
  const Matrix& yv = y.value();
  const Tensor parents[] = {x, y};
  if (is_row_broadcast(xv, yv)) {
    Matrix out = xv;
    out.rowwise() += yv.row(0);
    return tape_of(x).record(std::move(out), parents, [x, y](Tape& t, const Matrix& g, const Matrix&) {
      t.accumulate(x, g);
      if (y.requires_grad()) t.accumulate(y, g.colwise().sum());
    });
  }
  require_same_shape("add", xv, yv);
  return tape_of(x).record(xv + yv, parents, [x, y](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(x, g);
    t.accumulate(y, g);
  });
}

Tensor sub(const Tensor& x, const Tensor& y) {
  const Matrix& xv = x.value();
  const Matrix& yv = y.value();
  const Tensor parents[] = {x, y};
  if (is_row_broadcast(xv, yv)) {
    Matrix out = xv;
    out.rowwise() -= yv.row(0);
    return tape_of(x).record(std::move(out), parents, [x, y](Tape& t, const Matrix& g, const Matrix&) {
      t.accumulate(x, g);
      if (y.requires_grad()) t.accumulate(y, -g.colwise().sum());
    });
  }
  require_same_shape("sub", xv, yv);
  return tape_of(x).record(xv - yv, parents, [x, y](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(x, g);
    if (y.requires_grad()) t.accumulate(y, -g);
  });
}

Tensor mul(const Tensor& x, const Tensor& y) {
  require_same_shape("mul", x.value(), y.value());
  const Tensor parents[] = {x, y};
  return tape_of(x).record(x.value().cwiseProduct(y.value()), parents,
                           [x, y](Tape& t, const Matrix& g, const Matrix&) {
                             if (x.requires_grad()) t.accumulate(x, g.cwiseProduct(y.value()));
                             if (y.requires_grad()) t.accumulate(y, g.cwiseProduct(x.value()));
                           });
}

Tensor scale(const Tensor& x, double factor) { return affine(x, factor, 0.0); }

Tensor affine(const Tensor& x, double a, double c) {
  Matrix out = (a * x.value().array() + c).matrix();
  const Tensor parents[] = {x};
  return tape_of(x).record(std::move(out), parents,
                           [x, a](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(x, a * g); });
}

Tensor sum(std::span<const Tensor> xs) {
  Tape& tape = tape_of(xs);
  Matrix out = xs.front().value();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    require_same_shape("sum", out, xs[i].value());
    out += xs[i].value();
  }
  std::vector<Tensor> kept(xs.begin(), xs.end());
  return tape.record(std::move(out), xs, [kept](Tape& t, const Matrix& g, const Matrix&) {
    for (const auto& p : kept) t.accumulate(p, g);
  });
}

Tensor sum_all(const Tensor& x) {
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  const Tensor parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(x, Matrix::Constant(x.rows(), x.cols(), g(0, 0)));
  });
}

Tensor mean_rows(const Tensor& x) {
  const Matrix& xv = x.value();
  if (xv.rows() == 0) throw ShapeError("mean_rows: input has no rows");
  const auto n = static_cast<double>(xv.rows());
  Matrix out = Matrix::Zero(1, xv.cols());
  for (Eigen::Index i = 0; i < xv.rows(); ++i) out += xv.row(i);
  out /= n;
  const Tensor parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x, n](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(x, (g / n).replicate(x.rows(), 1));
  });
}

Tensor max_pool(std::span<const Tensor> xs) {
  Tape& tape = tape_of(xs);
  const Matrix& first = xs.front().value();
  Matrix out = first;
  std::vector<std::size_t> winner(static_cast<std::size_t>(first.size()), 0);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Matrix& v = xs[k].value();
    require_same_shape("max_pool", first, v);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v(i) > out(i)) {
        out(i) = v(i);
        winner[static_cast<std::size_t>(i)] = k;
      }
    }
  }
  std::vector<Tensor> kept(xs.begin(), xs.end());
  return tape.record(std::move(out), xs, [kept, winner](Tape& t, const Matrix& g, const Matrix&) {
    for (std::size_t k = 0; k < kept.size(); ++k) {
      if (!kept[k].requires_grad()) continue;
      Matrix gk = Matrix::Zero(g.rows(), g.cols());
      for (Eigen::Index i = 0; i < g.size(); ++i)
        if (winner[static_cast<std::size_t>(i)] == k) gk(i) = g(i);
      t.accumulate(kept[k], gk);
    }
  });
}

Tensor max_pool_rows(const Tensor& x) {
  const Matrix& xv = x.value();
  if (xv.rows() == 0) throw ShapeError("max_pool_rows: input has no rows");
  Matrix out(1, xv.cols());
  std::vector<Eigen::Index> winner(static_cast<std::size_t>(xv.cols()), 0);
  for (Eigen::Index j = 0; j < xv.cols(); ++j) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < xv.rows(); ++i)
      if (xv(i, j) > xv(best, j)) best = i;
    winner[static_cast<std::size_t>(j)] = best;
    out(0, j) = xv(best, j);
  }
  const Tensor parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x, winner](Tape& t, const Matrix& g, const Matrix&) {
    Matrix gx = Matrix::Zero(x.rows(), x.cols());
    for (Eigen::Index j = 0; j < gx.cols(); ++j) gx(winner[static_cast<std::size_t>(j)], j) = g(0, j);
    t.accumulate(x, gx);
  });
}

Tensor cosine(const Tensor& x, const Tensor& y) {
  const Matrix& xv = x.value();
  const Matrix& yv = y.value();
  require_same_shape("cosine", xv, yv);
  const double nx = xv.norm();
  const double ny = yv.norm();
  Matrix out(1, 1);
  const bool degenerate = nx == 0.0 || ny == 0.0;
  out(0, 0) = degenerate ? 0.0 : xv.cwiseProduct(yv).sum() / (nx * ny);
  const Tensor parents[] = {x, y};
  return tape_of(x).record(std::move(out), parents,
                           [x, y, nx, ny, degenerate](Tape& t, const Matrix& g, const Matrix& c) {
                             if (degenerate) return;
                             const double up = g(0, 0);
                             const double cs = c(0, 0);
                             if (x.requires_grad())
                               t.accumulate(x, up * (y.value() / (nx * ny) - cs * x.value() / (nx * nx)));
                             if (y.requires_grad())
                               t.accumulate(y, up * (x.value() / (nx * ny) - cs * y.value() / (ny * ny)));
                           });
}

Tensor gather_rows(const Tensor& x, std::span<const std::uint32_t> rows) {
  const Matrix& xv = x.value();
  Matrix out(static_cast<Eigen::Index>(rows.size()), xv.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k] >= xv.rows())
      throw ShapeError("gather_rows: row " + std::to_string(rows[k]) + " outside " + shape_of(xv));
    out.row(static_cast<Eigen::Index>(k)) = xv.row(rows[k]);
  }
  std::vector<std::uint32_t> idx(rows.begin(), rows.end());
  const Tensor parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x, idx](Tape& t, const Matrix& g, const Matrix&) {
    Matrix gx = Matrix::Zero(x.rows(), x.cols());
    for (std::size_t k = 0; k < idx.size(); ++k) gx.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
    t.accumulate(x, gx);
  });
}

Tensor incidence_sum(const Tensor& x, std::span<const std::uint32_t> source, std::span<const std::uint32_t> target,
                     Eigen::Index num_nodes) {
  const Matrix& xv = x.value();
  if (source.size() != static_cast<std::size_t>(xv.rows()) || target.size() != source.size())
    throw ShapeError("incidence_sum: " + std::to_string(source.size()) + " endpoints for " + shape_of(xv));
  Matrix out = Matrix::Zero(num_nodes, xv.cols());
  for (std::size_t e = 0; e < source.size(); ++e) {
    if (source[e] >= num_nodes || target[e] >= num_nodes) throw ShapeError("incidence_sum: endpoint out of range");
    out.row(source[e]) += xv.row(static_cast<Eigen::Index>(e));
    out.row(target[e]) += xv.row(static_cast<Eigen::Index>(e));
  }
  std::vector<std::uint32_t> src(source.begin(), source.end());
  std::vector<std::uint32_t> dst(target.begin(), target.end());
  const Tensor parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x, src, dst](Tape& t, const Matrix& g, const Matrix&) {
    Matrix gx(x.rows(), x.cols());
    for (std::size_t e = 0; e < src.size(); ++e)
      gx.row(static_cast<Eigen::Index>(e)) = g.row(src[e]) + g.row(dst[e]);
    t.accumulate(x, gx);
  });
}

Tensor scale_rows(const Tensor& x, const Tensor& weights) {
  const Matrix& xv = x.value();
  const Matrix& wv = weights.value();
  if (wv.cols() != 1 || wv.rows() != xv.rows())
    throw ShapeError("scale_rows: weights " + shape_of(wv) + " do not fit " + shape_of(xv));
  Matrix out = (xv.array().colwise() * wv.col(0).array()).matrix();
  const Tensor parents[] = {x, weights};
  return tape_of(x).record(std::move(out), parents, [x, weights](Tape& t, const Matrix& g, const Matrix&) {
    if (x.requires_grad()) t.accumulate(x, (g.array().colwise() * weights.value().col(0).array()).matrix());
    if (weights.requires_grad()) t.accumulate(weights, g.cwiseProduct(x.value()).rowwise().sum());
  });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  Matrix out = x.value().cwiseMax(lo).cwiseMin(hi);
  const Tensor parents[] = {x};
  return tape_of(x).record(std::move(out), parents, [x, lo, hi](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(x, ((x.value().array() >= lo) && (x.value().array() <= hi)).select(g, 0.0));
  });
}

Tensor logit(const Tensor& p, double bound) {
  const Matrix& pv = p.value();
  Matrix raw = (pv.array().log() - (-pv.array()).log1p()).matrix();
  Matrix out = raw.cwiseMax(-bound).cwiseMin(bound);
  const Tensor parents[] = {p};
  return tape_of(p).record(std::move(out), parents, [p, raw, bound](Tape& t, const Matrix& g, const Matrix&) {
    const auto& v = p.value().array();
    t.accumulate(p, (raw.array().abs() < bound).select(g.array() / (v * (1.0 - v)), 0.0).matrix());
  });
}

Tensor gumbel_sigmoid(const Tensor& logit, double temperature, NoiseStream& noise) {
  if (!(temperature > 0.0)) throw ConfigError("gumbel_sigmoid: temperature must be positive");
  const Matrix& lv = logit.value();
  Matrix out(lv.rows(), lv.cols());
  for (Eigen::Index i = 0; i < lv.rows(); ++i) {
    for (Eigen::Index j = 0; j < lv.cols(); ++j) {
      const double g1 = noise.gumbel();
      const double g2 = noise.gumbel();
      out(i, j) = 1.0 / (1.0 + std::exp(-(lv(i, j) + g1 - g2) / temperature));
    }
  }
  const Tensor parents[] = {logit};
  return tape_of(logit).record(std::move(out), parents,
                               [logit, temperature](Tape& t, const Matrix& g, const Matrix& y) {
                                 t.accumulate(logit, (g.array() * y.array() * (1.0 - y.array()) / temperature).matrix());
                               });
}

Tensor gaussian_reparam(const Tensor& mu, const Tensor& sigma, const Matrix& eps) {
  const Matrix& mv = mu.value();
  const Matrix& sv = sigma.value();
  require_same_shape("gaussian_reparam", mv, sv);
  require_same_shape("gaussian_reparam", mv, eps);
  if ((sv.array() <= 0.0).any() || !sv.allFinite())
    throw NumericError("gaussian_reparam: sigma must be strictly positive");
  Matrix out = mv + sv.cwiseProduct(eps);
  const Tensor parents[] = {mu, sigma};
  return tape_of(mu).record(std::move(out), parents, [mu, sigma, eps](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(mu, g);
    if (sigma.requires_grad()) t.accumulate(sigma, g.cwiseProduct(eps));
  });
}

Tensor gaussian_reparam(const Tensor& mu, const Tensor& sigma, NoiseStream& noise, Matrix* eps_out) {
  const Matrix& mv = mu.value();
  if ((sigma.value().array() <= 0.0).any()) throw NumericError("gaussian_reparam: sigma must be strictly positive");
  Matrix eps(mv.rows(), mv.cols());
  for (Eigen::Index i = 0; i < eps.rows(); ++i)
    for (Eigen::Index j = 0; j < eps.cols(); ++j) eps(i, j) = noise.normal();
  if (eps_out) *eps_out = eps;
  return gaussian_reparam(mu, sigma, eps);
}

}  // namespace gsnp
