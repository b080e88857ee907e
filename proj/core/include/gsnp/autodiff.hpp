// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsnp/params.hpp"
#include "gsnp/random.hpp"

namespace gsnp {

class Tape;

/// Handle to a value recorded on a Tape. Cheap to copy; valid while the
/// tape lives.
class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  /// Gradient after Tape::backward; a zero matrix when nothing reached it.
  Matrix grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 tensor.
  double item() const;

  Tape* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }
  bool requires_grad() const;

 private:
  friend class Tape;
  Tensor(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode differentiation tape. Single-threaded; run one tape per
/// episode and combine the resulting GradientMaps.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& upstream, const Matrix& output)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor constant(Matrix value);
  /// Leaf that receives a gradient (a constant while gradients are disabled).
  Tensor variable(Matrix value);
  /// Leaf bound to a named store parameter. Each name is bound once per tape.
  Tensor parameter(const ParameterStore& store, const std::string& name);

  /// Appends a node. `backward` receives the node's upstream gradient and
  /// its own value, and routes gradients to parents via accumulate(). Skipped when no parent
  /// requires a gradient.
  Tensor record(Matrix value, std::span<const Tensor> parents, BackwardFn backward);
  void accumulate(const Tensor& target, const Matrix& grad);

  /// Seeds d(loss)/d(loss) = 1 and walks the tape in reverse. Throws
  /// ShapeError for a non-scalar loss.
  void backward(const Tensor& loss);
  /// Gradients of every bound parameter (zeros when unreached).
  GradientMap parameter_gradients() const;

  const Matrix& value(std::size_t id) const { return nodes_.at(id).value; }
  const Matrix& grad(std::size_t id) const { return nodes_.at(id).grad; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// With gradients disabled every leaf is a constant and no backward
  /// closures are stored; used for inference.
  void set_grad_enabled(bool enabled) noexcept { grad_enabled_ = enabled; }
  bool grad_enabled() const noexcept { return grad_enabled_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  std::vector<Node> nodes_;
  std::unordered_map<std::string, std::size_t> bound_params_;
  bool grad_enabled_ = true;
};

std::string shape_of(const Matrix& m);

// Differentiable operations. Row vectors are 1 x d matrices; batched inputs
// carry one item per row.

/// x * W + b, with b (1 x out) broadcast over the rows of x.
Tensor linear(const Tensor& x, const Tensor& W, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
/// Horizontal concatenation; all parts share a row count.
Tensor concat_cols(std::span<const Tensor> parts);
Tensor concat_rows(std::span<const Tensor> parts);
/// Element-wise sum; `y` may also be a 1 x cols row broadcast over `x`.
Tensor add(const Tensor& x, const Tensor& y);
Tensor sub(const Tensor& x, const Tensor& y);
Tensor mul(const Tensor& x, const Tensor& y);
Tensor scale(const Tensor& x, double factor);
/// a * x + c element-wise.
Tensor affine(const Tensor& x, double a, double c);
/// Element-wise sum of equally shaped tensors.
Tensor sum(std::span<const Tensor> xs);
/// Sum of all entries, as 1 x 1.
Tensor sum_all(const Tensor& x);
/// Column means over rows (1 x cols), reduced in row order.
Tensor mean_rows(const Tensor& x);
/// Element-wise max across a list; gradient goes to the first maximizer.
Tensor max_pool(std::span<const Tensor> xs);
/// Column-wise max over the rows of x (1 x cols), first maximizer wins ties.
Tensor max_pool_rows(const Tensor& x);
/// Cosine similarity of two equally sized tensors; 0 when either has zero norm.
Tensor cosine(const Tensor& x, const Tensor& y);
Tensor gather_rows(const Tensor& x, std::span<const std::uint32_t> rows);
/// Row v of the result sums x's rows e with source[e] == v, plus those with
/// target[e] == v (a row whose source equals its target is counted twice).
Tensor incidence_sum(const Tensor& x, std::span<const std::uint32_t> source,
                     std::span<const std::uint32_t> target, Eigen::Index num_nodes);
/// Scales row i of x by weights(i, 0).
Tensor scale_rows(const Tensor& x, const Tensor& weights);
/// Clamps into [lo, hi]; the gradient is zero where clamping is active.
Tensor clamp(const Tensor& x, double lo, double hi);
/// log(p / (1 - p)) clamped into [-bound, bound].
Tensor logit(const Tensor& p, double bound);

/// Binary-concrete relaxation: sigmoid((logit + g1 - g2) / temperature) with
/// g1, g2 standard Gumbel draws per entry. Throws ConfigError for a
/// non-positive temperature.
Tensor gumbel_sigmoid(const Tensor& logit, double temperature, NoiseStream& noise);

/// mu + sigma * eps with eps ~ N(0, 1) drawn from `noise` and stored in
/// `eps_out` when given. Throws NumericError if any sigma <= 0.
Tensor gaussian_reparam(const Tensor& mu, const Tensor& sigma, NoiseStream& noise, Matrix* eps_out = nullptr);
/// Same with a caller-supplied eps.
Tensor gaussian_reparam(const Tensor& mu, const Tensor& sigma, const Matrix& eps);

}  // namespace gsnp
