#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lctc/array.hpp"
#include "lctc/parameters.hpp"

namespace lctc {

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while the tape lives.
class Var {
 public:
  Var() = default;

  const RealArray& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
/// which is a topological order, so backward is a single reverse sweep.
///
/// A tape is not thread-safe; confine it to one worker.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) = default;
  Tape& operator=(Tape&&) = default;

  Var constant(RealArray value);
  Var variable(RealArray value);

  /// One leaf per parameter segment, in segment order. backward() later
  /// routes leaf gradients into parameter_gradient().
  std::vector<Var> bind(const ParameterVector& params);

  /// Appends an op result. `backward` reads this node's gradient and
  /// accumulates into the parents; it is dropped when no parent needs one.
  Var record(RealArray value, std::vector<std::size_t> parents, BackwardFn backward);

  const RealArray& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of a node, zero-initialised on first touch.
  RealArray& grad(std::size_t id);

  /// Reverse sweep from a scalar output. Throws ShapeError otherwise.
  void backward(Var output);

  /// Gradient of a node after backward(); zeros if it was not reached.
  RealArray gradient(Var v) const;

  /// Flat gradient congruent with the ParameterVector passed to bind().
  GradientVector parameter_gradient() const;

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    RealArray value;
    RealArray grad;
    bool has_grad = false;
    bool requires_grad = false;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  std::vector<Node> nodes_;
  // (leaf node id, offset, size) per bound segment
  struct Binding {
    std::size_t node;
    std::size_t offset;
    std::size_t size;
  };
  std::vector<Binding> bindings_;
  std::size_t bound_total_ = 0;
};

namespace ad {

Var add(Var a, Var b);
/// m x n plus a broadcast 1 x n row.
Var add_row(Var a, Var row);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var matmul(Var a, Var b);
Var tanh(Var a);
Var sigmoid(Var a);
Var log(Var a);
Var exp(Var a);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
Var sum(Var a);
Var scale(Var a, double s);
/// axis 0 stacks rows, axis 1 joins columns.
Var concat(std::span<const Var> parts, int axis);
/// Half-open range [begin, end) along axis 0 (rows) or 1 (columns).
Var slice(Var a, int axis, std::size_t begin, std::size_t end);

/// Scalar node whose value and gradient wrt `input` were computed outside
/// the tape (CTC and KD losses use this).
Var external_scalar(Var input, double value, RealArray grad_wrt_input);

}  // namespace ad

RealArray softmax_rows(const RealArray& logits);
RealArray log_softmax_rows(const RealArray& logits);

}  // namespace lctc
