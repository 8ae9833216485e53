#include "lctc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lctc/errors.hpp"

namespace lctc {

const RealArray& Var::value() const { return tape_->value(id_); }

Var Tape::constant(RealArray value) {
  nodes_.push_back(Node{std::move(value), {}, false, false, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::variable(RealArray value) {
  nodes_.push_back(Node{std::move(value), {}, false, true, {}, {}});
  return Var(this, nodes_.size() - 1);
}

std::vector<Var> Tape::bind(const ParameterVector& params) {
  if (!bindings_.empty()) throw InvalidArgument("Tape::bind: parameters already bound");
  std::vector<Var> leaves;
  leaves.reserve(params.num_segments());
  for (std::size_t i = 0; i < params.num_segments(); ++i) {
    Var v = variable(params.array(i));
    const auto& seg = params.segment(i);
    bindings_.push_back({v.id(), seg.offset, seg.size});
    leaves.push_back(v);
  }
  bound_total_ = params.total_size();
  return leaves;
}

Var Tape::record(RealArray value, std::vector<std::size_t> parents, BackwardFn backward) {
  bool needs = std::any_of(parents.begin(), parents.end(),
                           [this](std::size_t p) { return nodes_[p].requires_grad; });
  Node node{std::move(value), {}, false, needs, std::move(parents), {}};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

RealArray& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = RealArray(n.value.shape(), 0.0);
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var output) {
  if (output.tape() != this) throw InvalidArgument("Tape::backward: variable from another tape");
  const Node& out = nodes_[output.id()];
  if (out.value.size() != 1) {
    throw ShapeError("backward: output must be scalar, got shape " +
                     shape_string(out.value.shape()));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = RealArray();
  }
  grad(output.id())[0] = 1.0;
  for (std::size_t i = output.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, i);
  }
}

RealArray Tape::gradient(Var v) const {
  const Node& n = nodes_[v.id()];
  if (!n.has_grad) return RealArray(n.value.shape(), 0.0);
  return n.grad;
}

GradientVector Tape::parameter_gradient() const {
  GradientVector g(bound_total_, 0.0);
  for (const auto& b : bindings_) {
    const Node& n = nodes_[b.node];
    if (!n.has_grad) continue;
    std::copy(n.grad.data().begin(), n.grad.data().end(), g.begin() + b.offset);
  }
  return g;
}

RealArray softmax_rows(const RealArray& logits) {
  RealArray out(logits.shape());
  const std::size_t rows = logits.rows(), cols = logits.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    double m = logits(r, 0);
    for (std::size_t c = 1; c < cols; ++c) m = std::max(m, logits(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      out(r, c) = std::exp(logits(r, c) - m);
      z += out(r, c);
    }
    for (std::size_t c = 0; c < cols; ++c) out(r, c) /= z;
  }
  return out;
}

RealArray log_softmax_rows(const RealArray& logits) {
  RealArray out(logits.shape());
  const std::size_t rows = logits.rows(), cols = logits.cols();
  for (std::size_t r = 0; r < rows; ++r) {
    double lse = logsumexp(logits.row_view(r));
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = logits(r, c) - lse;
  }
  return out;
}

namespace ad {
namespace {

Tape& same_tape(const char* op, Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw InvalidArgument(std::string(op) + ": operands live on different tapes");
  }
  return *a.tape();
}

void require_same_shape(const char* op, const RealArray& a, const RealArray& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_matrix(const char* op, const RealArray& a) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a rank-2 array, got " +
                     shape_string(a.shape()));
  }
}

template <class F, class D>
Var unary(Var a, F f, D dfdx_from_out) {
  Tape& t = *a.tape();
  const RealArray& x = a.value();
  RealArray y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t pa = a.id();
  return t.record(std::move(y), {pa}, [pa, dfdx_from_out](Tape& tape, std::size_t self) {
    const RealArray& gy = tape.grad(self);
    const RealArray& xv = tape.value(pa);
    const RealArray& yv = tape.value(self);
    RealArray& gx = tape.grad(pa);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] += gy[i] * dfdx_from_out(xv[i], yv[i]);
  });
}

void accumulate(RealArray& into, const RealArray& from, double s = 1.0) {
  for (std::size_t i = 0; i < from.size(); ++i) into[i] += s * from[i];
}

}  // namespace

Var add(Var a, Var b) {
  Tape& t = same_tape("add", a, b);
  require_same_shape("add", a.value(), b.value());
  RealArray y = a.value();
  accumulate(y, b.value());
  const std::size_t pa = a.id(), pb = b.id();
  return t.record(std::move(y), {pa, pb}, [pa, pb](Tape& tape, std::size_t self) {
    const RealArray& g = tape.grad(self);
    if (tape.requires_grad(pa)) accumulate(tape.grad(pa), g);
    if (tape.requires_grad(pb)) accumulate(tape.grad(pb), g);
  });
}

Var add_row(Var a, Var row) {
  Tape& t = same_tape("add_row", a, row);
  const RealArray& x = a.value();
  const RealArray& r = row.value();
  require_matrix("add_row", x);
  if (r.size() != x.cols()) {
    throw ShapeError("add_row: shape mismatch " + shape_string(x.shape()) + " vs " +
                     shape_string(r.shape()));
  }
  RealArray y = x;
  const std::size_t cols = x.cols();
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < cols; ++j) y(i, j) += r[j];
  const std::size_t pa = a.id(), pr = row.id();
  return t.record(std::move(y), {pa, pr}, [pa, pr, cols](Tape& tape, std::size_t self) {
    const RealArray& g = tape.grad(self);
    if (tape.requires_grad(pa)) accumulate(tape.grad(pa), g);
    if (tape.requires_grad(pr)) {
      RealArray& gr = tape.grad(pr);
      for (std::size_t i = 0; i < g.size(); ++i) gr[i % cols] += g[i];
    }
  });
}

Var sub(Var a, Var b) {
  Tape& t = same_tape("sub", a, b);
  require_same_shape("sub", a.value(), b.value());
  RealArray y = a.value();
  accumulate(y, b.value(), -1.0);
  const std::size_t pa = a.id(), pb = b.id();
  return t.record(std::move(y), {pa, pb}, [pa, pb](Tape& tape, std::size_t self) {
    const RealArray& g = tape.grad(self);
    if (tape.requires_grad(pa)) accumulate(tape.grad(pa), g);
    if (tape.requires_grad(pb)) accumulate(tape.grad(pb), g, -1.0);
  });
}

Var mul(Var a, Var b) {
  Tape& t = same_tape("mul", a, b);
  require_same_shape("mul", a.value(), b.value());
  RealArray y = a.value();
  const RealArray& bv = b.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= bv[i];
  const std::size_t pa = a.id(), pb = b.id();
  return t.record(std::move(y), {pa, pb}, [pa, pb](Tape& tape, std::size_t self) {
    const RealArray& g = tape.grad(self);
    if (tape.requires_grad(pa)) {
      RealArray& ga = tape.grad(pa);
      const RealArray& bv = tape.value(pb);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tape.requires_grad(pb)) {
      RealArray& gb = tape.grad(pb);
      const RealArray& av = tape.value(pa);
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var matmul(Var a, Var b) {
  Tape& t = same_tape("matmul", a, b);
  const RealArray& x = a.value();
  const RealArray& w = b.value();
  require_matrix("matmul", x);
  require_matrix("matmul", w);
  if (x.cols() != w.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape_string(x.shape()) + " vs " +
                     shape_string(w.shape()));
  }
  const std::size_t m = x.rows(), k = x.cols(), n = w.cols();
  RealArray y = RealArray::matrix(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    double* yrow = &y(i, 0);
    for (std::size_t p = 0; p < k; ++p) {
      const double xv = x(i, p);
      if (xv == 0.0) continue;
      const double* wrow = w.row_view(p).data();
      for (std::size_t j = 0; j < n; ++j) yrow[j] += xv * wrow[j];
    }
  }
  const std::size_t pa = a.id(), pb = b.id();
  return t.record(std::move(y), {pa, pb}, [pa, pb, m, k, n](Tape& tape, std::size_t self) {
    const RealArray& g = tape.grad(self);
    if (tape.requires_grad(pa)) {
      // dX = G W^T
      RealArray& gx = tape.grad(pa);
      const RealArray& wv = tape.value(pb);
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = g.row_view(i).data();
          const double* wrow = wv.row_view(p).data();
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * wrow[j];
          gx(i, p) += acc;
        }
    }
    if (tape.requires_grad(pb)) {
      // dW = X^T G
      RealArray& gw = tape.grad(pb);
      const RealArray& xv = tape.value(pa);
      for (std::size_t i = 0; i < m; ++i) {
        const double* grow = g.row_view(i).data();
        for (std::size_t p = 0; p < k; ++p) {
          const double xe = xv(i, p);
          if (xe == 0.0) continue;
          double* gwrow = &gw(p, 0);
          for (std::size_t j = 0; j < n; ++j) gwrow[j] += xe * grow[j];
        }
      }
    }
  });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var softmax_rows(Var a) {
  require_matrix("softmax_rows", a.value());
  Tape& t = *a.tape();
  const std::size_t pa = a.id();
  return t.record(lctc::softmax_rows(a.value()), {pa}, [pa](Tape& tape, std::size_t self) {
    const RealArray& g = tape.grad(self);
    const RealArray& y = tape.value(self);
    RealArray& gx = tape.grad(pa);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double inner = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) inner += g(r, c) * y(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) += y(r, c) * (g(r, c) - inner);
    }
  });
}

Var log_softmax_rows(Var a) {
  require_matrix("log_softmax_rows", a.value());
  Tape& t = *a.tape();
  const std::size_t pa = a.id();
  return t.record(lctc::log_softmax_rows(a.value()), {pa}, [pa](Tape& tape, std::size_t self) {
    const RealArray& g = tape.grad(self);
    const RealArray& y = tape.value(self);
    RealArray& gx = tape.grad(pa);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < y.cols(); ++c) total += g(r, c);
      for (std::size_t c = 0; c < y.cols(); ++c) gx(r, c) += g(r, c) - std::exp(y(r, c)) * total;
    }
  });
}

Var sum(Var a) {
  Tape& t = *a.tape();
  double s = 0.0;
  for (double v : a.value().data()) s += v;
  const std::size_t pa = a.id();
  return t.record(RealArray::scalar(s), {pa}, [pa](Tape& tape, std::size_t self) {
    const double g = tape.grad(self)[0];
    RealArray& gx = tape.grad(pa);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Var scale(Var a, double s) {
  Tape& t = *a.tape();
  RealArray y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= s;
  const std::size_t pa = a.id();
  return t.record(std::move(y), {pa}, [pa, s](Tape& tape, std::size_t self) {
    accumulate(tape.grad(pa), tape.grad(self), s);
  });
}

Var concat(std::span<const Var> parts, int axis) {
  if (parts.empty()) throw InvalidArgument("concat: no operands");
  if (axis != 0 && axis != 1) throw InvalidArgument("concat: axis must be 0 or 1");
  Tape& t = *parts[0].tape();
  const RealArray& first = parts[0].value();
  require_matrix("concat", first);
  std::size_t rows = 0, cols = 0;
  for (const Var& p : parts) {
    const RealArray& v = p.value();
    require_matrix("concat", v);
    if (p.tape() != &t) throw InvalidArgument("concat: operands live on different tapes");
    if (axis == 0) {
      if (v.cols() != first.cols())
        throw ShapeError("concat: shape mismatch " + shape_string(first.shape()) + " vs " +
                         shape_string(v.shape()));
      rows += v.rows();
      cols = v.cols();
    } else {
      if (v.rows() != first.rows())
        throw ShapeError("concat: shape mismatch " + shape_string(first.shape()) + " vs " +
                         shape_string(v.shape()));
      cols += v.cols();
      rows = v.rows();
    }
  }
  RealArray y = RealArray::matrix(rows, cols);
  std::vector<std::size_t> parents;
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const Var& p : parts) {
    const RealArray& v = p.value();
    for (std::size_t i = 0; i < v.rows(); ++i)
      for (std::size_t j = 0; j < v.cols(); ++j) {
        if (axis == 0) y(off + i, j) = v(i, j);
        else y(i, off + j) = v(i, j);
      }
    parents.push_back(p.id());
    offsets.push_back(off);
    off += axis == 0 ? v.rows() : v.cols();
  }
  auto ids = parents;
  return t.record(std::move(y), std::move(parents),
                  [ids, offsets, axis](Tape& tape, std::size_t self) {
                    const RealArray& g = tape.grad(self);
                    for (std::size_t k = 0; k < ids.size(); ++k) {
                      if (!tape.requires_grad(ids[k])) continue;
                      RealArray& gp = tape.grad(ids[k]);
                      for (std::size_t i = 0; i < gp.rows(); ++i)
                        for (std::size_t j = 0; j < gp.cols(); ++j)
                          gp(i, j) += axis == 0 ? g(offsets[k] + i, j) : g(i, offsets[k] + j);
                    }
                  });
}

Var slice(Var a, int axis, std::size_t begin, std::size_t end) {
  const RealArray& x = a.value();
  require_matrix("slice", x);
  if (axis != 0 && axis != 1) throw InvalidArgument("slice: axis must be 0 or 1");
  const std::size_t extent = axis == 0 ? x.rows() : x.cols();
  if (begin > end || end > extent) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of bounds for shape " + shape_string(x.shape()));
  }
  const std::size_t rows = axis == 0 ? end - begin : x.rows();
  const std::size_t cols = axis == 1 ? end - begin : x.cols();
  RealArray y = RealArray::matrix(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      y(i, j) = axis == 0 ? x(begin + i, j) : x(i, begin + j);
  Tape& t = *a.tape();
  const std::size_t pa = a.id();
  return t.record(std::move(y), {pa}, [pa, axis, begin](Tape& tape, std::size_t self) {
    const RealArray& g = tape.grad(self);
    RealArray& gx = tape.grad(pa);
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) {
        if (axis == 0) gx(begin + i, j) += g(i, j);
        else gx(i, begin + j) += g(i, j);
      }
  });
}

Var external_scalar(Var input, double value, RealArray grad_wrt_input) {
  require_same_shape("external_scalar", input.value(), grad_wrt_input);
  Tape& t = *input.tape();
  const std::size_t pa = input.id();
  return t.record(RealArray::scalar(value), {pa},
                  [pa, g = std::move(grad_wrt_input)](Tape& tape, std::size_t self) {
                    accumulate(tape.grad(pa), g, tape.grad(self)[0]);
                  });
}

}  // namespace ad
}  // namespace lctc
