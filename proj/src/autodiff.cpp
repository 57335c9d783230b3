#include "bridgeprompt/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bridgeprompt/error.hpp"

namespace bp {

Parameter::Parameter(std::string n, Tensor v)
    : name(std::move(n)), value(std::move(v)), grad(value.size(), 0.0) {}

void Parameter::zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }

const Tensor& Var::value() const {
  if (!tape_) throw StateError("use of an unbound Var");
  return tape_->value_of(id_);
}

bool Var::requires_grad() const { return tape_ && tape_->requires_grad_of(id_); }

double Var::item() const {
  const auto& v = value();
  if (v.size() != 1) throw DimensionError("item() on tensor of shape " + shape_string(v.shape));
  return v.values[0];
}

Var Tape::push(Node node) {
  for (double x : node.value.values) {
    if (!std::isfinite(x)) {
      throw DivergenceError("non-finite value produced by operation #" +
                            std::to_string(nodes_.size()));
    }
  }
  if (consumed_) throw StateError("tape already consumed by backward");
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Tensor value) { return push(Node{std::move(value), false, {}, {}, nullptr}); }

Var Tape::variable(Tensor value) { return push(Node{std::move(value), true, {}, {}, nullptr}); }

Var Tape::parameter(Parameter& p) {
  if (p.grad.size() != p.value.size()) p.grad.assign(p.value.size(), 0.0);
  return push(Node{p.value, true, {}, {}, &p});
}

Var Tape::record(Tensor value, std::span<const Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const auto& in : inputs) {
    if (in.tape_ != this) throw ContractError("operation mixes tensors from different tapes");
    needs = needs || nodes_[in.id_].requires_grad;
  }
  Node node{std::move(value), needs, {}, {}, nullptr};
  if (needs) node.backward = std::move(backward);
  return push(std::move(node));
}

std::vector<double>* Tape::grad_buffer(Var v) {
  auto& node = nodes_[v.id_];
  if (!node.requires_grad) return nullptr;
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return &node.grad;
}

std::vector<double> Tape::grad(Var v) const {
  const auto& node = nodes_.at(v.id_);
  if (node.grad.empty()) return std::vector<double>(node.value.size(), 0.0);
  return node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw ContractError("loss does not belong to this tape");
  if (consumed_) throw StateError("backward called twice on the same tape");
  if (nodes_[loss.id_].value.size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_string(nodes_[loss.id_].value.shape));
  }
  consumed_ = true;
  if (!nodes_[loss.id_].requires_grad) return;
  grad_buffer(loss)->at(0) = 1.0;
  for (std::size_t i = loss.id_ + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.grad.empty()) continue;
    if (node.backward) node.backward(*this, node.grad);
    if (node.param) {
      for (std::size_t j = 0; j < node.grad.size(); ++j) node.param->grad[j] += node.grad[j];
    }
  }
}

// ---------------------------------------------------------------------------

namespace {

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

void require_rank(const Var& a, std::size_t rank, const char* op) {
  if (a.shape().size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got " + shape_string(a.shape()));
  }
}

template <class F>
Var unary(Var a, F&& forward_backward) {
  const auto& in = a.value();
  Tensor out(in.shape, std::vector<double>(in.size()));
  std::vector<double> deriv(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) {
    auto [y, dy] = forward_backward(in.values[i]);
    out.values[i] = y;
    deriv[i] = dy;
  }
  Var inputs[] = {a};
  return a.tape()->record(std::move(out), inputs,
                          [a, deriv = std::move(deriv)](Tape& t, const std::vector<double>& g) {
                            if (auto* ga = t.grad_buffer(a)) {
                              for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * deriv[i];
                            }
                          });
}

}  // namespace

Var add(Var a, Var b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  const auto& bv = b.value().values;
  for (std::size_t i = 0; i < bv.size(); ++i) out.values[i] += bv[i];
  Var inputs[] = {a, b};
  return a.tape()->record(std::move(out), inputs, [a, b](Tape& t, const std::vector<double>& g) {
    if (auto* ga = t.grad_buffer(a)) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (auto* gb = t.grad_buffer(b)) for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i];
  });
}

Var sub(Var a, Var b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  const auto& bv = b.value().values;
  for (std::size_t i = 0; i < bv.size(); ++i) out.values[i] -= bv[i];
  Var inputs[] = {a, b};
  return a.tape()->record(std::move(out), inputs, [a, b](Tape& t, const std::vector<double>& g) {
    if (auto* ga = t.grad_buffer(a)) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
    if (auto* gb = t.grad_buffer(b)) for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
  });
}

Var mul(Var a, Var b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  const auto& bv = b.value().values;
  for (std::size_t i = 0; i < bv.size(); ++i) out.values[i] *= bv[i];
  Var inputs[] = {a, b};
  return a.tape()->record(std::move(out), inputs, [a, b](Tape& t, const std::vector<double>& g) {
    const auto& av = a.value().values;
    const auto& bv = b.value().values;
    if (auto* ga = t.grad_buffer(a)) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    if (auto* gb = t.grad_buffer(b)) for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
  });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return std::pair{x * factor, factor}; });
}

Var square(Var a) {
  return unary(a, [](double x) { return std::pair{x * x, 2.0 * x}; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0 ? std::pair{x, 1.0} : std::pair{0.0, 0.0}; });
}

Var tanh(Var a) {
  return unary(a, [](double x) {
    const double y = std::tanh(x);
    return std::pair{y, 1.0 - y * y};
  });
}

Var clamp(Var a, double lo, double hi) {
  if (lo > hi) throw ParameterError("clamp: lower bound exceeds upper bound");
  return unary(a, [lo, hi](double x) {
    if (x < lo) return std::pair{lo, 0.0};
    if (x > hi) return std::pair{hi, 0.0};
    return std::pair{x, 1.0};
  });
}

Var add_bias_rows(Var m, Var v) {
  require_rank(m, 2, "add_bias_rows");
  const std::size_t n = m.dim(0), k = m.dim(1);
  if (v.shape() != Shape{k}) throw DimensionError("add_bias_rows: bias shape mismatch");
  Tensor out = m.value();
  const auto& bv = v.value().values;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < k; ++c) out.values[r * k + c] += bv[c];
  Var inputs[] = {m, v};
  return m.tape()->record(std::move(out), inputs, [m, v, n, k](Tape& t, const std::vector<double>& g) {
    if (auto* gm = t.grad_buffer(m)) for (std::size_t i = 0; i < g.size(); ++i) (*gm)[i] += g[i];
    if (auto* gv = t.grad_buffer(v))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < k; ++c) (*gv)[c] += g[r * k + c];
  });
}

Var add_bias_cols(Var m, Var v) {
  require_rank(m, 2, "add_bias_cols");
  const std::size_t n = m.dim(0), k = m.dim(1);
  if (v.shape() != Shape{n}) throw DimensionError("add_bias_cols: bias shape mismatch");
  Tensor out = m.value();
  const auto& bv = v.value().values;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < k; ++c) out.values[r * k + c] += bv[r];
  Var inputs[] = {m, v};
  return m.tape()->record(std::move(out), inputs, [m, v, n, k](Tape& t, const std::vector<double>& g) {
    if (auto* gm = t.grad_buffer(m)) for (std::size_t i = 0; i < g.size(); ++i) (*gm)[i] += g[i];
    if (auto* gv = t.grad_buffer(v))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < k; ++c) (*gv)[r] += g[r * k + c];
  });
}

Var matmul(Var a, Var b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  const auto& av = a.value().values;
  const auto& bv = b.value().values;
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double x = av[i * k + p];
      if (x == 0.0) continue;
      const double* brow = &bv[p * n];
      double* orow = &out.values[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += x * brow[j];
    }
  Var inputs[] = {a, b};
  return a.tape()->record(std::move(out), inputs, [a, b, m, k, n](Tape& t, const std::vector<double>& g) {
    const auto& av = a.value().values;
    const auto& bv = b.value().values;
    if (auto* ga = t.grad_buffer(a)) {
      // dA = G * B^T
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          const double* grow = &g[i * n];
          const double* brow = &bv[p * n];
          for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
          (*ga)[i * k + p] += acc;
        }
    }
    if (auto* gb = t.grad_buffer(b)) {
      // dB = A^T * G
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double x = av[i * k + p];
          if (x == 0.0) continue;
          const double* grow = &g[i * n];
          double* out = &(*gb)[p * n];
          for (std::size_t j = 0; j < n; ++j) out[j] += x * grow[j];
        }
    }
  });
}

Var transpose(Var a) {
  require_rank(a, 2, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  const auto& av = a.value().values;
  Tensor out = Tensor::zeros({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out.values[j * r + i] = av[i * c + j];
  Var inputs[] = {a};
  return a.tape()->record(std::move(out), inputs, [a, r, c](Tape& t, const std::vector<double>& g) {
    if (auto* ga = t.grad_buffer(a))
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*ga)[i * c + j] += g[j * r + i];
  });
}

Var reshape(Var a, Shape shape) {
  if (numel(shape) != a.value().size()) {
    throw DimensionError("reshape: cannot view " + shape_string(a.shape()) + " as " +
                         shape_string(shape));
  }
  Tensor out(std::move(shape), a.value().values);
  Var inputs[] = {a};
  return a.tape()->record(std::move(out), inputs, [a](Tape& t, const std::vector<double>& g) {
    if (auto* ga = t.grad_buffer(a)) for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i];
  });
}

Var sum(Var a) {
  double total = 0.0;
  for (double x : a.value().values) total += x;
  Var inputs[] = {a};
  return a.tape()->record(Tensor::scalar(total), inputs, [a](Tape& t, const std::vector<double>& g) {
    if (auto* ga = t.grad_buffer(a)) for (auto& x : *ga) x += g[0];
  });
}

Var mean(Var a) {
  const auto n = a.value().size();
  if (n == 0) throw DimensionError("mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var mean_pool(Var x, std::size_t axis) {
  const auto& shape = x.shape();
  if (axis >= shape.size()) {
    throw DimensionError("mean_pool: axis " + std::to_string(axis) + " invalid for " +
                         shape_string(shape));
  }
  const std::size_t len = shape[axis];
  if (len == 0) throw DimensionError("mean_pool over an empty axis");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];
  Shape out_shape = shape;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out = Tensor::zeros(out_shape);
  const auto& xv = x.value().values;
  const double inv = 1.0 / static_cast<double>(len);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t l = 0; l < len; ++l)
      for (std::size_t i = 0; i < inner; ++i)
        out.values[o * inner + i] += xv[(o * len + l) * inner + i];
  for (auto& v : out.values) v *= inv;
  Var inputs[] = {x};
  return x.tape()->record(std::move(out), inputs,
                          [x, outer, len, inner, inv](Tape& t, const std::vector<double>& g) {
                            if (auto* gx = t.grad_buffer(x))
                              for (std::size_t o = 0; o < outer; ++o)
                                for (std::size_t l = 0; l < len; ++l)
                                  for (std::size_t i = 0; i < inner; ++i)
                                    (*gx)[(o * len + l) * inner + i] += g[o * inner + i] * inv;
                          });
}

namespace {

struct AxisLayout {
  std::size_t groups;  // independent softmax vectors
  std::size_t len;     // entries per vector
  std::size_t stride;  // distance between consecutive entries
  std::size_t index(std::size_t group, std::size_t l) const {
    // Row-wise (stride 1): group is a row; column-wise: group is a column.
    return stride == 1 ? group * len + l : l * stride + group;
  }
};

AxisLayout softmax_layout(const Var& x, std::size_t axis, double temperature, const char* op) {
  if (!(temperature > 0.0)) throw ParameterError(std::string(op) + ": temperature must be positive");
  const auto& s = x.shape();
  if (s.size() == 1 && axis == 0) return {1, s[0], 1};
  if (s.size() == 2 && axis == 1) return {s[0], s[1], 1};
  if (s.size() == 2 && axis == 0) return {s[1], s[0], s[1]};
  throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) + " invalid for " +
                       shape_string(s));
}

}  // namespace

Var softmax(Var x, std::size_t axis, double temperature) {
  const auto layout = softmax_layout(x, axis, temperature, "softmax");
  if (layout.len == 0) throw DimensionError("softmax over an empty axis");
  const auto& xv = x.value().values;
  Tensor out(x.shape(), std::vector<double>(xv.size()));
  for (std::size_t gi = 0; gi < layout.groups; ++gi) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < layout.len; ++l) mx = std::max(mx, xv[layout.index(gi, l)] / temperature);
    double total = 0.0;
    for (std::size_t l = 0; l < layout.len; ++l) {
      const auto idx = layout.index(gi, l);
      out.values[idx] = std::exp(xv[idx] / temperature - mx);
      total += out.values[idx];
    }
    for (std::size_t l = 0; l < layout.len; ++l) out.values[layout.index(gi, l)] /= total;
  }
  std::vector<double> yv = out.values;
  Var inputs[] = {x};
  return x.tape()->record(std::move(out), inputs,
                          [x, layout, temperature, yv = std::move(yv)](
                              Tape& t, const std::vector<double>& g) {
                            auto* gx = t.grad_buffer(x);
                            if (!gx) return;
                            for (std::size_t gi = 0; gi < layout.groups; ++gi) {
                              double dot = 0.0;
                              for (std::size_t l = 0; l < layout.len; ++l) {
                                const auto idx = layout.index(gi, l);
                                dot += g[idx] * yv[idx];
                              }
                              for (std::size_t l = 0; l < layout.len; ++l) {
                                const auto idx = layout.index(gi, l);
                                (*gx)[idx] += yv[idx] * (g[idx] - dot) / temperature;
                              }
                            }
                          });
}

Var log_softmax(Var x, std::size_t axis, double temperature) {
  const auto layout = softmax_layout(x, axis, temperature, "log_softmax");
  if (layout.len == 0) throw DimensionError("log_softmax over an empty axis");
  const auto& xv = x.value().values;
  Tensor out(x.shape(), std::vector<double>(xv.size()));
  std::vector<double> probs(xv.size());
  for (std::size_t gi = 0; gi < layout.groups; ++gi) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < layout.len; ++l) mx = std::max(mx, xv[layout.index(gi, l)] / temperature);
    double total = 0.0;
    for (std::size_t l = 0; l < layout.len; ++l) total += std::exp(xv[layout.index(gi, l)] / temperature - mx);
    const double lse = mx + std::log(total);
    for (std::size_t l = 0; l < layout.len; ++l) {
      const auto idx = layout.index(gi, l);
      out.values[idx] = xv[idx] / temperature - lse;
      probs[idx] = std::exp(out.values[idx]);
    }
  }
  Var inputs[] = {x};
  return x.tape()->record(std::move(out), inputs,
                          [x, layout, temperature, probs = std::move(probs)](
                              Tape& t, const std::vector<double>& g) {
                            auto* gx = t.grad_buffer(x);
                            if (!gx) return;
                            for (std::size_t gi = 0; gi < layout.groups; ++gi) {
                              double gsum = 0.0;
                              for (std::size_t l = 0; l < layout.len; ++l) gsum += g[layout.index(gi, l)];
                              for (std::size_t l = 0; l < layout.len; ++l) {
                                const auto idx = layout.index(gi, l);
                                (*gx)[idx] += (g[idx] - probs[idx] * gsum) / temperature;
                              }
                            }
                          });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw DimensionError("concat of zero tensors");
  if (axis > 1) throw DimensionError("concat: axis must be 0 or 1");
  for (const auto& p : parts) require_rank(p, 2, "concat");
  const std::size_t other = parts[0].dim(1 - axis);
  std::size_t total = 0;
  for (const auto& p : parts) {
    if (p.dim(1 - axis) != other) throw DimensionError("concat: mismatched non-concat dimension");
    total += p.dim(axis);
  }
  const std::size_t rows = axis == 0 ? total : other;
  const std::size_t cols = axis == 0 ? other : total;
  Tensor out = Tensor::zeros({rows, cols});
  std::vector<std::size_t> offsets;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const auto& v = p.value();
    const std::size_t pr = v.shape[0], pc = v.shape[1];
    for (std::size_t r = 0; r < pr; ++r)
      for (std::size_t c = 0; c < pc; ++c) {
        const std::size_t orow = axis == 0 ? offset + r : r;
        const std::size_t ocol = axis == 0 ? c : offset + c;
        out.values[orow * cols + ocol] = v.values[r * pc + c];
      }
    offset += p.dim(axis);
  }
  std::vector<Var> ins(parts.begin(), parts.end());
  return parts[0].tape()->record(
      std::move(out), parts, [ins, offsets, axis, cols](Tape& t, const std::vector<double>& g) {
        for (std::size_t k = 0; k < ins.size(); ++k) {
          auto* gp = t.grad_buffer(ins[k]);
          if (!gp) continue;
          const std::size_t pr = ins[k].dim(0), pc = ins[k].dim(1);
          for (std::size_t r = 0; r < pr; ++r)
            for (std::size_t c = 0; c < pc; ++c) {
              const std::size_t orow = axis == 0 ? offsets[k] + r : r;
              const std::size_t ocol = axis == 0 ? c : offsets[k] + c;
              (*gp)[r * pc + c] += g[orow * cols + ocol];
            }
        }
      });
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  require_rank(x, 2, "slice");
  if (axis > 1) throw DimensionError("slice: axis must be 0 or 1");
  if (begin > end || end > x.dim(axis)) {
    throw DimensionError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") outside axis of length " + std::to_string(x.dim(axis)));
  }
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  const std::size_t out_rows = axis == 0 ? end - begin : rows;
  const std::size_t out_cols = axis == 0 ? cols : end - begin;
  const auto& xv = x.value().values;
  Tensor out = Tensor::zeros({out_rows, out_cols});
  for (std::size_t r = 0; r < out_rows; ++r)
    for (std::size_t c = 0; c < out_cols; ++c) {
      const std::size_t sr = axis == 0 ? begin + r : r;
      const std::size_t sc = axis == 0 ? c : begin + c;
      out.values[r * out_cols + c] = xv[sr * cols + sc];
    }
  Var inputs[] = {x};
  return x.tape()->record(std::move(out), inputs,
                          [x, axis, begin, out_rows, out_cols, cols](Tape& t, const std::vector<double>& g) {
                            auto* gx = t.grad_buffer(x);
                            if (!gx) return;
                            for (std::size_t r = 0; r < out_rows; ++r)
                              for (std::size_t c = 0; c < out_cols; ++c) {
                                const std::size_t sr = axis == 0 ? begin + r : r;
                                const std::size_t sc = axis == 0 ? c : begin + c;
                                (*gx)[sr * cols + sc] += g[r * out_cols + c];
                              }
                          });
}

Var gather_rows(Var table, std::span<const std::size_t> rows) {
  require_rank(table, 2, "gather_rows");
  const std::size_t n = table.dim(0), e = table.dim(1);
  for (auto r : rows)
    if (r >= n) throw DimensionError("gather_rows: row index out of range");
  const auto& tv = table.value().values;
  Tensor out = Tensor::zeros({rows.size(), e});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(&tv[rows[i] * e], e, &out.values[i * e]);
  Var inputs[] = {table};
  return table.tape()->record(std::move(out), inputs,
                              [table, idx = std::vector<std::size_t>(rows.begin(), rows.end()), e](
                                  Tape& t, const std::vector<double>& g) {
                                auto* gt = t.grad_buffer(table);
                                if (!gt) return;
                                for (std::size_t i = 0; i < idx.size(); ++i)
                                  for (std::size_t j = 0; j < e; ++j) (*gt)[idx[i] * e + j] += g[i * e + j];
                              });
}

Var pick(Var x, std::span<const std::size_t> cols) {
  require_rank(x, 2, "pick");
  const std::size_t n = x.dim(0), m = x.dim(1);
  if (cols.size() != n) throw DimensionError("pick: need one column index per row");
  for (auto c : cols)
    if (c >= m) throw DimensionError("pick: column index out of range");
  const auto& xv = x.value().values;
  Tensor out = Tensor::zeros({n});
  for (std::size_t i = 0; i < n; ++i) out.values[i] = xv[i * m + cols[i]];
  Var inputs[] = {x};
  return x.tape()->record(std::move(out), inputs,
                          [x, idx = std::vector<std::size_t>(cols.begin(), cols.end()), m](
                              Tape& t, const std::vector<double>& g) {
                            if (auto* gx = t.grad_buffer(x))
                              for (std::size_t i = 0; i < idx.size(); ++i) (*gx)[i * m + idx[i]] += g[i];
                          });
}

Var normalize_rows(Var x) {
  require_rank(x, 2, "normalize_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  const auto& xv = x.value().values;
  std::vector<double> norms(n);
  Tensor out = Tensor::zeros({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    double ss = 0.0;
    for (std::size_t j = 0; j < d; ++j) ss += xv[i * d + j] * xv[i * d + j];
    norms[i] = std::sqrt(ss);
    if (!(norms[i] > 0.0)) throw DegenerateInputError("normalize_rows: row " + std::to_string(i) + " is zero");
    for (std::size_t j = 0; j < d; ++j) out.values[i * d + j] = xv[i * d + j] / norms[i];
  }
  Var inputs[] = {x};
  std::vector<double> yv = out.values;
  return x.tape()->record(std::move(out), inputs,
                          [x, n, d, norms = std::move(norms), yv = std::move(yv)](
                              Tape& t, const std::vector<double>& g) {
                            auto* gx = t.grad_buffer(x);
                            if (!gx) return;
                            for (std::size_t i = 0; i < n; ++i) {
                              double dot = 0.0;
                              for (std::size_t j = 0; j < d; ++j) dot += g[i * d + j] * yv[i * d + j];
                              for (std::size_t j = 0; j < d; ++j)
                                (*gx)[i * d + j] += (g[i * d + j] - yv[i * d + j] * dot) / norms[i];
                            }
                          });
}

Var conv1d_dilated(Var x, Var w, std::size_t dilation) {
  if (dilation < 1) throw ParameterError("conv1d_dilated: dilation must be at least 1");
  require_rank(x, 2, "conv1d_dilated");
  require_rank(w, 3, "conv1d_dilated");
  const std::size_t cin = x.dim(0), len = x.dim(1);
  const std::size_t cout = w.dim(0);
  if (w.dim(1) != cin) throw DimensionError("conv1d_dilated: kernel input channels differ from input");
  if (w.dim(2) != 3) throw DimensionError("conv1d_dilated: kernel width must be 3");
  const auto& xv = x.value().values;
  const auto& wv = w.value().values;
  Tensor out = Tensor::zeros({cout, len});
  const auto dil = static_cast<std::ptrdiff_t>(dilation);
  const auto T = static_cast<std::ptrdiff_t>(len);
  // Tap k reads x[t + (k - 1) * dilation]; valid output range per tap.
  auto tap_range = [dil, T](std::size_t k) {
    const std::ptrdiff_t shift = (static_cast<std::ptrdiff_t>(k) - 1) * dil;
    const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, -shift);
    const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(T, T - shift);
    return std::tuple{shift, lo, hi};
  };
  for (std::size_t o = 0; o < cout; ++o) {
    double* orow = &out.values[o * len];
    for (std::size_t i = 0; i < cin; ++i) {
      const double* xrow = &xv[i * len];
      for (std::size_t k = 0; k < 3; ++k) {
        const double wk = wv[(o * cin + i) * 3 + k];
        auto [shift, lo, hi] = tap_range(k);
        for (std::ptrdiff_t t = lo; t < hi; ++t) orow[t] += wk * xrow[t + shift];
      }
    }
  }
  Var inputs[] = {x, w};
  return x.tape()->record(std::move(out), inputs,
                          [x, w, cin, cout, len, tap_range](Tape& t, const std::vector<double>& g) {
                            const auto& xv = x.value().values;
                            const auto& wv = w.value().values;
                            auto* gx = t.grad_buffer(x);
                            auto* gw = t.grad_buffer(w);
                            for (std::size_t o = 0; o < cout; ++o) {
                              const double* grow = &g[o * len];
                              for (std::size_t i = 0; i < cin; ++i) {
                                const double* xrow = &xv[i * len];
                                for (std::size_t k = 0; k < 3; ++k) {
                                  auto [shift, lo, hi] = tap_range(k);
                                  const std::size_t widx = (o * cin + i) * 3 + k;
                                  if (gw) {
                                    double acc = 0.0;
                                    for (std::ptrdiff_t tt = lo; tt < hi; ++tt) acc += grow[tt] * xrow[tt + shift];
                                    (*gw)[widx] += acc;
                                  }
                                  if (gx) {
                                    const double wk = wv[widx];
                                    double* gxrow = &(*gx)[i * len];
                                    for (std::ptrdiff_t tt = lo; tt < hi; ++tt) gxrow[tt + shift] += wk * grow[tt];
                                  }
                                }
                              }
                            }
                          });
}

}  // namespace bp
