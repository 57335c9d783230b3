#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bridgeprompt/tensor.hpp"

namespace bp {

// A named trainable tensor that outlives any single tape. Gradients from
// every tape it is registered on accumulate into `grad`.
struct Parameter {
  std::string name;
  Tensor value;
  std::vector<double> grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v);

  void zero_grad();
};

class Tape;

// Handle to a node recorded on a tape.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape; }
  std::size_t dim(std::size_t axis) const { return value().shape.at(axis); }
  bool requires_grad() const;
  double item() const;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records operations in execution order; reverse traversal of that order is
// a valid topological order for backpropagation. A tape supports exactly one
// backward pass and must stay on the thread that built it.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const std::vector<double>& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var variable(Tensor value);
  Var parameter(Parameter& p);

  // Seeds d(loss)/d(loss) = 1, propagates to every reachable node, and adds
  // leaf gradients into their Parameter::grad.
  void backward(Var loss);

  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

  // Gradient of the last backward pass for a node; zeros if unreachable.
  std::vector<double> grad(Var v) const;

  // Op-author interface.
  Var record(Tensor value, std::span<const Var> inputs, BackwardFn backward);
  std::vector<double>* grad_buffer(Var v);
  const Tensor& value_of(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad_of(std::size_t id) const { return nodes_[id].requires_grad; }

 private:
  struct Node {
    Tensor value;
    bool requires_grad = false;
    std::vector<double> grad;
    BackwardFn backward;
    Parameter* param = nullptr;
  };

  Var push(Node node);

  std::deque<Node> nodes_;
  bool consumed_ = false;
};

// ---- differentiable operations -------------------------------------------

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var square(Var a);
Var relu(Var a);
Var tanh(Var a);
Var clamp(Var a, double lo, double hi);

// m[n x k] + v[k] added to every row.
Var add_bias_rows(Var m, Var v);
// m[c x t] + v[c] added to every column.
Var add_bias_cols(Var m, Var v);

Var matmul(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, Shape shape);

Var sum(Var a);
Var mean(Var a);
// Arithmetic mean along `axis`; the axis is dropped from the result shape.
Var mean_pool(Var x, std::size_t axis);

// Softmax of x / temperature along `axis` of a 1-D or 2-D tensor.
Var softmax(Var x, std::size_t axis, double temperature = 1.0);
Var log_softmax(Var x, std::size_t axis, double temperature = 1.0);

// 2-D helpers.
Var concat(std::span<const Var> parts, std::size_t axis);
Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
Var gather_rows(Var table, std::span<const std::size_t> rows);
// out[i] = x[i, cols[i]]
Var pick(Var x, std::span<const std::size_t> cols);
// Each row divided by its Euclidean norm. Zero rows are degenerate input.
Var normalize_rows(Var x);

// Same-length dilated convolution over time: x[C_in x T], w[C_out x C_in x 3],
// zero padding of `dilation` on both ends.
Var conv1d_dilated(Var x, Var w, std::size_t dilation);

}  // namespace bp
