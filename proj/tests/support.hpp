#pragma once

// Shared test helpers: seeded tensors and central-difference gradient checks.

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bridgeprompt/autodiff.hpp"
#include "bridgeprompt/random.hpp"

namespace bptest {

using bp::Parameter;
using bp::Shape;
using bp::Tape;
using bp::Tensor;
using bp::Var;

inline Tensor random_tensor(Shape shape, bp::Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.values) v = rng.uniform(lo, hi);
  return t;
}

// ||a - n|| / max(||a||, ||n||, 1e-12) over the concatenated gradient.
inline double relative_error(const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
}

inline constexpr double kStep = 1e-5;

// Checks d f / d inputs for an op. A non-scalar output is reduced with fixed
// random weights so every output entry matters.
inline double check_op(std::vector<Tensor> inputs, const std::function<Var(std::vector<Var>&)>& f,
                       std::uint64_t seed = 99) {
  auto loss_of = [&](Tape& tape, std::vector<Var>& vars) {
    vars.clear();
    for (const auto& t : inputs) vars.push_back(tape.variable(t));
    Var out = f(vars);
    if (out.value().size() == 1) return out;
    bp::Rng rng(seed);
    auto w = tape.constant(random_tensor(out.shape(), rng));
    return bp::sum(bp::mul(out, w));
  };
  std::vector<double> analytic, numeric;
  {
    Tape tape;
    std::vector<Var> vars;
    auto loss = loss_of(tape, vars);
    tape.backward(loss);
    for (const auto& v : vars) {
      auto g = tape.grad(v);
      analytic.insert(analytic.end(), g.begin(), g.end());
    }
  }
  for (auto& t : inputs) {
    for (auto& x : t.values) {
      const double keep = x;
      x = keep + kStep;
      double up, down;
      {
        Tape tape;
        std::vector<Var> vars;
        up = loss_of(tape, vars).item();
      }
      x = keep - kStep;
      {
        Tape tape;
        std::vector<Var> vars;
        down = loss_of(tape, vars).item();
      }
      x = keep;
      numeric.push_back((up - down) / (2 * kStep));
    }
  }
  return relative_error(analytic, numeric);
}

// Checks d loss / d params for a module; `loss` builds a scalar on the tape.
inline double check_params(const std::vector<Parameter*>& params, const std::function<Var(Tape&)>& loss) {
  for (auto* p : params) p->zero_grad();
  {
    Tape tape;
    tape.backward(loss(tape));
  }
  std::vector<double> analytic, numeric;
  for (auto* p : params) analytic.insert(analytic.end(), p->grad.begin(), p->grad.end());
  for (auto* p : params) {
    for (auto& x : p->value.values) {
      const double keep = x;
      x = keep + kStep;
      double up, down;
      {
        Tape tape;
        up = loss(tape).item();
      }
      x = keep - kStep;
      {
        Tape tape;
        down = loss(tape).item();
      }
      x = keep;
      numeric.push_back((up - down) / (2 * kStep));
    }
  }
  for (auto* p : params) p->zero_grad();
  return relative_error(analytic, numeric);
}

}  // namespace bptest
