#pragma once

// Central finite-difference gradient checks. These are test oracles: they
// share nothing with the backward closures beyond the forward functions.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "unmt/tensor.hpp"

namespace unmt {

template <typename T>
using TensorFn = std::function<Var<T>(Graph<T>&, Var<T>)>;

namespace detail {

inline void check_eps(double eps) {
  if (!(eps >= 1e-6 && eps <= 1e-3)) throw ContractError("finite_difference_check: eps must lie in [1e-6, 1e-3]");
}

template <typename T>
T scalar_value(Var<T> v) {
  if (v.size() != 1) {
    throw ContractError("finite_difference_check: function must be scalar, got " + shape_string(v.shape()));
  }
  return v.value()[0];
}

inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1.0, std::abs(analytic));
}

}  // namespace detail

// Max over coordinates of |analytic - central difference| / max(1, |analytic|)
// for the gradient of f at x.
template <typename T>
double finite_difference_check(const TensorFn<T>& f, const Shape& shape, const std::vector<T>& x,
                               double eps) {
  detail::check_eps(eps);
  std::vector<T> analytic;
  {
    Graph<T> g;
    Var<T> in = g.input(shape, x);
    Var<T> y = f(g, in);
    detail::scalar_value(y);
    g.backward(y);
    auto gr = in.grad();
    analytic.assign(x.size(), T(0));
    std::copy(gr.begin(), gr.end(), analytic.begin());
  }
  auto eval = [&](const std::vector<T>& point) {
    Graph<T> g(false);
    return static_cast<double>(detail::scalar_value(f(g, g.constant(shape, point))));
  };
  double worst = 0.0;
  std::vector<T> point = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    point[i] = x[i] + static_cast<T>(eps);
    const double up = eval(point);
    point[i] = x[i] - static_cast<T>(eps);
    const double down = eval(point);
    point[i] = x[i];
    worst = std::max(worst, detail::relative_error(analytic[i], (up - down) / (2.0 * eps)));
  }
  return worst;
}

// Same check, taken with respect to every value of the given parameters.
// loss builds the full forward pass in the supplied graph.
template <typename T>
double finite_difference_check_params(const std::function<Var<T>(Graph<T>&)>& loss,
                                      const std::vector<Parameter<T>*>& params, double eps) {
  detail::check_eps(eps);
  for (Parameter<T>* p : params) p->grad.clear();
  {
    Graph<T> g;
    Var<T> y = loss(g);
    detail::scalar_value(y);
    g.backward(y);
  }
  auto eval = [&]() {
    Graph<T> g(false);
    return static_cast<double>(detail::scalar_value(loss(g)));
  };
  double worst = 0.0;
  for (Parameter<T>* p : params) {
    std::vector<T> analytic = p->grad;
    analytic.resize(p->size(), T(0));
    for (std::size_t i = 0; i < p->size(); ++i) {
      const T saved = p->value[i];
      p->value[i] = saved + static_cast<T>(eps);
      const double up = eval();
      p->value[i] = saved - static_cast<T>(eps);
      const double down = eval();
      p->value[i] = saved;
      worst = std::max(worst, detail::relative_error(analytic[i], (up - down) / (2.0 * eps)));
    }
  }
  return worst;
}

}  // namespace unmt
