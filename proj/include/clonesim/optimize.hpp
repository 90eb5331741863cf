#pragma once

#include <cmath>
#include <concepts>

#include "clonesim/errors.hpp"

namespace clonesim {

struct ScalarOptimum {
  double argmin;
  double value;
  int evaluations;
};

/// Golden-section search for the minimum of a unimodal `f` on [lo, hi],
/// stopping once the bracket is narrower than `tol`.
template <std::invocable<double> F>
ScalarOptimum golden_section_minimize(F&& f, double lo, double hi, double tol = 1e-6) {
  if (!(lo < hi)) throw ConfigError("golden_section_minimize: empty bracket");
  constexpr double inv_phi = 0.6180339887498949;  // (√5 - 1)/2
  double a = lo;
  double b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  int evals = 2;
  while (b - a > tol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
    ++evals;
  }
  const double x = 0.5 * (a + b);
  return {x, f(x), evals + 1};
}

template <std::invocable<double> F>
ScalarOptimum golden_section_maximize(F&& f, double lo, double hi, double tol = 1e-6) {
  auto r = golden_section_minimize([&](double x) { return -f(x); }, lo, hi, tol);
  r.value = -r.value;
  return r;
}

}  // namespace clonesim
