#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kecmrn/params.hpp"
#include "kecmrn/tensor.hpp"

namespace kecmrn {

struct ParamCheck {
  std::string name;
  std::size_t coordinates = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t kinked = 0;  // coordinates excluded because ±eps changed a branch decision
};

struct GradCheckReport {
  std::vector<ParamCheck> params;
  double eps = 0.0;
  double tolerance = 0.0;
  double max_rel_error = 0.0;
  std::size_t kinked = 0;
  bool pass = false;
};

// |a - n| / max(|a|, |n|, 1e-8)
double relative_error(double analytic, double numeric);

// Compares the tape gradient of `loss_fn` with central differences
// (f(x + eps) - f(x - eps)) / (2 eps) at every coordinate of every parameter.
// `loss_fn` must rebuild the computation from the current parameter values
// and return a scalar. A coordinate whose +eps or -eps evaluation takes a
// different DecisionTrace than the unperturbed one straddles a
// non-differentiable point; it is counted in `kinked` and not compared.
template <typename T>
GradCheckReport finite_diff_check(const std::function<Tensor<T>()>& loss_fn, const ParamList<T>& params, double eps,
                                  double tolerance);

std::string to_json(const GradCheckReport& report);

}  // namespace kecmrn
