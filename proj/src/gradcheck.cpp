#include "kecmrn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

#include "kecmrn/errors.hpp"

namespace kecmrn {

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

template <typename T>
GradCheckReport finite_diff_check(const std::function<Tensor<T>()>& loss_fn, const ParamList<T>& params, double eps,
                                  double tolerance) {
  if (!(eps > 0.0) || eps > 1e-2) throw ContractError("finite_diff_check: eps must lie in (0, 1e-2]");

  std::vector<std::vector<T>> analytic;
  {
    zero_grads(params);
    Tape<T> tape;
    RecordingScope<T> scope(tape);
    tape.backward(loss_fn());
    for (const auto& p : params) analytic.emplace_back(p.tensor.grad().begin(), p.tensor.grad().end());
  }

  NoGradScope<T> no_grad;
  auto eval = [&](std::uint64_t& digest) {
    DecisionTrace trace;
    const double value = static_cast<double>(loss_fn().item());
    digest = trace.digest();
    return value;
  };
  std::uint64_t baseline = 0;
  eval(baseline);

  GradCheckReport report;
  report.eps = eps;
  report.tolerance = tolerance;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T> tensor = params[pi].tensor;
    auto values = tensor.mutable_data();
    ParamCheck check;
    check.name = params[pi].name;
    check.coordinates = values.size();
    bool compared = false;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T saved = values[i];
      std::uint64_t up_digest = 0, down_digest = 0;
      values[i] = static_cast<T>(saved + eps);
      const double up = eval(up_digest);
      values[i] = static_cast<T>(saved - eps);
      const double down = eval(down_digest);
      values[i] = saved;
      if (up_digest != baseline || down_digest != baseline) {
        ++check.kinked;
        continue;
      }
      const double numeric = (up - down) / (2.0 * eps);
      const double a = static_cast<double>(analytic[pi][i]);
      const double err = relative_error(a, numeric);
      if (!compared || err > check.max_rel_error) {
        check.max_rel_error = err;
        check.worst_index = i;
        check.worst_analytic = a;
        check.worst_numeric = numeric;
        compared = true;
      }
    }
    report.kinked += check.kinked;
    report.max_rel_error = std::max(report.max_rel_error, check.max_rel_error);
    report.params.push_back(std::move(check));
  }
  report.pass = report.max_rel_error <= tolerance;
  return report;
}

std::string to_json(const GradCheckReport& report) {
  nlohmann::ordered_json j;
  j["pass"] = report.pass;
  j["eps"] = report.eps;
  j["tolerance"] = report.tolerance;
  j["max_rel_error"] = report.max_rel_error;
  j["kinked"] = report.kinked;
  auto& ps = j["params"] = nlohmann::ordered_json::array();
  for (const auto& p : report.params) {
    ps.push_back({{"name", p.name},
                  {"coordinates", p.coordinates},
                  {"max_rel_error", p.max_rel_error},
                  {"worst_index", p.worst_index},
                  {"analytic", p.worst_analytic},
                  {"numeric", p.worst_numeric},
                  {"kinked", p.kinked}});
  }
  return j.dump(2);
}

template GradCheckReport finite_diff_check<float>(const std::function<Tensor<float>()>&, const ParamList<float>&,
                                                  double, double);
template GradCheckReport finite_diff_check<double>(const std::function<Tensor<double>()>&, const ParamList<double>&,
                                                   double, double);

}  // namespace kecmrn
