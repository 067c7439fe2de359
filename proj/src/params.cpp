#include "kecmrn/params.hpp"

#include <cmath>

#include "kecmrn/ops.hpp"

namespace kecmrn {

template <typename T>
Tensor<T> xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<T> values(fan_in * fan_out);
  for (auto& v : values) v = static_cast<T>((2.0 * uniform_unit(rng) - 1.0) * limit);
  Tensor<T> t(Shape{fan_in, fan_out}, std::move(values));
  t.set_requires_grad(true);
  return t;
}

template <typename T>
Tensor<T> uniform_param(Shape shape, double limit, std::mt19937_64& rng) {
  std::vector<T> values(shape_numel(shape));
  for (auto& v : values) v = static_cast<T>((2.0 * uniform_unit(rng) - 1.0) * limit);
  Tensor<T> t(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

template <typename T>
Tensor<T> constant_param(Shape shape, T value) {
  Tensor<T> t(std::move(shape), value);
  t.set_requires_grad(true);
  return t;
}

template Tensor<float> xavier_uniform<float>(std::size_t, std::size_t, std::mt19937_64&);
template Tensor<double> xavier_uniform<double>(std::size_t, std::size_t, std::mt19937_64&);
template Tensor<float> uniform_param<float>(Shape, double, std::mt19937_64&);
template Tensor<double> uniform_param<double>(Shape, double, std::mt19937_64&);
template Tensor<float> constant_param<float>(Shape, float);
template Tensor<double> constant_param<double>(Shape, double);

}  // namespace kecmrn
