#pragma once

#include <random>
#include <string>
#include <vector>

#include "kecmrn/tensor.hpp"

namespace kecmrn {

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

template <typename T>
using ParamList = std::vector<NamedParam<T>>;

// Trainable leaf of shape [fan_in x fan_out], U(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
template <typename T>
Tensor<T> xavier_uniform(std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng);

// Trainable leaf drawn from U(-limit, limit).
template <typename T>
Tensor<T> uniform_param(Shape shape, double limit, std::mt19937_64& rng);

// Trainable leaf filled with `value`.
template <typename T>
Tensor<T> constant_param(Shape shape, T value);

template <typename T>
void zero_grads(const ParamList<T>& params) {
  for (const auto& p : params) {
    auto t = p.tensor;
    t.zero_grad();
  }
}

template <typename T>
std::size_t count_values(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor.numel();
  return n;
}

}  // namespace kecmrn
