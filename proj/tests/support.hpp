#pragma once

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <span>
#include <vector>

#include "kecmrn/ops.hpp"
#include "kecmrn/params.hpp"
#include "kecmrn/tensor.hpp"

namespace kecmrn::testing {

using D = double;

inline Tensor<D> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0,
                               bool trainable = false) {
  std::vector<D> v(shape_numel(shape));
  for (auto& x : v) x = lo + (hi - lo) * uniform_unit(rng);
  Tensor<D> t(std::move(shape), std::move(v));
  if (trainable) t.set_requires_grad(true);
  return t;
}

inline std::size_t random_index(std::mt19937_64& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform_unit(rng) * static_cast<double>(n)) % n;
}

inline Tensor<D> identity(std::size_t n) {
  Tensor<D> t(Shape{n, n});
  for (std::size_t i = 0; i < n; ++i) t.mutable_data()[i * n + i] = 1.0;
  return t;
}

inline void expect_values_near(const Tensor<D>& t, const std::vector<D>& expected, double tol) {
  ASSERT_EQ(t.numel(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(t.at(i), expected[i], tol) << "index " << i;
}

template <typename T>
bool bitwise_equal(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    T x = a.at(i), y = b.at(i);
    if (std::memcmp(&x, &y, sizeof(T)) != 0) return false;
  }
  return true;
}

inline double max_abs_diff(const Tensor<D>& a, const Tensor<D>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.numel(); ++i) m = std::max(m, std::abs(a.at(i) - b.at(i)));
  return m;
}

// Rows of x reordered so that output row i is input row perm[i].
inline Tensor<D> permute_rows(const Tensor<D>& x, const std::vector<std::size_t>& perm) {
  return gather_rows(x, std::span<const std::size_t>(perm));
}

inline std::vector<std::size_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[random_index(rng, i)]);
  return p;
}

}  // namespace kecmrn::testing
