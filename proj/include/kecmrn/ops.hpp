#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "kecmrn/tensor.hpp"

namespace kecmrn {

// Keep-flags (1 = valid, 0 = masked) whose shape is a trailing suffix of the
// tensor it masks; e.g. a key mask of shape [n] applies to every row of an
// [n_q x n] score matrix. An empty mask keeps everything.
struct Mask {
  Shape shape;
  std::vector<std::uint8_t> keep;

  Mask() = default;
  explicit Mask(std::vector<std::uint8_t> flags) : shape{flags.size()}, keep(std::move(flags)) {}
  Mask(Shape s, std::vector<std::uint8_t> flags);

  static Mask all(std::size_t n) { return Mask(std::vector<std::uint8_t>(n, 1)); }

  bool empty() const noexcept { return keep.empty(); }
  std::size_t size() const noexcept { return keep.size(); }
  bool kept(std::size_t i) const { return keep.empty() || keep[i] != 0; }
  std::size_t count_kept() const;
};

// Additive offset applied to masked logits before the softmax.
inline constexpr double kMaskedLogit = -1e9;

// [.., m, k] x [k, n] or [.., m, k] x [.., k, n] (identical leading dims).
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

// Swaps the last two axes of a rank-2 tensor.
template <typename T>
Tensor<T> transpose(const Tensor<T>& a);

// Elementwise; `b` may also be a trailing-suffix shape broadcast over a's leading dims.
template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T>
Tensor<T> tanh(const Tensor<T>& x);

// Softmax over the last axis with max-subtraction. Masked positions come out
// exactly 0; a row with no kept position throws InvalidMaskError.
template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x, const Mask& mask = {});

template <typename T>
Tensor<T> log_softmax_lastdim(const Tensor<T>& x);

// Per-last-axis standardization with population variance, then gamma * x + beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps = 1e-6);

template <typename T>
Tensor<T> sum(const Tensor<T>& x);
template <typename T>
Tensor<T> mean(const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

// Row/column windows [begin, end) of a rank-2 tensor.
template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end);
template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end);

template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts);
template <typename T>
Tensor<T> concat_cols(std::span<const Tensor<T>> parts);

// Copies the indexed rows (repeats allowed); gradients scatter-add back.
template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> rows);

// Copy of `base` with rows `rows[i]` replaced by `src` row i. Indices must be unique.
template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& base, std::span<const std::size_t> rows, const Tensor<T>& src);

// Inverted dropout; identity when rate == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, std::mt19937_64& rng);

// -log softmax(logits)[target] for a logits vector of any shape holding C values.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::size_t target);

// Uniform double in [0, 1) from the top 53 bits; identical across standard libraries.
inline double uniform_unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace kecmrn
