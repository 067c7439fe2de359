#pragma once

#include <random>
#include <string>
#include <vector>

#include "kecmrn/errors.hpp"
#include "kecmrn/ops.hpp"
#include "kecmrn/params.hpp"

namespace kecmrn {

struct ForwardContext {
  bool training = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  double active_dropout() const { return training && rng != nullptr ? dropout : 0.0; }
};

// Row-vector affine map x W (+ b); W is [in x out].
template <typename T>
struct Linear {
  Tensor<T> weight;
  Tensor<T> bias;  // undefined when the map has no bias

  static Linear init(std::size_t in, std::size_t out, std::mt19937_64& rng, bool with_bias = true);
  Tensor<T> operator()(const Tensor<T>& x) const;
  void collect(ParamList<T>& out, const std::string& prefix) const;
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
};

template <typename T>
struct LayerNormParams {
  Tensor<T> gamma;
  Tensor<T> beta;
  double eps = 1e-6;

  static LayerNormParams init(std::size_t width);
  Tensor<T> operator()(const Tensor<T>& x) const { return layer_norm(x, gamma, beta, eps); }
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

// Column block i of `query`/`key`/`value` (columns [i*head_dim, (i+1)*head_dim))
// is the per-head projection of head i; `output` maps the concatenated heads
// back to the model width.
template <typename T>
struct AttentionParams {
  std::size_t heads = 1;
  std::size_t head_dim = 1;
  Tensor<T> query;
  Tensor<T> key;
  Tensor<T> value;
  Tensor<T> output;

  static AttentionParams init(std::size_t width, std::size_t heads, std::mt19937_64& rng);
  std::size_t width() const { return query.dim(0); }
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
struct FfnParams {
  Linear<T> inner;
  Linear<T> outer;

  static FfnParams init(std::size_t width, std::size_t inner_width, std::mt19937_64& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
struct AttentionSublayer {
  AttentionParams<T> attention;
  LayerNormParams<T> norm;

  static AttentionSublayer init(std::size_t width, std::size_t heads, std::mt19937_64& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
struct FfnSublayer {
  FfnParams<T> ffn;
  LayerNormParams<T> norm;

  static FfnSublayer init(std::size_t width, std::size_t inner_width, std::mt19937_64& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

// softmax(q k^T / sqrt(d_k)) v with masked keys excluded. `weights`, when
// given, receives the [n_q x n] attention matrix.
template <typename T>
Tensor<T> scaled_dot_product_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                       const Mask& key_mask = {}, Tensor<T>* weights = nullptr);

// Concat(head_1..head_h) W_O with head_i = attention(Q W_i^Q, K W_i^K, V W_i^V).
template <typename T>
Tensor<T> multi_head_attention(const AttentionParams<T>& p, const Tensor<T>& queries, const Tensor<T>& keys,
                               const Tensor<T>& values, const Mask& key_mask = {},
                               std::vector<Tensor<T>>* head_weights = nullptr);

// max(0, x W_1 + b_1) W_2 + b_2, position-wise.
template <typename T>
Tensor<T> feed_forward(const FfnParams<T>& p, const Tensor<T>& x);

// layer_norm(x + dropout(branch)), the post-norm residual wrapper.
template <typename T>
Tensor<T> residual_norm(const Tensor<T>& x, const Tensor<T>& branch, const LayerNormParams<T>& norm,
                        const ForwardContext& ctx);

template <typename T, typename Unit>
Tensor<T> sublayer(const Tensor<T>& x, Unit&& unit, const LayerNormParams<T>& norm, const ForwardContext& ctx) {
  Tensor<T> branch = unit(x);
  if (branch.shape() != x.shape()) {
    throw DimensionError("sublayer: unit output " + shape_string(branch.shape()) + " differs from input " +
                         shape_string(x.shape()));
  }
  return residual_norm(x, branch, norm, ctx);
}

// Attention sublayer with `x` as queries and `context` as keys and values.
template <typename T>
Tensor<T> attend(const AttentionSublayer<T>& p, const Tensor<T>& x, const Tensor<T>& context, const Mask& context_mask,
                 const ForwardContext& ctx);

template <typename T>
Tensor<T> feed(const FfnSublayer<T>& p, const Tensor<T>& x, const ForwardContext& ctx);

}  // namespace kecmrn
