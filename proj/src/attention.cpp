#include "kecmrn/attention.hpp"

#include <cmath>

namespace kecmrn {

template <typename T>
Linear<T> Linear<T>::init(std::size_t in, std::size_t out, std::mt19937_64& rng, bool with_bias) {
  Linear l;
  l.weight = xavier_uniform<T>(in, out, rng);
  if (with_bias) l.bias = constant_param<T>(Shape{out}, T{0});
  return l;
}

template <typename T>
Tensor<T> Linear<T>::operator()(const Tensor<T>& x) const {
  Tensor<T> y = matmul(x, weight);
  return bias.defined() ? add(y, bias) : y;
}

template <typename T>
void Linear<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".weight", weight});
  if (bias.defined()) out.push_back({prefix + ".bias", bias});
}

template <typename T>
LayerNormParams<T> LayerNormParams<T>::init(std::size_t width) {
  return LayerNormParams{constant_param<T>(Shape{width}, T{1}), constant_param<T>(Shape{width}, T{0})};
}

template <typename T>
void LayerNormParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".gamma", gamma});
  out.push_back({prefix + ".beta", beta});
}

template <typename T>
AttentionParams<T> AttentionParams<T>::init(std::size_t width, std::size_t heads, std::mt19937_64& rng) {
  if (heads == 0 || width % heads != 0) {
    throw ContractError("attention width " + std::to_string(width) + " is not divisible by " + std::to_string(heads) +
                        " heads");
  }
  AttentionParams p;
  p.heads = heads;
  p.head_dim = width / heads;
  p.query = xavier_uniform<T>(width, width, rng);
  p.key = xavier_uniform<T>(width, width, rng);
  p.value = xavier_uniform<T>(width, width, rng);
  p.output = xavier_uniform<T>(width, width, rng);
  return p;
}

template <typename T>
void AttentionParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".query", query});
  out.push_back({prefix + ".key", key});
  out.push_back({prefix + ".value", value});
  out.push_back({prefix + ".output", output});
}

template <typename T>
FfnParams<T> FfnParams<T>::init(std::size_t width, std::size_t inner_width, std::mt19937_64& rng) {
  if (inner_width == 0) throw ContractError("feed-forward inner width must be >= 1");
  FfnParams p;
  p.inner = Linear<T>::init(width, inner_width, rng);
  p.outer = Linear<T>::init(inner_width, width, rng);
  return p;
}

template <typename T>
void FfnParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  inner.collect(out, prefix + ".inner");
  outer.collect(out, prefix + ".outer");
}

template <typename T>
AttentionSublayer<T> AttentionSublayer<T>::init(std::size_t width, std::size_t heads, std::mt19937_64& rng) {
  auto attention = AttentionParams<T>::init(width, heads, rng);
  return AttentionSublayer{std::move(attention), LayerNormParams<T>::init(width)};
}

template <typename T>
void AttentionSublayer<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  attention.collect(out, prefix + ".attn");
  norm.collect(out, prefix + ".norm");
}

template <typename T>
FfnSublayer<T> FfnSublayer<T>::init(std::size_t width, std::size_t inner_width, std::mt19937_64& rng) {
  auto ffn = FfnParams<T>::init(width, inner_width, rng);
  return FfnSublayer{std::move(ffn), LayerNormParams<T>::init(width)};
}

template <typename T>
void FfnSublayer<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  ffn.collect(out, prefix + ".ffn");
  norm.collect(out, prefix + ".norm");
}

template <typename T>
Tensor<T> scaled_dot_product_attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v,
                                       const Mask& key_mask, Tensor<T>* weights) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != k.dim(1) || k.dim(0) != v.dim(0)) {
    throw DimensionError("attention extents: q " + shape_string(q.shape()) + ", k " + shape_string(k.shape()) + ", v " +
                         shape_string(v.shape()));
  }
  if (!key_mask.empty() && key_mask.size() != k.dim(0)) {
    throw DimensionError("attention key mask of " + std::to_string(key_mask.size()) + " flags for " +
                         std::to_string(k.dim(0)) + " keys");
  }
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(q.dim(1)));
  Tensor<T> scores = scale(matmul(q, transpose(k)), inv_sqrt);
  Tensor<T> attn = softmax_lastdim(scores, key_mask);
  if (weights) *weights = attn;
  return matmul(attn, v);
}

template <typename T>
Tensor<T> multi_head_attention(const AttentionParams<T>& p, const Tensor<T>& queries, const Tensor<T>& keys,
                               const Tensor<T>& values, const Mask& key_mask,
                               std::vector<Tensor<T>>* head_weights) {
  const std::size_t d = p.width();
  if (p.heads * p.head_dim != d) throw ContractError("attention params: heads * head_dim != width");
  for (const Tensor<T>* x : {&queries, &keys, &values}) {
    if (x->rank() != 2 || x->dim(1) != d) {
      throw DimensionError("multi_head_attention expects [n x " + std::to_string(d) + "] inputs, got " +
                           shape_string(x->shape()));
    }
  }
  if (keys.dim(0) != values.dim(0)) {
    throw DimensionError("multi_head_attention: keys " + shape_string(keys.shape()) + " vs values " +
                         shape_string(values.shape()));
  }
  const Tensor<T> qp = matmul(queries, p.query);
  const Tensor<T> kp = matmul(keys, p.key);
  const Tensor<T> vp = matmul(values, p.value);
  if (head_weights) head_weights->clear();
  std::vector<Tensor<T>> heads;
  heads.reserve(p.heads);
  for (std::size_t h = 0; h < p.heads; ++h) {
    const std::size_t lo = h * p.head_dim, hi = lo + p.head_dim;
    Tensor<T> w;
    heads.push_back(scaled_dot_product_attention(slice_cols(qp, lo, hi), slice_cols(kp, lo, hi),
                                                 slice_cols(vp, lo, hi), key_mask, head_weights ? &w : nullptr));
    if (head_weights) head_weights->push_back(w);
  }
  const Tensor<T> joined = p.heads == 1 ? heads.front() : concat_cols<T>(heads);
  return matmul(joined, p.output);
}

template <typename T>
Tensor<T> feed_forward(const FfnParams<T>& p, const Tensor<T>& x) {
  if (x.rank() != 2 || x.dim(1) != p.inner.in_features()) {
    throw DimensionError("feed_forward expects [n x " + std::to_string(p.inner.in_features()) + "], got " +
                         shape_string(x.shape()));
  }
  return p.outer(relu(p.inner(x)));
}

template <typename T>
Tensor<T> residual_norm(const Tensor<T>& x, const Tensor<T>& branch, const LayerNormParams<T>& norm,
                        const ForwardContext& ctx) {
  const double rate = ctx.active_dropout();
  const Tensor<T> kept = rate > 0.0 ? dropout(branch, rate, *ctx.rng) : branch;
  return norm(add(x, kept));
}

template <typename T>
Tensor<T> attend(const AttentionSublayer<T>& p, const Tensor<T>& x, const Tensor<T>& context, const Mask& context_mask,
                 const ForwardContext& ctx) {
  return sublayer(
      x, [&](const Tensor<T>& in) { return multi_head_attention(p.attention, in, context, context, context_mask); },
      p.norm, ctx);
}

template <typename T>
Tensor<T> feed(const FfnSublayer<T>& p, const Tensor<T>& x, const ForwardContext& ctx) {
  return sublayer(x, [&](const Tensor<T>& in) { return feed_forward(p.ffn, in); }, p.norm, ctx);
}

#define KECMRN_INSTANTIATE_ATTENTION(T)                                                                          \
  template struct Linear<T>;                                                                                     \
  template struct LayerNormParams<T>;                                                                            \
  template struct AttentionParams<T>;                                                                            \
  template struct FfnParams<T>;                                                                                  \
  template struct AttentionSublayer<T>;                                                                          \
  template struct FfnSublayer<T>;                                                                                \
  template Tensor<T> scaled_dot_product_attention(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                                  const Mask&, Tensor<T>*);                                      \
  template Tensor<T> multi_head_attention(const AttentionParams<T>&, const Tensor<T>&, const Tensor<T>&,         \
                                          const Tensor<T>&, const Mask&, std::vector<Tensor<T>>*);               \
  template Tensor<T> feed_forward(const FfnParams<T>&, const Tensor<T>&);                                        \
  template Tensor<T> residual_norm(const Tensor<T>&, const Tensor<T>&, const LayerNormParams<T>&,                \
                                   const ForwardContext&);                                                       \
  template Tensor<T> attend(const AttentionSublayer<T>&, const Tensor<T>&, const Tensor<T>&, const Mask&,        \
                            const ForwardContext&);                                                              \
  template Tensor<T> feed(const FfnSublayer<T>&, const Tensor<T>&, const ForwardContext&);

KECMRN_INSTANTIATE_ATTENTION(float)
KECMRN_INSTANTIATE_ATTENTION(double)

#undef KECMRN_INSTANTIATE_ATTENTION

}  // namespace kecmrn
