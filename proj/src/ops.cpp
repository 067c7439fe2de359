#include "kecmrn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "kecmrn/errors.hpp"

namespace kecmrn {

Mask::Mask(Shape s, std::vector<std::uint8_t> flags) : shape(std::move(s)), keep(std::move(flags)) {
  if (shape_numel(shape) != keep.size()) {
    throw DimensionError("mask shape " + shape_string(shape) + " does not match " + std::to_string(keep.size()) +
                         " flags");
  }
}

std::size_t Mask::count_kept() const {
  if (keep.empty()) return 0;
  return static_cast<std::size_t>(std::count_if(keep.begin(), keep.end(), [](std::uint8_t k) { return k != 0; }));
}

namespace {

template <typename T>
using NodeT = detail::Node<T>;

// Creates the output tensor and, when recording is active and any input needs
// a gradient, appends it to the tape. `grad_fn(out_grad)` accumulates into the
// inputs' gradient buffers.
template <typename T, typename F>
Tensor<T> emit(Shape shape, std::vector<T> values, std::initializer_list<const Tensor<T>*> inputs, F grad_fn) {
  auto node = std::make_shared<NodeT<T>>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  Tape<T>* tape = active_tape<T>();
  if (tape != nullptr) {
    bool needs = false;
    for (const Tensor<T>* in : inputs) needs = needs || in->requires_grad();
    if (needs) {
      std::vector<std::shared_ptr<NodeT<T>>> in_nodes;
      in_nodes.reserve(inputs.size());
      for (const Tensor<T>* in : inputs) in_nodes.push_back(in->node());
      NodeT<T>* out = node.get();
      tape->record(std::move(in_nodes), node, [out, grad_fn = std::move(grad_fn)]() { grad_fn(out->grad); });
    }
  }
  return Tensor<T>::from_node(std::move(node));
}

// Gradient buffer of an input, or nullptr when it does not need one.
template <typename T>
std::vector<T>* grad_of(NodeT<T>* n) {
  return n->requires_grad ? &n->grad_buffer() : nullptr;
}

template <typename T>
void require_rank2(const Tensor<T>& x, const char* op) {
  if (x.rank() != 2) throw DimensionError(std::string(op) + " expects a rank-2 tensor, got " + shape_string(x.shape()));
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// C[m,n] (+)= A[m,k] B[k,n]
template <typename T>
void gemm_nn(const T* a, const T* b, T* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T{0}) continue;
      const T* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// dA[m,k] += G[m,n] B[k,n]^T
template <typename T>
void gemm_nt(const T* g, const T* b, T* da, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T* brow = b + p * n;
      T acc{0};
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      da[i * k + p] += acc;
    }
  }
}

// dB[k,n] += A[m,k]^T G[m,n]
template <typename T>
void gemm_tn(const T* a, const T* g, T* db, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      if (av == T{0}) continue;
      T* drow = db + p * n;
      for (std::size_t j = 0; j < n; ++j) drow[j] += av * grow[j];
    }
  }
}

template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary(const Tensor<T>& x, Fwd fwd, Deriv deriv) {
  std::vector<T> out(x.numel());
  const auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(xs[i]);
  auto* xn = x.node().get();
  return emit<T>(x.shape(), std::move(out), {&x}, [xn, deriv](const std::vector<T>& g) {
    if (auto* dx = grad_of(xn)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i] * deriv(xn->value[i]);
    }
  });
}

// Shared implementation of add/sub/mul with trailing-suffix broadcast of b.
enum class Binary { kAdd, kSub, kMul };

template <typename T>
Tensor<T> binary(const Tensor<T>& a, const Tensor<T>& b, Binary kind, const char* name) {
  if (!is_suffix(b.shape(), a.shape())) {
    throw DimensionError(std::string(name) + ": shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) +
                         " are not compatible");
  }
  const std::size_t n = a.numel();
  const std::size_t nb = b.numel();
  const auto as = a.data();
  const auto bs = b.data();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T bv = bs[i % nb];
    switch (kind) {
      case Binary::kAdd: out[i] = as[i] + bv; break;
      case Binary::kSub: out[i] = as[i] - bv; break;
      case Binary::kMul: out[i] = as[i] * bv; break;
    }
  }
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return emit<T>(a.shape(), std::move(out), {&a, &b}, [an, bn, kind, nb](const std::vector<T>& g) {
    if (auto* da = grad_of(an)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        (*da)[i] += kind == Binary::kMul ? g[i] * bn->value[i % nb] : g[i];
      }
    }
    if (auto* db = grad_of(bn)) {
      for (std::size_t i = 0; i < g.size(); ++i) {
        switch (kind) {
          case Binary::kAdd: (*db)[i % nb] += g[i]; break;
          case Binary::kSub: (*db)[i % nb] -= g[i]; break;
          case Binary::kMul: (*db)[i % nb] += g[i] * an->value[i]; break;
        }
      }
    }
  });
}

}  // namespace

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() < 2 || b.rank() < 2) {
    throw DimensionError("matmul needs rank >= 2 operands, got " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()));
  }
  const std::size_t m = a.dim(a.rank() - 2);
  const std::size_t k = a.dim(a.rank() - 1);
  const std::size_t kb = b.dim(b.rank() - 2);
  const std::size_t n = b.dim(b.rank() - 1);
  const bool shared_b = b.rank() == 2;
  const bool same_lead = std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin(), b.shape().end() - 2);
  if (k != kb || (!shared_b && (a.rank() != b.rank() || !same_lead))) {
    throw DimensionError("matmul shape mismatch: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
  }
  const std::size_t batch = a.numel() / (m * k);
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  std::vector<T> out(batch * m * n, T{0});
  const T* ap = a.data().data();
  const T* bp = b.data().data();
  for (std::size_t s = 0; s < batch; ++s) {
    gemm_nn(ap + s * m * k, bp + (shared_b ? 0 : s * k * n), out.data() + s * m * n, m, k, n);
  }
  auto* an = a.node().get();
  auto* bn = b.node().get();
  return emit<T>(std::move(out_shape), std::move(out), {&a, &b},
                 [an, bn, batch, m, k, n, shared_b](const std::vector<T>& g) {
                   auto* da = grad_of(an);
                   auto* db = grad_of(bn);
                   for (std::size_t s = 0; s < batch; ++s) {
                     const T* gs = g.data() + s * m * n;
                     const std::size_t boff = shared_b ? 0 : s * k * n;
                     if (da) gemm_nt(gs, bn->value.data() + boff, da->data() + s * m * k, m, k, n);
                     if (db) gemm_tn(an->value.data() + s * m * k, gs, db->data() + boff, m, k, n);
                   }
                 });
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a) {
  require_rank2(a, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<T> out(r * c);
  const auto as = a.data();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = as[i * c + j];
  auto* an = a.node().get();
  return emit<T>(Shape{c, r}, std::move(out), {&a}, [an, r, c](const std::vector<T>& g) {
    if (auto* da = grad_of(an)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*da)[i * c + j] += g[j * r + i];
    }
  });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::kAdd, "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::kSub, "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary(a, b, Binary::kMul, "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary(a, [factor](T v) { return v * factor; }, [factor](T) { return factor; });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  if (DecisionTrace::active()) {
    for (T v : x.data()) DecisionTrace::note(v > T{0});
  }
  return unary(x, [](T v) { return v > T{0} ? v : T{0}; }, [](T v) { return v > T{0} ? T{1} : T{0}; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  auto fwd = [](T v) { return v >= T{0} ? T{1} / (T{1} + std::exp(-v)) : std::exp(v) / (T{1} + std::exp(v)); };
  return unary(x, fwd, [fwd](T v) {
    const T s = fwd(v);
    return s * (T{1} - s);
  });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary(x, [](T v) { return std::tanh(v); }, [](T v) {
    const T t = std::tanh(v);
    return T{1} - t * t;
  });
}

template <typename T>
Tensor<T> softmax_lastdim(const Tensor<T>& x, const Mask& mask) {
  if (x.rank() == 0) throw DimensionError("softmax_lastdim on a scalar");
  if (!mask.empty() && !is_suffix(mask.shape, x.shape())) {
    throw DimensionError("mask " + shape_string(mask.shape) + " does not broadcast to " + shape_string(x.shape()));
  }
  const std::size_t width = x.cols();
  const std::size_t n = x.numel();
  const std::size_t nm = mask.empty() ? 1 : mask.size();
  const auto xs = x.data();
  std::vector<T> out(n);
  for (std::size_t row = 0; row * width < n; ++row) {
    const std::size_t base = row * width;
    T hi = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < width; ++j) {
      if (mask.kept((base + j) % nm)) {
        hi = std::max(hi, xs[base + j]);
        any = true;
      }
    }
    if (!any) throw InvalidMaskError("softmax_lastdim: row " + std::to_string(row) + " is fully masked");
    T total{0};
    for (std::size_t j = 0; j < width; ++j) {
      const T offset = mask.kept((base + j) % nm) ? T{0} : static_cast<T>(kMaskedLogit);
      const T e = std::exp(xs[base + j] + offset - hi);
      out[base + j] = e;
      total += e;
    }
    for (std::size_t j = 0; j < width; ++j) out[base + j] /= total;
  }
  auto* xn = x.node().get();
  auto holder = std::make_shared<std::vector<T>>(out);
  return emit<T>(x.shape(), std::move(out), {&x}, [xn, holder, width](const std::vector<T>& g) {
    if (auto* dx = grad_of(xn)) {
      const auto& y = *holder;
      for (std::size_t base = 0; base < g.size(); base += width) {
        T dot{0};
        for (std::size_t j = 0; j < width; ++j) dot += y[base + j] * g[base + j];
        for (std::size_t j = 0; j < width; ++j) (*dx)[base + j] += y[base + j] * (g[base + j] - dot);
      }
    }
  });
}

template <typename T>
Tensor<T> log_softmax_lastdim(const Tensor<T>& x) {
  if (x.rank() == 0) throw DimensionError("log_softmax_lastdim on a scalar");
  const std::size_t width = x.cols();
  const auto xs = x.data();
  std::vector<T> out(x.numel());
  for (std::size_t base = 0; base < out.size(); base += width) {
    const T hi = *std::max_element(xs.begin() + base, xs.begin() + base + width);
    T total{0};
    for (std::size_t j = 0; j < width; ++j) total += std::exp(xs[base + j] - hi);
    const T lse = hi + std::log(total);
    for (std::size_t j = 0; j < width; ++j) out[base + j] = xs[base + j] - lse;
  }
  auto* xn = x.node().get();
  auto holder = std::make_shared<std::vector<T>>(out);
  return emit<T>(x.shape(), std::move(out), {&x}, [xn, holder, width](const std::vector<T>& g) {
    if (auto* dx = grad_of(xn)) {
      const auto& y = *holder;
      for (std::size_t base = 0; base < g.size(); base += width) {
        T gsum{0};
        for (std::size_t j = 0; j < width; ++j) gsum += g[base + j];
        for (std::size_t j = 0; j < width; ++j) (*dx)[base + j] += g[base + j] - std::exp(y[base + j]) * gsum;
      }
    }
  });
}

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, double eps) {
  if (x.rank() == 0) throw DimensionError("layer_norm on a scalar");
  const std::size_t d = x.cols();
  if (gamma.numel() != d || beta.numel() != d) {
    throw DimensionError("layer_norm: width " + std::to_string(d) + " vs gamma " + shape_string(gamma.shape()) +
                         ", beta " + shape_string(beta.shape()));
  }
  if (!(eps > 0)) throw ContractError("layer_norm: eps must be positive");
  const auto xs = x.data();
  const auto gs = gamma.data();
  const auto bs = beta.data();
  const std::size_t rows = x.numel() / d;
  auto xhat = std::make_shared<std::vector<T>>(x.numel());
  auto inv_std = std::make_shared<std::vector<T>>(rows);
  std::vector<T> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t base = r * d;
    T mu{0};
    for (std::size_t j = 0; j < d; ++j) mu += xs[base + j];
    mu /= static_cast<T>(d);
    T var{0};
    for (std::size_t j = 0; j < d; ++j) var += (xs[base + j] - mu) * (xs[base + j] - mu);
    var /= static_cast<T>(d);
    const T rstd = T{1} / std::sqrt(var + static_cast<T>(eps));
    (*inv_std)[r] = rstd;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (xs[base + j] - mu) * rstd;
      (*xhat)[base + j] = h;
      out[base + j] = gs[j] * h + bs[j];
    }
  }
  auto* xn = x.node().get();
  auto* gn = gamma.node().get();
  auto* bn = beta.node().get();
  return emit<T>(x.shape(), std::move(out), {&x, &gamma, &beta},
                 [xn, gn, bn, xhat, inv_std, d, rows](const std::vector<T>& g) {
                   auto* dx = grad_of(xn);
                   auto* dg = grad_of(gn);
                   auto* db = grad_of(bn);
                   std::vector<T> dh(d);
                   for (std::size_t r = 0; r < rows; ++r) {
                     const std::size_t base = r * d;
                     T mean_dh{0}, mean_dh_h{0};
                     for (std::size_t j = 0; j < d; ++j) {
                       const T gj = g[base + j];
                       const T h = (*xhat)[base + j];
                       if (dg) (*dg)[j] += gj * h;
                       if (db) (*db)[j] += gj;
                       dh[j] = gj * gn->value[j];
                       mean_dh += dh[j];
                       mean_dh_h += dh[j] * h;
                     }
                     if (!dx) continue;
                     mean_dh /= static_cast<T>(d);
                     mean_dh_h /= static_cast<T>(d);
                     const T rstd = (*inv_std)[r];
                     for (std::size_t j = 0; j < d; ++j) {
                       (*dx)[base + j] += rstd * (dh[j] - mean_dh - (*xhat)[base + j] * mean_dh_h);
                     }
                   }
                 });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const auto xs = x.data();
  const T total = std::accumulate(xs.begin(), xs.end(), T{0});
  auto* xn = x.node().get();
  return emit<T>(Shape{}, std::vector<T>{total}, {&x}, [xn](const std::vector<T>& g) {
    if (auto* dx = grad_of(xn)) {
      for (auto& v : *dx) v += g[0];
    }
  });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  return scale(sum(x), T{1} / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape " + shape_string(x.shape()) + " to " + shape_string(shape));
  }
  std::vector<T> out(x.data().begin(), x.data().end());
  auto* xn = x.node().get();
  return emit<T>(std::move(shape), std::move(out), {&x}, [xn](const std::vector<T>& g) {
    if (auto* dx = grad_of(xn)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i];
    }
  });
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_rows");
  if (begin >= end || end > x.dim(0)) {
    throw DimensionError("slice_rows [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                         shape_string(x.shape()));
  }
  const std::size_t c = x.dim(1);
  std::vector<T> out(x.data().begin() + begin * c, x.data().begin() + end * c);
  auto* xn = x.node().get();
  return emit<T>(Shape{end - begin, c}, std::move(out), {&x}, [xn, begin, c](const std::vector<T>& g) {
    if (auto* dx = grad_of(xn)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*dx)[begin * c + i] += g[i];
    }
  });
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t begin, std::size_t end) {
  require_rank2(x, "slice_cols");
  if (begin >= end || end > x.dim(1)) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) + ") of " +
                         shape_string(x.shape()));
  }
  const std::size_t r = x.dim(0), c = x.dim(1), w = end - begin;
  const auto xs = x.data();
  std::vector<T> out(r * w);
  for (std::size_t i = 0; i < r; ++i)
    std::copy_n(xs.begin() + i * c + begin, w, out.begin() + i * w);
  auto* xn = x.node().get();
  return emit<T>(Shape{r, w}, std::move(out), {&x}, [xn, r, c, w, begin](const std::vector<T>& g) {
    if (auto* dx = grad_of(xn)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < w; ++j) (*dx)[i * c + begin + j] += g[i * w + j];
    }
  });
}

namespace {

template <typename T>
Tensor<T> concat_impl(std::span<const Tensor<T>> parts, bool along_rows) {
  if (parts.empty()) throw ContractError("concat of zero tensors");
  for (const auto& p : parts) require_rank2(p, "concat");
  std::size_t rows = 0, cols = 0;
  for (const auto& p : parts) {
    if (along_rows) {
      if (p.dim(1) != parts[0].dim(1))
        throw DimensionError("concat_rows: " + shape_string(p.shape()) + " vs " + shape_string(parts[0].shape()));
      rows += p.dim(0);
    } else {
      if (p.dim(0) != parts[0].dim(0))
        throw DimensionError("concat_cols: " + shape_string(p.shape()) + " vs " + shape_string(parts[0].shape()));
      cols += p.dim(1);
    }
  }
  if (along_rows) cols = parts[0].dim(1); else rows = parts[0].dim(0);

  std::vector<T> out(rows * cols);
  std::vector<NodeT<T>*> nodes;
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const auto ps = p.data();
    if (along_rows) {
      std::copy(ps.begin(), ps.end(), out.begin() + offset * cols);
      offset += p.dim(0);
    } else {
      const std::size_t w = p.dim(1);
      for (std::size_t i = 0; i < rows; ++i) std::copy_n(ps.begin() + i * w, w, out.begin() + i * cols + offset);
      offset += w;
    }
    nodes.push_back(p.node().get());
  }

  auto node = std::make_shared<NodeT<T>>();
  node->shape = Shape{rows, cols};
  node->value = std::move(out);
  Tape<T>* tape = active_tape<T>();
  const bool needs = tape && std::any_of(parts.begin(), parts.end(), [](const Tensor<T>& p) { return p.requires_grad(); });
  if (needs) {
    std::vector<std::shared_ptr<NodeT<T>>> in_nodes;
    for (const auto& p : parts) in_nodes.push_back(p.node());
    NodeT<T>* outp = node.get();
    tape->record(std::move(in_nodes), node, [outp, nodes, along_rows, rows, cols]() {
      const auto& g = outp->grad;
      std::size_t off = 0;
      for (NodeT<T>* n : nodes) {
        const std::size_t pr = n->shape[0], pc = n->shape[1];
        if (auto* dp = grad_of(n)) {
          if (along_rows) {
            for (std::size_t i = 0; i < pr * pc; ++i) (*dp)[i] += g[off * cols + i];
          } else {
            for (std::size_t i = 0; i < rows; ++i)
              for (std::size_t j = 0; j < pc; ++j) (*dp)[i * pc + j] += g[i * cols + off + j];
          }
        }
        off += along_rows ? pr : pc;
      }
    });
  }
  return Tensor<T>::from_node(std::move(node));
}

}  // namespace

template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts) {
  return concat_impl(parts, true);
}

template <typename T>
Tensor<T> concat_cols(std::span<const Tensor<T>> parts) {
  return concat_impl(parts, false);
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> rows) {
  require_rank2(x, "gather_rows");
  if (rows.empty()) throw ContractError("gather_rows with no indices");
  const std::size_t n = x.dim(0), c = x.dim(1);
  for (std::size_t r : rows) {
    if (r >= n) throw ContractError("gather_rows: index " + std::to_string(r) + " out of range for " + shape_string(x.shape()));
  }
  const auto xs = x.data();
  std::vector<T> out(rows.size() * c);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(xs.begin() + rows[i] * c, c, out.begin() + i * c);
  auto* xn = x.node().get();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return emit<T>(Shape{rows.size(), c}, std::move(out), {&x}, [xn, idx = std::move(idx), c](const std::vector<T>& g) {
    if (auto* dx = grad_of(xn)) {
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t j = 0; j < c; ++j) (*dx)[idx[i] * c + j] += g[i * c + j];
    }
  });
}

template <typename T>
Tensor<T> scatter_rows(const Tensor<T>& base, std::span<const std::size_t> rows, const Tensor<T>& src) {
  require_rank2(base, "scatter_rows");
  require_rank2(src, "scatter_rows");
  const std::size_t n = base.dim(0), c = base.dim(1);
  if (src.dim(0) != rows.size() || src.dim(1) != c) {
    throw DimensionError("scatter_rows: source " + shape_string(src.shape()) + " for " + std::to_string(rows.size()) +
                         " rows of " + shape_string(base.shape()));
  }
  std::vector<std::uint8_t> hit(n, 0);
  for (std::size_t r : rows) {
    if (r >= n) throw ContractError("scatter_rows: index " + std::to_string(r) + " out of range for " + shape_string(base.shape()));
    if (hit[r]) throw ContractError("scatter_rows: duplicate index " + std::to_string(r));
    hit[r] = 1;
  }
  std::vector<T> out(base.data().begin(), base.data().end());
  const auto ss = src.data();
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(ss.begin() + i * c, c, out.begin() + rows[i] * c);
  auto* bn = base.node().get();
  auto* sn = src.node().get();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return emit<T>(base.shape(), std::move(out), {&base, &src},
                 [bn, sn, idx = std::move(idx), hit = std::move(hit), c](const std::vector<T>& g) {
                   if (auto* db = grad_of(bn)) {
                     for (std::size_t r = 0; r < hit.size(); ++r) {
                       if (hit[r]) continue;
                       for (std::size_t j = 0; j < c; ++j) (*db)[r * c + j] += g[r * c + j];
                     }
                   }
                   if (auto* ds = grad_of(sn)) {
                     for (std::size_t i = 0; i < idx.size(); ++i)
                       for (std::size_t j = 0; j < c; ++j) (*ds)[i * c + j] += g[idx[i] * c + j];
                   }
                 });
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout rate must be in [0, 1)");
  if (rate == 0.0) return x;
  const T keep_scale = static_cast<T>(1.0 / (1.0 - rate));
  auto factors = std::make_shared<std::vector<T>>(x.numel());
  for (auto& f : *factors) f = uniform_unit(rng) >= rate ? keep_scale : T{0};
  std::vector<T> out(x.numel());
  const auto xs = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xs[i] * (*factors)[i];
  auto* xn = x.node().get();
  return emit<T>(x.shape(), std::move(out), {&x}, [xn, factors](const std::vector<T>& g) {
    if (auto* dx = grad_of(xn)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*dx)[i] += g[i] * (*factors)[i];
    }
  });
}

template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::size_t target) {
  if (target >= logits.numel()) {
    throw ContractError("cross_entropy: target " + std::to_string(target) + " outside " + shape_string(logits.shape()));
  }
  const auto xs = logits.data();
  const T hi = *std::max_element(xs.begin(), xs.end());
  T total{0};
  for (T v : xs) total += std::exp(v - hi);
  const T lse = hi + std::log(total);
  auto* xn = logits.node().get();
  return emit<T>(Shape{}, std::vector<T>{lse - xs[target]}, {&logits}, [xn, target, lse](const std::vector<T>& g) {
    if (auto* dx = grad_of(xn)) {
      for (std::size_t i = 0; i < dx->size(); ++i) {
        const T p = std::exp(xn->value[i] - lse);
        (*dx)[i] += g[0] * (p - (i == target ? T{1} : T{0}));
      }
    }
  });
}

#define KECMRN_INSTANTIATE_OPS(T)                                                                  \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                   \
  template Tensor<T> transpose(const Tensor<T>&);                                                  \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                      \
  template Tensor<T> scale(const Tensor<T>&, T);                                                   \
  template Tensor<T> relu(const Tensor<T>&);                                                       \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                    \
  template Tensor<T> tanh(const Tensor<T>&);                                                       \
  template Tensor<T> softmax_lastdim(const Tensor<T>&, const Mask&);                               \
  template Tensor<T> log_softmax_lastdim(const Tensor<T>&);                                        \
  template Tensor<T> layer_norm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, double);     \
  template Tensor<T> sum(const Tensor<T>&);                                                        \
  template Tensor<T> mean(const Tensor<T>&);                                                       \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                             \
  template Tensor<T> slice_rows(const Tensor<T>&, std::size_t, std::size_t);                       \
  template Tensor<T> slice_cols(const Tensor<T>&, std::size_t, std::size_t);                       \
  template Tensor<T> concat_rows(std::span<const Tensor<T>>);                                      \
  template Tensor<T> concat_cols(std::span<const Tensor<T>>);                                      \
  template Tensor<T> gather_rows(const Tensor<T>&, std::span<const std::size_t>);                  \
  template Tensor<T> scatter_rows(const Tensor<T>&, std::span<const std::size_t>, const Tensor<T>&); \
  template Tensor<T> dropout(const Tensor<T>&, double, std::mt19937_64&);                          \
  template Tensor<T> cross_entropy(const Tensor<T>&, std::size_t);

KECMRN_INSTANTIATE_OPS(float)
KECMRN_INSTANTIATE_OPS(double)

#undef KECMRN_INSTANTIATE_OPS

}  // namespace kecmrn
