#pragma once

#include <span>
#include <vector>

#include "kecmrn/attention.hpp"

namespace kecmrn {

// Text, image and question features of one example at model width, with
// optional validity masks (empty = every position valid).
template <typename T>
struct StreamBundle {
  Tensor<T> text;
  Tensor<T> image;
  Tensor<T> question;
  Mask text_mask;
  Mask image_mask;
  Mask question_mask;

  std::size_t width() const { return question.dim(1); }
  // Throws DimensionError on inconsistent widths or mask lengths.
  void validate() const;
  // Keys/values for global cross-attention: rows [T; I; Q] and their mask.
  Tensor<T> concatenated() const;
  Mask concatenated_mask() const;
};

// Selected positions per stream, each sorted ascending. The question stream is
// always selected in full.
struct KeyEntityIndex {
  std::vector<std::size_t> text;
  std::vector<std::size_t> image;
  std::vector<std::size_t> question;

  std::size_t size() const { return text.size() + image.size() + question.size(); }
  bool operator==(const KeyEntityIndex&) const = default;
};

template <typename T>
struct KeeParams {
  AttentionSublayer<T> question_self;
  FfnSublayer<T> question_ffn;
  AttentionSublayer<T> text_self;
  AttentionSublayer<T> text_guided;
  FfnSublayer<T> text_ffn;
  AttentionSublayer<T> image_self;
  AttentionSublayer<T> image_guided;
  FfnSublayer<T> image_ffn;
  Linear<T> text_score;   // width -> 1
  Linear<T> image_score;  // width -> 1

  static KeeParams init(std::size_t width, std::size_t heads, std::size_t ffn_width, std::mt19937_64& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
struct KeeOutput {
  StreamBundle<T> streams;
  Tensor<T> text_scores;   // [l_t]
  Tensor<T> image_scores;  // [l_i]
  KeyEntityIndex index;
};

template <typename T>
struct CmrParams {
  AttentionSublayer<T> self;
  AttentionSublayer<T> cross;
  FfnSublayer<T> ffn;

  static CmrParams init(std::size_t width, std::size_t heads, std::size_t ffn_width, std::mt19937_64& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

// One KEE layer followed by `cmr.size()` CMR layers.
template <typename T>
struct KecmrParams {
  KeeParams<T> kee;
  std::vector<CmrParams<T>> cmr;

  static KecmrParams init(std::size_t width, std::size_t heads, std::size_t ffn_width, std::size_t cmr_layers,
                          std::mt19937_64& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
struct KecmrOutput {
  StreamBundle<T> streams;
  KeyEntityIndex index;
};

// Indices of the `k` largest kept scores, ties going to the lower index,
// returned in ascending order. Saturates at the number of kept positions.
template <typename T>
std::vector<std::size_t> top_k_select(std::span<const T> scores, const Mask& mask, std::size_t k);

// Question-aware update of all three streams, per-position scoring of text
// and image, and top-k key entity selection.
template <typename T>
KeeOutput<T> kee_forward(const KeeParams<T>& p, const StreamBundle<T>& streams, std::size_t k,
                         const ForwardContext& ctx);

// Throws ContractError unless `index` addresses valid, unique, ascending rows of `streams`.
template <typename T>
void validate_index(const StreamBundle<T>& streams, const KeyEntityIndex& index);

// Selected rows in stream order T, I, Q: [|idx_T| + |idx_I| + l_q x d].
template <typename T>
Tensor<T> gather(const StreamBundle<T>& streams, const KeyEntityIndex& index);

// Validity flags of the gathered rows.
template <typename T>
Mask gather_mask(const StreamBundle<T>& streams, const KeyEntityIndex& index);

// Writes the rows of `selected` back to the positions named by `index`;
// every other row is carried over untouched.
template <typename T>
StreamBundle<T> scatter(const Tensor<T>& selected, const StreamBundle<T>& streams, const KeyEntityIndex& index);

// Gather -> self-attention -> cross-attention against this layer's input
// [T; I; Q] -> FFN -> scatter.
template <typename T>
StreamBundle<T> cmr_forward(const CmrParams<T>& p, const StreamBundle<T>& streams, const KeyEntityIndex& index,
                            const ForwardContext& ctx);

template <typename T>
KecmrOutput<T> kecmr_module(const KecmrParams<T>& p, const StreamBundle<T>& streams, std::size_t k,
                            const ForwardContext& ctx);

}  // namespace kecmrn
