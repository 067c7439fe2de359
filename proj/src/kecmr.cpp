#include "kecmrn/kecmr.hpp"

#include <algorithm>
#include <numeric>

namespace kecmrn {

namespace {

template <typename T>
void check_stream(const Tensor<T>& x, const Mask& mask, std::size_t width, const char* name) {
  if (!x.defined() || x.rank() != 2 || x.dim(1) != width) {
    throw DimensionError(std::string("stream ") + name + " must be [l x " + std::to_string(width) + "], got " +
                         (x.defined() ? shape_string(x.shape()) : std::string("undefined")));
  }
  if (!mask.empty() && mask.size() != x.dim(0)) {
    throw DimensionError(std::string("stream ") + name + " mask has " + std::to_string(mask.size()) + " flags for " +
                         std::to_string(x.dim(0)) + " rows");
  }
}

void append_flags(std::vector<std::uint8_t>& out, const Mask& mask, std::size_t rows) {
  if (mask.empty()) {
    out.insert(out.end(), rows, 1);
  } else {
    out.insert(out.end(), mask.keep.begin(), mask.keep.end());
  }
}

void check_indices(const std::vector<std::size_t>& idx, std::size_t rows, const char* name) {
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= rows) {
      throw ContractError(std::string("key entity index ") + std::to_string(idx[i]) + " out of range for " + name +
                          " stream of " + std::to_string(rows) + " rows");
    }
    if (i > 0 && idx[i] <= idx[i - 1]) {
      throw ContractError(std::string(name) + " key entity indices must be unique and ascending");
    }
  }
}

}  // namespace

template <typename T>
void StreamBundle<T>::validate() const {
  if (!question.defined() || question.rank() != 2) throw DimensionError("stream question must be rank 2");
  const std::size_t d = question.dim(1);
  check_stream(text, text_mask, d, "text");
  check_stream(image, image_mask, d, "image");
  check_stream(question, question_mask, d, "question");
}

template <typename T>
Tensor<T> StreamBundle<T>::concatenated() const {
  const std::vector<Tensor<T>> parts{text, image, question};
  return concat_rows<T>(parts);
}

template <typename T>
Mask StreamBundle<T>::concatenated_mask() const {
  if (text_mask.empty() && image_mask.empty() && question_mask.empty()) return {};
  std::vector<std::uint8_t> flags;
  append_flags(flags, text_mask, text.dim(0));
  append_flags(flags, image_mask, image.dim(0));
  append_flags(flags, question_mask, question.dim(0));
  return Mask(std::move(flags));
}

template <typename T>
KeeParams<T> KeeParams<T>::init(std::size_t width, std::size_t heads, std::size_t ffn_width, std::mt19937_64& rng) {
  KeeParams p;
  p.question_self = AttentionSublayer<T>::init(width, heads, rng);
  p.question_ffn = FfnSublayer<T>::init(width, ffn_width, rng);
  p.text_self = AttentionSublayer<T>::init(width, heads, rng);
  p.text_guided = AttentionSublayer<T>::init(width, heads, rng);
  p.text_ffn = FfnSublayer<T>::init(width, ffn_width, rng);
  p.image_self = AttentionSublayer<T>::init(width, heads, rng);
  p.image_guided = AttentionSublayer<T>::init(width, heads, rng);
  p.image_ffn = FfnSublayer<T>::init(width, ffn_width, rng);
  p.text_score = Linear<T>::init(width, 1, rng);
  p.image_score = Linear<T>::init(width, 1, rng);
  return p;
}

template <typename T>
void KeeParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  question_self.collect(out, prefix + ".question_self");
  question_ffn.collect(out, prefix + ".question_ffn");
  text_self.collect(out, prefix + ".text_self");
  text_guided.collect(out, prefix + ".text_guided");
  text_ffn.collect(out, prefix + ".text_ffn");
  image_self.collect(out, prefix + ".image_self");
  image_guided.collect(out, prefix + ".image_guided");
  image_ffn.collect(out, prefix + ".image_ffn");
  text_score.collect(out, prefix + ".text_score");
  image_score.collect(out, prefix + ".image_score");
}

template <typename T>
CmrParams<T> CmrParams<T>::init(std::size_t width, std::size_t heads, std::size_t ffn_width, std::mt19937_64& rng) {
  CmrParams p;
  p.self = AttentionSublayer<T>::init(width, heads, rng);
  p.cross = AttentionSublayer<T>::init(width, heads, rng);
  p.ffn = FfnSublayer<T>::init(width, ffn_width, rng);
  return p;
}

template <typename T>
void CmrParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  self.collect(out, prefix + ".self");
  cross.collect(out, prefix + ".cross");
  ffn.collect(out, prefix + ".ffn");
}

template <typename T>
KecmrParams<T> KecmrParams<T>::init(std::size_t width, std::size_t heads, std::size_t ffn_width,
                                    std::size_t cmr_layers, std::mt19937_64& rng) {
  if (cmr_layers == 0) throw ContractError("a KECMR module needs at least one CMR layer");
  KecmrParams p;
  p.kee = KeeParams<T>::init(width, heads, ffn_width, rng);
  for (std::size_t i = 0; i < cmr_layers; ++i) p.cmr.push_back(CmrParams<T>::init(width, heads, ffn_width, rng));
  return p;
}

template <typename T>
void KecmrParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  kee.collect(out, prefix + ".kee");
  for (std::size_t i = 0; i < cmr.size(); ++i) cmr[i].collect(out, prefix + ".cmr" + std::to_string(i));
}

template <typename T>
std::vector<std::size_t> top_k_select(std::span<const T> scores, const Mask& mask, std::size_t k) {
  if (scores.empty()) throw ContractError("top_k_select on an empty score vector");
  if (!mask.empty() && mask.size() != scores.size()) {
    throw DimensionError("top_k_select: mask of " + std::to_string(mask.size()) + " for " +
                         std::to_string(scores.size()) + " scores");
  }
  std::vector<std::size_t> candidates;
  candidates.reserve(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (mask.kept(i)) candidates.push_back(i);
  }
  const std::size_t take = std::min(k, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(take), candidates.end(),
                    [&](std::size_t a, std::size_t b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); });
  candidates.resize(take);
  std::sort(candidates.begin(), candidates.end());
  for (std::size_t i : candidates) DecisionTrace::note(i);
  DecisionTrace::note(~std::uint64_t{0});
  return candidates;
}

template <typename T>
KeeOutput<T> kee_forward(const KeeParams<T>& p, const StreamBundle<T>& streams, std::size_t k,
                         const ForwardContext& ctx) {
  if (k == 0) throw ContractError("kee_forward: k must be >= 1");
  streams.validate();
  const StreamBundle<T>& in = streams;

  Tensor<T> q = attend(p.question_self, in.question, in.question, in.question_mask, ctx);
  q = feed(p.question_ffn, q, ctx);

  Tensor<T> t = attend(p.text_self, in.text, in.text, in.text_mask, ctx);
  t = attend(p.text_guided, t, q, in.question_mask, ctx);
  t = feed(p.text_ffn, t, ctx);

  Tensor<T> i = attend(p.image_self, in.image, in.image, in.image_mask, ctx);
  i = attend(p.image_guided, i, q, in.question_mask, ctx);
  i = feed(p.image_ffn, i, ctx);

  KeeOutput<T> out;
  out.streams = StreamBundle<T>{t, i, q, in.text_mask, in.image_mask, in.question_mask};
  out.text_scores = reshape(p.text_score(t), Shape{t.dim(0)});
  out.image_scores = reshape(p.image_score(i), Shape{i.dim(0)});
  out.index.text = top_k_select(out.text_scores.data(), in.text_mask, k);
  out.index.image = top_k_select(out.image_scores.data(), in.image_mask, k);
  out.index.question.resize(q.dim(0));
  std::iota(out.index.question.begin(), out.index.question.end(), std::size_t{0});
  return out;
}

template <typename T>
void validate_index(const StreamBundle<T>& streams, const KeyEntityIndex& index) {
  check_indices(index.text, streams.text.dim(0), "text");
  check_indices(index.image, streams.image.dim(0), "image");
  check_indices(index.question, streams.question.dim(0), "question");
  // Ascending, unique and in range, so full length means the full range.
  if (index.question.size() != streams.question.dim(0)) {
    throw ContractError("question key entity index must cover all " + std::to_string(streams.question.dim(0)) +
                        " question rows");
  }
}

template <typename T>
Tensor<T> gather(const StreamBundle<T>& streams, const KeyEntityIndex& index) {
  validate_index(streams, index);
  std::vector<Tensor<T>> parts;
  if (!index.text.empty()) parts.push_back(gather_rows<T>(streams.text, index.text));
  if (!index.image.empty()) parts.push_back(gather_rows<T>(streams.image, index.image));
  if (!index.question.empty()) parts.push_back(gather_rows<T>(streams.question, index.question));
  return parts.size() == 1 ? parts.front() : concat_rows<T>(parts);
}

template <typename T>
Mask gather_mask(const StreamBundle<T>& streams, const KeyEntityIndex& index) {
  std::vector<std::uint8_t> flags;
  flags.reserve(index.size());
  for (std::size_t r : index.text) flags.push_back(streams.text_mask.kept(r) ? 1 : 0);
  for (std::size_t r : index.image) flags.push_back(streams.image_mask.kept(r) ? 1 : 0);
  for (std::size_t r : index.question) flags.push_back(streams.question_mask.kept(r) ? 1 : 0);
  return Mask(std::move(flags));
}

template <typename T>
StreamBundle<T> scatter(const Tensor<T>& selected, const StreamBundle<T>& streams, const KeyEntityIndex& index) {
  validate_index(streams, index);
  if (selected.rank() != 2 || selected.dim(0) != index.size() || selected.dim(1) != streams.width()) {
    throw DimensionError("scatter: " + shape_string(selected.shape()) + " for " + std::to_string(index.size()) +
                         " key entities of width " + std::to_string(streams.width()));
  }
  StreamBundle<T> out = streams;
  std::size_t offset = 0;
  auto put = [&](Tensor<T>& stream, const std::vector<std::size_t>& rows) {
    if (rows.empty()) return;
    stream = scatter_rows<T>(stream, rows, slice_rows(selected, offset, offset + rows.size()));
    offset += rows.size();
  };
  put(out.text, index.text);
  put(out.image, index.image);
  put(out.question, index.question);
  return out;
}

template <typename T>
StreamBundle<T> cmr_forward(const CmrParams<T>& p, const StreamBundle<T>& streams, const KeyEntityIndex& index,
                            const ForwardContext& ctx) {
  streams.validate();
  Tensor<T> s = gather(streams, index);
  const Mask s_mask = gather_mask(streams, index);
  const Tensor<T> context = streams.concatenated();
  const Mask context_mask = streams.concatenated_mask();
  s = attend(p.self, s, s, s_mask, ctx);
  s = attend(p.cross, s, context, context_mask, ctx);
  s = feed(p.ffn, s, ctx);
  return scatter(s, streams, index);
}

template <typename T>
KecmrOutput<T> kecmr_module(const KecmrParams<T>& p, const StreamBundle<T>& streams, std::size_t k,
                            const ForwardContext& ctx) {
  if (p.cmr.empty()) throw ContractError("kecmr_module: at least one CMR layer required");
  KeeOutput<T> kee = kee_forward(p.kee, streams, k, ctx);
  KecmrOutput<T> out{std::move(kee.streams), std::move(kee.index)};
  for (const auto& layer : p.cmr) out.streams = cmr_forward(layer, out.streams, out.index, ctx);
  return out;
}

#define KECMRN_INSTANTIATE_KECMR(T)                                                                               \
  template struct StreamBundle<T>;                                                                                \
  template struct KeeParams<T>;                                                                                   \
  template struct CmrParams<T>;                                                                                   \
  template struct KecmrParams<T>;                                                                                 \
  template std::vector<std::size_t> top_k_select(std::span<const T>, const Mask&, std::size_t);                   \
  template KeeOutput<T> kee_forward(const KeeParams<T>&, const StreamBundle<T>&, std::size_t,                     \
                                    const ForwardContext&);                                                       \
  template void validate_index(const StreamBundle<T>&, const KeyEntityIndex&);                                    \
  template Tensor<T> gather(const StreamBundle<T>&, const KeyEntityIndex&);                                       \
  template Mask gather_mask(const StreamBundle<T>&, const KeyEntityIndex&);                                       \
  template StreamBundle<T> scatter(const Tensor<T>&, const StreamBundle<T>&, const KeyEntityIndex&);              \
  template StreamBundle<T> cmr_forward(const CmrParams<T>&, const StreamBundle<T>&, const KeyEntityIndex&,        \
                                       const ForwardContext&);                                                    \
  template KecmrOutput<T> kecmr_module(const KecmrParams<T>&, const StreamBundle<T>&, std::size_t,                \
                                       const ForwardContext&);

KECMRN_INSTANTIATE_KECMR(float)
KECMRN_INSTANTIATE_KECMR(double)

#undef KECMRN_INSTANTIATE_KECMR

}  // namespace kecmrn
