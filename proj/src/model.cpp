#include "kecmrn/model.hpp"

#include <algorithm>
#include <cmath>

#include "kecmrn/errors.hpp"

namespace kecmrn {

template <typename T>
LstmParams<T> LstmParams<T>::init(std::size_t in, std::size_t hidden, std::mt19937_64& rng) {
  if (in == 0 || hidden == 0) throw ContractError("LSTM widths must be positive");
  LstmParams p;
  p.input_weight = xavier_uniform<T>(in, 4 * hidden, rng);
  p.hidden_weight = xavier_uniform<T>(hidden, 4 * hidden, rng);
  p.bias = constant_param<T>(Shape{4 * hidden}, T{0});
  return p;
}

template <typename T>
void LstmParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  out.push_back({prefix + ".input_weight", input_weight});
  out.push_back({prefix + ".hidden_weight", hidden_weight});
  out.push_back({prefix + ".bias", bias});
}

template <typename T>
Tensor<T> lstm_forward(const LstmParams<T>& p, const Tensor<T>& x) {
  const std::size_t h = p.hidden();
  if (x.rank() != 2 || x.dim(1) != p.input_weight.dim(0)) {
    throw DimensionError("lstm_forward expects [l x " + std::to_string(p.input_weight.dim(0)) + "], got " +
                         shape_string(x.shape()));
  }
  const Tensor<T> projected = add(matmul(x, p.input_weight), p.bias);
  std::vector<Tensor<T>> states;
  states.reserve(x.dim(0));
  Tensor<T> hidden, cell;
  for (std::size_t t = 0; t < x.dim(0); ++t) {
    Tensor<T> gates = slice_rows(projected, t, t + 1);
    if (t > 0) gates = add(gates, matmul(hidden, p.hidden_weight));
    const Tensor<T> in = sigmoid(slice_cols(gates, 0, h));
    const Tensor<T> forget = sigmoid(slice_cols(gates, h, 2 * h));
    const Tensor<T> candidate = tanh(slice_cols(gates, 2 * h, 3 * h));
    const Tensor<T> out = sigmoid(slice_cols(gates, 3 * h, 4 * h));
    cell = t > 0 ? add(mul(forget, cell), mul(in, candidate)) : mul(in, candidate);
    hidden = mul(out, tanh(cell));
    states.push_back(hidden);
  }
  return states.size() == 1 ? states.front() : concat_rows<T>(states);
}

template <typename T>
SequenceEncoder<T> SequenceEncoder<T>::init(std::size_t embed, std::size_t hidden, std::size_t width,
                                            std::mt19937_64& rng) {
  SequenceEncoder e;
  e.lstm = LstmParams<T>::init(embed, hidden, rng);
  if (hidden != width) e.projection = Linear<T>::init(hidden, width, rng);
  return e;
}

template <typename T>
void SequenceEncoder<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  lstm.collect(out, prefix + ".lstm");
  if (projection) projection->collect(out, prefix + ".proj");
}

template <typename T>
Tensor<T> encode_text(std::span<const std::size_t> ids, const Tensor<T>& embedding, const SequenceEncoder<T>& enc) {
  if (ids.empty()) throw ContractError("encode_text: empty token sequence");
  for (std::size_t id : ids) {
    if (id >= embedding.dim(0)) {
      throw ContractError("encode_text: token id " + std::to_string(id) + " outside vocabulary of " +
                          std::to_string(embedding.dim(0)));
    }
  }
  const Tensor<T> states = lstm_forward(enc.lstm, gather_rows(embedding, ids));
  return enc.projection ? (*enc.projection)(states) : states;
}

template <typename T>
ImageEncoder<T> ImageEncoder<T>::init(std::size_t image_dim, std::size_t width, bool layer_norm,
                                      std::mt19937_64& rng) {
  ImageEncoder e{Linear<T>::init(image_dim, width, rng), std::nullopt};
  if (layer_norm) e.norm = LayerNormParams<T>::init(width);
  return e;
}

template <typename T>
void ImageEncoder<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  projection.collect(out, prefix + ".proj");
  if (norm) norm->collect(out, prefix + ".norm");
}

template <typename T>
Tensor<T> encode_image(const Tensor<T>& regions, const ImageEncoder<T>& enc) {
  if (regions.rank() != 2 || regions.dim(1) != enc.projection.in_features()) {
    throw DimensionError("encode_image expects [n_r x " + std::to_string(enc.projection.in_features()) + "], got " +
                         shape_string(regions.shape()));
  }
  const Tensor<T> y = enc.projection(regions);
  return enc.norm ? (*enc.norm)(y) : y;
}

template <typename T>
ReduceParams<T> ReduceParams<T>::init(std::size_t width, std::mt19937_64& rng) {
  // No biases: a score bias cancels in the softmax, and the hidden shift is
  // already supplied by the beta of the layer norm that produced x.
  auto hidden = Linear<T>::init(width, width, rng, false);
  return ReduceParams{std::move(hidden), Linear<T>::init(width, 1, rng, false)};
}

template <typename T>
void ReduceParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  hidden.collect(out, prefix + ".hidden");
  score.collect(out, prefix + ".score");
}

template <typename T>
Tensor<T> attention_reduce(const Tensor<T>& x, const Mask& mask, const ReduceParams<T>& p) {
  if (x.rank() != 2 || x.dim(1) != p.hidden.in_features()) {
    throw DimensionError("attention_reduce expects [l x " + std::to_string(p.hidden.in_features()) + "], got " +
                         shape_string(x.shape()));
  }
  const std::size_t l = x.dim(0);
  if (!mask.empty() && mask.size() != l) {
    throw DimensionError("attention_reduce: mask of " + std::to_string(mask.size()) + " flags for " +
                         std::to_string(l) + " rows");
  }
  if (!mask.empty() && mask.count_kept() == 0) throw InvalidMaskError("attention_reduce: every row is masked");
  const Tensor<T> scores = reshape(p.score(relu(p.hidden(x))), Shape{1, l});
  const Tensor<T> weights = softmax_lastdim(scores, mask);
  return reshape(matmul(weights, x), Shape{x.dim(1)});
}

template <typename T>
FusionParams<T> FusionParams<T>::init(std::size_t width, std::size_t fused, std::size_t answers,
                                      std::mt19937_64& rng) {
  if (answers == 0) throw ContractError("answer vocabulary is empty");
  FusionParams p;
  p.text = Linear<T>::init(width, fused, rng, false);
  p.image = Linear<T>::init(width, fused, rng, false);
  p.question = Linear<T>::init(width, fused, rng, false);
  p.norm = LayerNormParams<T>::init(fused);
  // Zero answer weights give uniform initial predictions.
  p.answer = Linear<T>{constant_param<T>(Shape{fused, answers}, T{0}), constant_param<T>(Shape{answers}, T{0})};
  return p;
}

template <typename T>
void FusionParams<T>::collect(ParamList<T>& out, const std::string& prefix) const {
  text.collect(out, prefix + ".text");
  image.collect(out, prefix + ".image");
  question.collect(out, prefix + ".question");
  norm.collect(out, prefix + ".norm");
  answer.collect(out, prefix + ".answer");
}

template <typename T>
Tensor<T> fuse_logits(const Tensor<T>& text, const Tensor<T>& image, const Tensor<T>& question,
                      const FusionParams<T>& p) {
  const std::size_t d = p.text.in_features();
  for (const Tensor<T>* v : {&text, &image, &question}) {
    if (v->numel() != d) {
      throw DimensionError("fuse: expected [" + std::to_string(d) + "] vectors, got " + shape_string(v->shape()));
    }
  }
  auto row = [d](const Tensor<T>& v) { return reshape(v, Shape{1, d}); };
  const Tensor<T> z = p.norm(add(add(p.text(row(text)), p.image(row(image))), p.question(row(question))));
  return reshape(p.answer(z), Shape{p.answer.out_features()});
}

template <typename T>
Tensor<T> fuse_and_classify(const Tensor<T>& text, const Tensor<T>& image, const Tensor<T>& question,
                            const FusionParams<T>& p) {
  return softmax_lastdim(fuse_logits(text, image, question, p));
}

template <typename T>
ModelParams<T> ModelParams<T>::init(const ModelConfig& c, std::size_t tokens, std::size_t answers,
                                    std::mt19937_64& rng) {
  c.validate();
  ModelParams p;
  // Unit-variance rows.
  p.embedding = uniform_param<T>(Shape{tokens, c.embed_dim}, std::sqrt(3.0), rng);
  p.text = SequenceEncoder<T>::init(c.embed_dim, c.text_dim, c.model_dim, rng);
  p.question = SequenceEncoder<T>::init(c.embed_dim, c.question_dim, c.model_dim, rng);
  p.image = ImageEncoder<T>::init(c.image_dim, c.model_dim, c.image_layer_norm, rng);
  for (std::size_t m = 0; m < c.modules; ++m) {
    p.modules.push_back(KecmrParams<T>::init(c.model_dim, c.heads, c.ffn_dim, c.cmr_per_module, rng));
  }
  p.reduce_text = ReduceParams<T>::init(c.model_dim, rng);
  p.reduce_image = ReduceParams<T>::init(c.model_dim, rng);
  p.reduce_question = ReduceParams<T>::init(c.model_dim, rng);
  p.fusion = FusionParams<T>::init(c.model_dim, c.fused_dim, answers, rng);
  return p;
}

template <typename T>
ParamList<T> ModelParams<T>::collect() const {
  ParamList<T> out;
  out.push_back({"embedding", embedding});
  text.collect(out, "text");
  question.collect(out, "question");
  image.collect(out, "image");
  for (std::size_t m = 0; m < modules.size(); ++m) modules[m].collect(out, "module" + std::to_string(m));
  reduce_text.collect(out, "reduce_text");
  reduce_image.collect(out, "reduce_image");
  reduce_question.collect(out, "reduce_question");
  fusion.collect(out, "fusion");
  return out;
}

template <typename T>
Tensor<T> positional_table(std::size_t length, std::size_t width) {
  std::vector<T> v(length * width);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t j = 0; j < width; ++j) {
      const double freq = std::pow(10000.0, -static_cast<double>(j - j % 2) / static_cast<double>(width));
      const double angle = static_cast<double>(pos) * freq;
      v[pos * width + j] = static_cast<T>(j % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  }
  return Tensor<T>(Shape{length, width}, std::move(v));
}

namespace {

Mask padding_mask(std::span<const std::size_t> ids) {
  std::vector<std::uint8_t> keep(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) keep[i] = ids[i] != TokenVocab::kPad;
  return Mask(std::move(keep));
}

std::vector<std::size_t> encode_or_unk(const TokenVocab& vocab, std::string_view text, std::size_t max_tokens) {
  auto ids = vocab.encode(text, max_tokens);
  // Text made only of dropped characters still gets one position.
  if (ids.empty()) ids.push_back(TokenVocab::kUnk);
  return ids;
}

}  // namespace

template <typename T>
Model<T>::Model(ModelConfig config, Vocabularies vocab) : config_(std::move(config)), vocab_(std::move(vocab)) {
  std::mt19937_64 rng(config_.seed);
  params_ = ModelParams<T>::init(config_, vocab_.tokens.size(), vocab_.answers.size(), rng);
}

template <typename T>
Model<T>::Model(ModelConfig config, Vocabularies vocab, ModelParams<T> params)
    : config_(std::move(config)), vocab_(std::move(vocab)), params_(std::move(params)) {
  config_.validate();
}

template <typename T>
EncodedInput<T> Model<T>::encode(const Example& ex) const {
  if (ex.regions.empty()) throw ContractError("qid " + ex.qid + ": no region features attached");
  EncodedInput<T> in;
  in.text_ids = encode_or_unk(vocab_.tokens, ex.text, config_.max_text_tokens);
  in.question_ids = encode_or_unk(vocab_.tokens, ex.question, config_.max_question_tokens);
  std::vector<T> values(ex.regions.values.begin(), ex.regions.values.end());
  in.regions = Tensor<T>(Shape{ex.regions.rows, ex.regions.cols}, std::move(values));
  return in;
}

template <typename T>
Tensor<T> Model<T>::logits(const EncodedInput<T>& in, const ForwardContext& ctx) const {
  const auto& p = params_;
  StreamBundle<T> s;
  s.text = encode_text<T>(in.text_ids, p.embedding, p.text);
  s.question = encode_text<T>(in.question_ids, p.embedding, p.question);
  s.image = encode_image(in.regions, p.image);
  if (config_.positional_encoding) {
    s.text = add(s.text, positional_table<T>(s.text.dim(0), config_.model_dim));
    s.question = add(s.question, positional_table<T>(s.question.dim(0), config_.model_dim));
  }
  s.text_mask = padding_mask(in.text_ids);
  s.question_mask = padding_mask(in.question_ids);
  s.image_mask = Mask::all(s.image.dim(0));
  if (s.text_mask.count_kept() == 0 || s.question_mask.count_kept() == 0) {
    throw ContractError("model input has no unpadded text or question token");
  }
  for (const auto& module : p.modules) s = kecmr_module(module, s, config_.key_entities, ctx).streams;
  return fuse_logits(attention_reduce(s.text, s.text_mask, p.reduce_text),
                     attention_reduce(s.image, s.image_mask, p.reduce_image),
                     attention_reduce(s.question, s.question_mask, p.reduce_question), p.fusion);
}

template <typename T>
Tensor<T> Model<T>::probabilities(const EncodedInput<T>& in) const {
  return softmax_lastdim(logits(in));
}

template <typename T>
std::size_t Model<T>::predict_class(const EncodedInput<T>& in) const {
  NoGradScope<T> no_grad;
  const Tensor<T> z = logits(in);
  const auto v = z.data();
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

#define KECMRN_INSTANTIATE_MODEL(T)                                                                               \
  template struct LstmParams<T>;                                                                                  \
  template Tensor<T> lstm_forward(const LstmParams<T>&, const Tensor<T>&);                                        \
  template struct SequenceEncoder<T>;                                                                             \
  template Tensor<T> encode_text(std::span<const std::size_t>, const Tensor<T>&, const SequenceEncoder<T>&);      \
  template struct ImageEncoder<T>;                                                                                \
  template Tensor<T> encode_image(const Tensor<T>&, const ImageEncoder<T>&);                                      \
  template struct ReduceParams<T>;                                                                                \
  template Tensor<T> attention_reduce(const Tensor<T>&, const Mask&, const ReduceParams<T>&);                     \
  template struct FusionParams<T>;                                                                                \
  template Tensor<T> fuse_logits(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const FusionParams<T>&);   \
  template Tensor<T> fuse_and_classify(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,                      \
                                       const FusionParams<T>&);                                                   \
  template struct ModelParams<T>;                                                                                 \
  template class Model<T>;                                                                                        \
  template Tensor<T> positional_table<T>(std::size_t, std::size_t);

KECMRN_INSTANTIATE_MODEL(float)
KECMRN_INSTANTIATE_MODEL(double)

#undef KECMRN_INSTANTIATE_MODEL

}  // namespace kecmrn
