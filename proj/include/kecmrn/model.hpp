#pragma once

#include <optional>
#include <random>
#include <span>
#include <vector>

#include "kecmrn/attention.hpp"
#include "kecmrn/config.hpp"
#include "kecmrn/example.hpp"
#include "kecmrn/kecmr.hpp"
#include "kecmrn/vocab.hpp"

namespace kecmrn {

// Gate blocks in column order: input, forget, cell, output.
template <typename T>
struct LstmParams {
  Tensor<T> input_weight;   // [in x 4h]
  Tensor<T> hidden_weight;  // [h x 4h]
  Tensor<T> bias;           // [4h]

  std::size_t hidden() const { return hidden_weight.dim(0); }
  static LstmParams init(std::size_t in, std::size_t hidden, std::mt19937_64& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

// Every per-step hidden state, [l x h]. Zero initial state.
template <typename T>
Tensor<T> lstm_forward(const LstmParams<T>& p, const Tensor<T>& x);

// Embedding lookup, LSTM, then a projection to `width` when the LSTM hidden
// width differs from it.
template <typename T>
struct SequenceEncoder {
  LstmParams<T> lstm;
  std::optional<Linear<T>> projection;

  static SequenceEncoder init(std::size_t embed, std::size_t hidden, std::size_t width, std::mt19937_64& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
Tensor<T> encode_text(std::span<const std::size_t> ids, const Tensor<T>& embedding, const SequenceEncoder<T>& enc);

template <typename T>
struct ImageEncoder {
  Linear<T> projection;
  std::optional<LayerNormParams<T>> norm;

  static ImageEncoder init(std::size_t image_dim, std::size_t width, bool layer_norm, std::mt19937_64& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

template <typename T>
Tensor<T> encode_image(const Tensor<T>& regions, const ImageEncoder<T>& enc);

template <typename T>
struct ReduceParams {
  Linear<T> hidden;  // width -> width, no bias
  Linear<T> score;   // width -> 1, no bias

  static ReduceParams init(std::size_t width, std::mt19937_64& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

// Learned softmax pooling of the kept rows of x into one [d] vector.
template <typename T>
Tensor<T> attention_reduce(const Tensor<T>& x, const Mask& mask, const ReduceParams<T>& p);

template <typename T>
struct FusionParams {
  Linear<T> text;      // d -> d_z, no bias
  Linear<T> image;     // d -> d_z, no bias
  Linear<T> question;  // d -> d_z, no bias
  LayerNormParams<T> norm;
  Linear<T> answer;    // d_z -> |answers|

  static FusionParams init(std::size_t width, std::size_t fused, std::size_t answers, std::mt19937_64& rng);
  void collect(ParamList<T>& out, const std::string& prefix) const;
};

// Answer logits [|answers|] from layer_norm(W_t t + W_i i + W_q q).
template <typename T>
Tensor<T> fuse_logits(const Tensor<T>& text, const Tensor<T>& image, const Tensor<T>& question,
                      const FusionParams<T>& p);

template <typename T>
Tensor<T> fuse_and_classify(const Tensor<T>& text, const Tensor<T>& image, const Tensor<T>& question,
                            const FusionParams<T>& p);

template <typename T>
struct ModelParams {
  Tensor<T> embedding;  // [|tokens| x embed_dim], shared by text and question
  SequenceEncoder<T> text;
  SequenceEncoder<T> question;
  ImageEncoder<T> image;
  std::vector<KecmrParams<T>> modules;
  ReduceParams<T> reduce_text;
  ReduceParams<T> reduce_image;
  ReduceParams<T> reduce_question;
  FusionParams<T> fusion;

  static ModelParams init(const ModelConfig& c, std::size_t tokens, std::size_t answers, std::mt19937_64& rng);
  ParamList<T> collect() const;
};

// Model inputs for one example. Token id kPad marks masked padding.
template <typename T>
struct EncodedInput {
  std::vector<std::size_t> text_ids;
  std::vector<std::size_t> question_ids;
  Tensor<T> regions;  // [n_r x d_i]
};

template <typename T>
class Model {
 public:
  Model(ModelConfig config, Vocabularies vocab);  // seeded from config.seed
  Model(ModelConfig config, Vocabularies vocab, ModelParams<T> params);

  const ModelConfig& config() const noexcept { return config_; }
  const Vocabularies& vocab() const noexcept { return vocab_; }
  const ModelParams<T>& params() const noexcept { return params_; }
  ModelParams<T>& params() noexcept { return params_; }
  ParamList<T> parameters() const { return params_.collect(); }

  // Throws ContractError when the example has no region features.
  EncodedInput<T> encode(const Example& ex) const;
  Tensor<T> logits(const EncodedInput<T>& in, const ForwardContext& ctx = {}) const;
  Tensor<T> probabilities(const EncodedInput<T>& in) const;
  std::size_t predict_class(const EncodedInput<T>& in) const;

 private:
  ModelConfig config_;
  Vocabularies vocab_;
  ModelParams<T> params_;
};

// Sinusoidal position table [l x d].
template <typename T>
Tensor<T> positional_table(std::size_t length, std::size_t width);

}  // namespace kecmrn
