#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace kecmrn {

struct ModelConfig {
  // Widths.
  std::size_t image_dim = 2048;
  std::size_t question_dim = 512;
  std::size_t text_dim = 512;
  std::size_t model_dim = 512;
  std::size_t fused_dim = 1024;
  std::size_t heads = 8;
  std::size_t head_dim = 64;
  std::size_t ffn_dim = 2048;
  std::size_t embed_dim = 300;

  // Depth and selection.
  std::size_t modules = 2;
  std::size_t cmr_per_module = 2;
  std::size_t key_entities = 5;

  // Regularization and input handling.
  double dropout = 0.1;
  std::size_t max_text_tokens = 512;
  std::size_t max_question_tokens = 32;
  std::size_t min_token_freq = 1;
  bool image_layer_norm = false;
  bool positional_encoding = false;

  // Optimization. lr_decay_epoch 0 disables decay; otherwise epochs >= it
  // (1-based) run at learning_rate * lr_decay_factor.
  double learning_rate = 1e-4;
  std::size_t lr_decay_epoch = 10;
  double lr_decay_factor = 0.5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.98;
  double adam_eps = 1e-9;
  std::size_t batch_size = 32;
  std::size_t epochs = 13;
  std::uint64_t seed = 0;

  // Problems with the current values; empty when valid.
  std::vector<std::string> problems() const;
  // Throws ValidationError listing every problem.
  void validate() const;

  // Assigns one field from its text form. Unknown keys and malformed values
  // throw ValidationError.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  static std::vector<std::string> keys();

  // d = d_q = d_t = width, d_z = 2 width, ffn = 4 width, d_h = width / heads.
  void scale_widths(std::size_t width);

  // "key = value" lines; '#' starts a comment. Parsing starts from defaults.
  std::string to_text() const;
  static ModelConfig parse(std::string_view text);
  static ModelConfig from_file(const std::string& path);

  bool operator==(const ModelConfig&) const = default;
};

}  // namespace kecmrn
