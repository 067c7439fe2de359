#include "kecmrn/config.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <variant>

#include "kecmrn/binary_io.hpp"
#include "kecmrn/errors.hpp"

namespace kecmrn {

namespace {

static_assert(std::is_same_v<std::size_t, std::uint64_t>, "seed is stored through a size_t field");
using FieldRef = std::variant<std::size_t*, double*, bool*>;

struct Field {
  const char* name;
  FieldRef ref;
};

// Single source of the key order used by to_text and keys().
std::vector<Field> fields_of(ModelConfig& c) {
  return {
      {"image_dim", &c.image_dim},
      {"question_dim", &c.question_dim},
      {"text_dim", &c.text_dim},
      {"model_dim", &c.model_dim},
      {"fused_dim", &c.fused_dim},
      {"heads", &c.heads},
      {"head_dim", &c.head_dim},
      {"ffn_dim", &c.ffn_dim},
      {"embed_dim", &c.embed_dim},
      {"modules", &c.modules},
      {"cmr_per_module", &c.cmr_per_module},
      {"key_entities", &c.key_entities},
      {"dropout", &c.dropout},
      {"max_text_tokens", &c.max_text_tokens},
      {"max_question_tokens", &c.max_question_tokens},
      {"min_token_freq", &c.min_token_freq},
      {"image_layer_norm", &c.image_layer_norm},
      {"positional_encoding", &c.positional_encoding},
      {"learning_rate", &c.learning_rate},
      {"lr_decay_epoch", &c.lr_decay_epoch},
      {"lr_decay_factor", &c.lr_decay_factor},
      {"adam_beta1", &c.adam_beta1},
      {"adam_beta2", &c.adam_beta2},
      {"adam_eps", &c.adam_eps},
      {"batch_size", &c.batch_size},
      {"epochs", &c.epochs},
      {"seed", &c.seed},
  };
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename U>
bool parse_number(std::string_view text, U& out) {
  U v{};
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || end != text.data() + text.size()) return false;
  out = v;
  return true;
}

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

std::vector<std::string> ModelConfig::keys() {
  ModelConfig scratch;
  std::vector<std::string> out;
  for (const auto& f : fields_of(scratch)) out.emplace_back(f.name);
  return out;
}

void ModelConfig::set(std::string_view key, std::string_view value) {
  value = trim(value);
  for (auto& f : fields_of(*this)) {
    if (key != f.name) continue;
    bool ok = std::visit(
        [&](auto* p) {
          using U = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<U, bool>) {
            if (value == "true" || value == "1") return *p = true, true;
            if (value == "false" || value == "0") return *p = false, true;
            return false;
          } else {
            return parse_number(value, *p) && !(std::is_same_v<U, double> && !std::isfinite(double(*p)));
          }
        },
        f.ref);
    if (!ok) throw ValidationError({"config key '" + std::string(key) + "': malformed value '" + std::string(value) + "'"});
    return;
  }
  throw ValidationError({"unknown config key '" + std::string(key) + "'"});
}

std::string ModelConfig::get(std::string_view key) const {
  ModelConfig copy = *this;
  for (const auto& f : fields_of(copy)) {
    if (key != f.name) continue;
    return std::visit(
        [](auto* p) -> std::string {
          using U = std::remove_pointer_t<decltype(p)>;
          if constexpr (std::is_same_v<U, bool>) return *p ? "true" : "false";
          else if constexpr (std::is_same_v<U, double>) return format_double(*p);
          else return std::to_string(*p);
        },
        f.ref);
  }
  throw ValidationError({"unknown config key '" + std::string(key) + "'"});
}

std::vector<std::string> ModelConfig::problems() const {
  std::vector<std::string> out;
  auto positive = [&](const char* name, std::size_t v) {
    if (v == 0) out.push_back(std::string(name) + " must be positive");
  };
  positive("image_dim", image_dim);
  positive("question_dim", question_dim);
  positive("text_dim", text_dim);
  positive("model_dim", model_dim);
  positive("fused_dim", fused_dim);
  positive("heads", heads);
  positive("head_dim", head_dim);
  positive("ffn_dim", ffn_dim);
  positive("embed_dim", embed_dim);
  positive("modules", modules);
  positive("cmr_per_module", cmr_per_module);
  positive("key_entities", key_entities);
  positive("max_text_tokens", max_text_tokens);
  positive("max_question_tokens", max_question_tokens);
  positive("min_token_freq", min_token_freq);
  positive("batch_size", batch_size);
  positive("epochs", epochs);
  if (heads * head_dim != model_dim) {
    out.push_back("heads * head_dim (" + std::to_string(heads) + " * " + std::to_string(head_dim) +
                  ") must equal model_dim (" + std::to_string(model_dim) + ")");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) out.push_back("dropout must lie in [0, 1)");
  if (!(learning_rate > 0.0)) out.push_back("learning_rate must be positive");
  if (!(lr_decay_factor > 0.0)) out.push_back("lr_decay_factor must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) out.push_back("adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) out.push_back("adam_beta2 must lie in [0, 1)");
  if (!(adam_eps > 0.0)) out.push_back("adam_eps must be positive");
  return out;
}

void ModelConfig::validate() const {
  auto p = problems();
  if (!p.empty()) throw ValidationError(std::move(p));
}

void ModelConfig::scale_widths(std::size_t width) {
  model_dim = question_dim = text_dim = width;
  fused_dim = 2 * width;
  ffn_dim = 4 * width;
  head_dim = heads == 0 ? 0 : width / heads;
}

std::string ModelConfig::to_text() const {
  std::ostringstream out;
  for (const auto& key : keys()) out << key << " = " << get(key) << '\n';
  return out.str();
}

ModelConfig ModelConfig::parse(std::string_view text) {
  ModelConfig c;
  std::vector<std::string> problems;
  std::size_t lineno = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      problems.push_back("config line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    try {
      c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ValidationError& e) {
      problems.push_back("config line " + std::to_string(lineno) + ": " + e.problems().front());
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return c;
}

ModelConfig ModelConfig::from_file(const std::string& path) { return parse(read_file(path)); }

}  // namespace kecmrn
