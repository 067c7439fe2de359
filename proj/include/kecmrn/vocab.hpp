#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kecmrn/example.hpp"

namespace kecmrn {

// Dense token ids; 0 is padding, 1 stands in for unseen tokens.
class TokenVocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::string_view kPadToken = "<pad>";
  static constexpr std::string_view kUnkToken = "<unk>";

  TokenVocab();
  // Rebuilds from an ordered token list whose first two entries are pad and unk.
  static TokenVocab from_tokens(std::vector<std::string> tokens);

  std::size_t add(std::string_view token);
  std::size_t id(std::string_view token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  // normalize_answer tokens mapped to ids, cut to `max_tokens`.
  std::vector<std::size_t> encode(std::string_view text, std::size_t max_tokens) const;

  bool operator==(const TokenVocab& o) const { return tokens_ == o.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

// Closed answer set. Keys are canonical_answer() forms; `display` keeps the
// surface string emitted in predictions.
class AnswerVocab {
 public:
  std::size_t add(std::string_view key, std::string_view display);
  std::optional<std::size_t> find(std::string_view answer) const;
  const std::string& key(std::size_t id) const { return keys_.at(id); }
  const std::string& display(std::size_t id) const { return display_.at(id); }
  std::size_t size() const noexcept { return keys_.size(); }

  bool operator==(const AnswerVocab& o) const { return keys_ == o.keys_ && display_ == o.display_; }

 private:
  std::vector<std::string> keys_;
  std::vector<std::string> display_;
  std::unordered_map<std::string, std::size_t> ids_;
};

struct Vocabularies {
  TokenVocab tokens;
  AnswerVocab answers;

  bool operator==(const Vocabularies&) const = default;
};

// Tokens from texts and questions with frequency >= min_freq ordered by
// (frequency desc, token asc); answers "yes", "no", then distinct canonical
// non-YN answers in the same order.
Vocabularies build_vocabularies(std::span<const Example> train, std::size_t min_freq);

// Training target of an example: the yes/no label for YN golds, the canonical
// answer otherwise. nullopt when unlabeled or outside the vocabulary.
std::optional<std::size_t> answer_class(const Example& ex, const AnswerVocab& answers);

}  // namespace kecmrn
