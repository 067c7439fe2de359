#include "kecmrn/vocab.hpp"

#include <algorithm>
#include <map>

#include "kecmrn/errors.hpp"
#include "kecmrn/text.hpp"

namespace kecmrn {

TokenVocab::TokenVocab() {
  add(kPadToken);
  add(kUnkToken);
}

TokenVocab TokenVocab::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != kPadToken || tokens[1] != kUnkToken) {
    throw FormatError("token vocabulary must start with <pad>, <unk>");
  }
  TokenVocab v;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    if (v.ids_.contains(tokens[i])) throw FormatError("duplicate vocabulary token '" + tokens[i] + "'");
    v.add(tokens[i]);
  }
  return v;
}

std::size_t TokenVocab::add(std::string_view token) {
  auto [it, inserted] = ids_.emplace(std::string(token), tokens_.size());
  if (inserted) tokens_.emplace_back(token);
  return it->second;
}

std::size_t TokenVocab::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<std::size_t> TokenVocab::encode(std::string_view text, std::size_t max_tokens) const {
  std::vector<std::size_t> ids;
  for (const auto& t : normalize_answer(text)) {
    if (ids.size() == max_tokens) break;
    ids.push_back(id(t));
  }
  return ids;
}

std::size_t AnswerVocab::add(std::string_view key, std::string_view display) {
  auto [it, inserted] = ids_.emplace(std::string(key), keys_.size());
  if (inserted) {
    keys_.emplace_back(key);
    display_.emplace_back(display);
  }
  return it->second;
}

std::optional<std::size_t> AnswerVocab::find(std::string_view answer) const {
  const auto it = ids_.find(canonical_answer(answer));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

namespace {

template <typename Value>
std::vector<std::pair<std::string, Value>> by_frequency(const std::map<std::string, Value>& counts,
                                                        std::size_t (*freq)(const Value&)) {
  std::vector<std::pair<std::string, Value>> items(counts.begin(), counts.end());
  std::stable_sort(items.begin(), items.end(),
                   [&](const auto& a, const auto& b) { return freq(a.second) > freq(b.second); });
  return items;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

Vocabularies build_vocabularies(std::span<const Example> train, std::size_t min_freq) {
  if (train.empty()) throw ContractError("build_vocabularies needs a non-empty training split");
  std::map<std::string, std::size_t> token_counts;
  struct AnswerStat {
    std::size_t count = 0;
    std::string display;
  };
  std::map<std::string, AnswerStat> answer_counts;
  for (const auto& ex : train) {
    for (const auto& t : normalize_answer(ex.text)) ++token_counts[t];
    for (const auto& t : normalize_answer(ex.question)) ++token_counts[t];
    if (ex.answer && ex.answer_type && *ex.answer_type != AnswerType::kYesNo) {
      const std::string key = canonical_answer(*ex.answer);
      if (key.empty()) continue;
      auto& stat = answer_counts[key];
      if (stat.count++ == 0) stat.display = trim(*ex.answer);
    }
  }

  Vocabularies v;
  for (const auto& [token, count] : by_frequency<std::size_t>(token_counts, [](const std::size_t& c) { return c; })) {
    if (count >= std::max<std::size_t>(min_freq, 1)) v.tokens.add(token);
  }
  v.answers.add("yes", "yes");
  v.answers.add("no", "no");
  for (const auto& [key, stat] : by_frequency<AnswerStat>(answer_counts, [](const AnswerStat& s) { return s.count; })) {
    v.answers.add(key, stat.display);
  }
  return v;
}

std::optional<std::size_t> answer_class(const Example& ex, const AnswerVocab& answers) {
  if (!ex.answer_type) return std::nullopt;
  if (*ex.answer_type == AnswerType::kYesNo) {
    if (!ex.yes_or_no) return std::nullopt;
    return answers.find(yes_no_code(*ex.yes_or_no));
  }
  if (!ex.answer) return std::nullopt;
  return answers.find(*ex.answer);
}

}  // namespace kecmrn
