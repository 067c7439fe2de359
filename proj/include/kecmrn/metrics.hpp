#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kecmrn/example.hpp"

namespace kecmrn {

// Normalized phrase -> yes/no. Keys are canonical_answer() forms.
class YnDictionary {
 public:
  // {yes, 是, 是的, 可以, 对, 有} -> yes; {no, 不, 不是, 不可以, 没有, 不对} -> no
  static YnDictionary seed();
  // `phrase<TAB>yes|no` lines, '#' comments; entries are added to the seed set
  // unless `include_seed` is false.
  static YnDictionary from_file(const std::filesystem::path& path, bool include_seed = true);
  static YnDictionary parse(std::string_view content, bool include_seed = true);

  // Throws ValidationError when the phrase already maps to the other label.
  void add(std::string_view phrase, YesNo label);
  std::optional<YesNo> lookup(std::string_view answer) const;
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::string, YesNo> entries_;
};

// nullopt == "unknown"
std::optional<YesNo> yn_map(std::string_view answer, const YnDictionary& dict);

// Normalized token lists identical, in order.
bool tokens_match(std::string_view pred, std::string_view gold);

// Multiset token F1; both empty -> 1, exactly one empty -> 0.
double token_f1(std::string_view pred, std::string_view gold);

// 1 or 0. Yes/no golds compare the dictionary-mapped prediction with the gold
// label; other types compare normalized tokens. Throws ValidationError when a
// yes/no gold has no yes_or_no label or a gold has no answer.
int exact_match(std::string_view pred, const Example& gold, const YnDictionary& dict);

using PredictionSet = std::map<std::string, std::string>;

// JSON object qid -> answer. Duplicate qids are a ValidationError.
PredictionSet parse_predictions(std::string_view json_text);
PredictionSet read_predictions(const std::filesystem::path& path);
std::string predictions_to_json(const PredictionSet& preds);
void write_predictions(const std::filesystem::path& path, const PredictionSet& preds);

struct ScoreReport {
  double em = 0.0;
  double yn_acc = 0.0;
  double e_f1 = 0.0;
  double g_f1 = 0.0;
  std::size_t total = 0;
  std::size_t yes_no = 0;
  std::size_t extracted = 0;
  std::size_t generated = 0;
  std::size_t missing = 0;     // gold qids with no prediction, scored as wrong
  std::size_t unmatched = 0;   // predicted qids absent from the gold set, ignored
  std::vector<std::string> warnings;
};

// Overall EM over every gold example; YN accuracy over yes/no golds; mean
// per-example F1 over extracted and generated golds separately. A type with
// no examples reports 0.
ScoreReport score_predictions(const PredictionSet& preds, std::span<const Example> gold, const YnDictionary& dict);

// {"em", "yn_acc", "e_f1", "g_f1", "counts": {...}}
std::string to_json(const ScoreReport& report);

// Two-line tab-separated table: EM  YN-Acc  E-F1  G-F1
std::string format_table(const ScoreReport& report);

}  // namespace kecmrn
