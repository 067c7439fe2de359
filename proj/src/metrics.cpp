#include "kecmrn/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "kecmrn/binary_io.hpp"
#include "kecmrn/errors.hpp"
#include "kecmrn/text.hpp"

namespace kecmrn {

YnDictionary YnDictionary::seed() {
  YnDictionary dict;
  for (const char* phrase : {"yes", "是", "是的", "可以", "对", "有"}) dict.add(phrase, YesNo::kYes);
  for (const char* phrase : {"no", "不", "不是", "不可以", "没有", "不对"}) dict.add(phrase, YesNo::kNo);
  return dict;
}

YnDictionary YnDictionary::parse(std::string_view content, bool include_seed) {
  YnDictionary dict = include_seed ? seed() : YnDictionary{};
  std::vector<std::string> problems;
  std::istringstream lines{std::string(content)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) + ": expected phrase<TAB>yes|no");
      continue;
    }
    const auto label = parse_yes_no(line.substr(tab + 1));
    if (!label) {
      problems.push_back("line " + std::to_string(lineno) + ": label must be yes or no");
      continue;
    }
    try {
      dict.add(line.substr(0, tab), *label);
    } catch (const ValidationError& e) {
      problems.push_back("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return dict;
}

YnDictionary YnDictionary::from_file(const std::filesystem::path& path, bool include_seed) {
  return parse(read_file(path), include_seed);
}

void YnDictionary::add(std::string_view phrase, YesNo label) {
  std::string key = canonical_answer(phrase);
  if (key.empty()) throw ValidationError({"yes/no phrase normalizes to nothing: '" + std::string(phrase) + "'"});
  auto [it, inserted] = entries_.emplace(key, label);
  if (!inserted && it->second != label) {
    throw ValidationError({"phrase '" + key + "' maps to both yes and no"});
  }
}

std::optional<YesNo> YnDictionary::lookup(std::string_view answer) const {
  const auto it = entries_.find(canonical_answer(answer));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::optional<YesNo> yn_map(std::string_view answer, const YnDictionary& dict) { return dict.lookup(answer); }

bool tokens_match(std::string_view pred, std::string_view gold) {
  return normalize_answer(pred) == normalize_answer(gold);
}

double token_f1(std::string_view pred, std::string_view gold) {
  const auto p = normalize_answer(pred);
  const auto g = normalize_answer(gold);
  if (p.empty() && g.empty()) return 1.0;
  if (p.empty() || g.empty()) return 0.0;
  std::unordered_map<std::string, std::size_t> gold_counts;
  for (const auto& t : g) ++gold_counts[t];
  std::size_t overlap = 0;
  for (const auto& t : p) {
    auto it = gold_counts.find(t);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  if (overlap == 0) return 0.0;
  const double precision = static_cast<double>(overlap) / static_cast<double>(p.size());
  const double recall = static_cast<double>(overlap) / static_cast<double>(g.size());
  return 2.0 * precision * recall / (precision + recall);
}

int exact_match(std::string_view pred, const Example& gold, const YnDictionary& dict) {
  if (!gold.answer || !gold.answer_type) throw ValidationError({"qid " + gold.qid + ": gold has no answer"});
  if (*gold.answer_type == AnswerType::kYesNo) {
    if (!gold.yes_or_no) throw ValidationError({"qid " + gold.qid + ": yes/no gold without yes_or_no label"});
    const auto mapped = yn_map(pred, dict);
    return mapped && *mapped == *gold.yes_or_no ? 1 : 0;
  }
  return tokens_match(pred, *gold.answer) ? 1 : 0;
}

PredictionSet parse_predictions(std::string_view json_text) {
  using nlohmann::json;
  std::set<std::string> seen;
  std::vector<std::string> problems;
  json::parser_callback_t on_event = [&](int depth, json::parse_event_t event, json& parsed) {
    if (event == json::parse_event_t::key && depth == 1) {
      const auto key = parsed.get<std::string>();
      if (!seen.insert(key).second) problems.push_back("duplicate prediction for qid " + key);
    }
    return true;
  };
  json doc;
  try {
    doc = json::parse(json_text.begin(), json_text.end(), on_event);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("prediction file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError({"prediction file must be a JSON object mapping qid to answer"});
  PredictionSet preds;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    if (!it.value().is_string()) {
      problems.push_back("qid " + it.key() + ": answer must be a string");
      continue;
    }
    preds[it.key()] = it.value().get<std::string>();
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  return preds;
}

PredictionSet read_predictions(const std::filesystem::path& path) { return parse_predictions(read_file(path)); }

std::string predictions_to_json(const PredictionSet& preds) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [qid, answer] : preds) j[qid] = answer;
  return j.dump(2) + "\n";
}

void write_predictions(const std::filesystem::path& path, const PredictionSet& preds) {
  write_file(path, predictions_to_json(preds));
}

ScoreReport score_predictions(const PredictionSet& preds, std::span<const Example> gold, const YnDictionary& dict) {
  ScoreReport r;
  double em_sum = 0.0, yn_sum = 0.0, e_sum = 0.0, g_sum = 0.0;
  std::set<std::string_view> gold_ids;
  for (const Example& ex : gold) {
    if (!gold_ids.insert(ex.qid).second) throw ValidationError({"duplicate gold qid " + ex.qid});
    if (!ex.answer_type) throw ValidationError({"qid " + ex.qid + ": gold has no answer_type"});
    ++r.total;
    const auto it = preds.find(ex.qid);
    const bool have = it != preds.end();
    if (!have) {
      ++r.missing;
      r.warnings.push_back("no prediction for qid " + ex.qid + "; counted as wrong");
    }
    const std::string_view pred = have ? std::string_view(it->second) : std::string_view{};
    const int hit = have ? exact_match(pred, ex, dict) : 0;
    em_sum += hit;
    switch (*ex.answer_type) {
      case AnswerType::kYesNo:
        ++r.yes_no;
        yn_sum += hit;
        break;
      case AnswerType::kExtracted:
        ++r.extracted;
        e_sum += have ? token_f1(pred, *ex.answer) : 0.0;
        break;
      case AnswerType::kGenerated:
        ++r.generated;
        g_sum += have ? token_f1(pred, *ex.answer) : 0.0;
        break;
    }
  }
  for (const auto& [qid, answer] : preds) {
    if (!gold_ids.contains(qid)) {
      ++r.unmatched;
      r.warnings.push_back("prediction for unknown qid " + qid + " ignored");
    }
  }
  auto ratio = [](double s, std::size_t n) { return n == 0 ? 0.0 : s / static_cast<double>(n); };
  r.em = ratio(em_sum, r.total);
  r.yn_acc = ratio(yn_sum, r.yes_no);
  r.e_f1 = ratio(e_sum, r.extracted);
  r.g_f1 = ratio(g_sum, r.generated);
  return r;
}

std::string to_json(const ScoreReport& r) {
  nlohmann::ordered_json j;
  j["em"] = r.em;
  j["yn_acc"] = r.yn_acc;
  j["e_f1"] = r.e_f1;
  j["g_f1"] = r.g_f1;
  j["counts"] = {{"total", r.total},   {"YN", r.yes_no},       {"E", r.extracted}, {"G", r.generated},
                 {"missing", r.missing}, {"unmatched", r.unmatched}, {"warnings", r.warnings.size()}};
  return j.dump(2) + "\n";
}

std::string format_table(const ScoreReport& r) {
  char row[128];
  std::snprintf(row, sizeof(row), "%.3f\t%.3f\t%.3f\t%.3f\n", r.em, r.yn_acc, r.e_f1, r.g_f1);
  return std::string("EM\tYN-Acc\tE-F1\tG-F1\n") + row;
}

}  // namespace kecmrn
