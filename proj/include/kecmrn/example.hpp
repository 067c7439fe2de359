#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kecmrn {

enum class AnswerType { kYesNo, kExtracted, kGenerated };

// "YN", "E", "G"
std::string_view answer_type_code(AnswerType type);
std::optional<AnswerType> parse_answer_type(std::string_view code);

enum class YesNo { kYes, kNo };

std::string_view yes_no_code(YesNo v);
std::optional<YesNo> parse_yes_no(std::string_view code);

// Row-major [rows x cols] block of bottom-up region features.
struct RegionFeatures {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<float> values;

  bool empty() const noexcept { return rows == 0; }
  bool operator==(const RegionFeatures&) const = default;
};

// One dataset record. `answer` and `answer_type` are absent only in
// unlabeled splits; `yes_or_no` is present exactly for yes/no answers.
struct Example {
  std::string qid;
  bool qid_numeric = false;  // qid was a JSON number in the source file
  std::string image_local_path;
  std::string text;
  std::string question;
  std::optional<std::string> answer;
  std::optional<AnswerType> answer_type;
  std::optional<YesNo> yes_or_no;
  RegionFeatures regions;  // resolved from a feature container, never serialized

  bool same_record(const Example& other) const;
};

}  // namespace kecmrn
