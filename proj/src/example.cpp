#include "kecmrn/example.hpp"

namespace kecmrn {

std::string_view answer_type_code(AnswerType type) {
  switch (type) {
    case AnswerType::kYesNo: return "YN";
    case AnswerType::kExtracted: return "E";
    case AnswerType::kGenerated: return "G";
  }
  return "?";
}

std::optional<AnswerType> parse_answer_type(std::string_view code) {
  if (code == "YN") return AnswerType::kYesNo;
  if (code == "E") return AnswerType::kExtracted;
  if (code == "G") return AnswerType::kGenerated;
  return std::nullopt;
}

std::string_view yes_no_code(YesNo v) { return v == YesNo::kYes ? "yes" : "no"; }

std::optional<YesNo> parse_yes_no(std::string_view code) {
  if (code == "yes") return YesNo::kYes;
  if (code == "no") return YesNo::kNo;
  return std::nullopt;
}

bool Example::same_record(const Example& o) const {
  return qid == o.qid && qid_numeric == o.qid_numeric && image_local_path == o.image_local_path && text == o.text &&
         question == o.question && answer == o.answer && answer_type == o.answer_type && yes_or_no == o.yes_or_no;
}

}  // namespace kecmrn
