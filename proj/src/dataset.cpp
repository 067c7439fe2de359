#include "kecmrn/dataset.hpp"

#include <set>

#include <json.hpp>

#include "kecmrn/binary_io.hpp"
#include "kecmrn/errors.hpp"

namespace kecmrn {

namespace {

using nlohmann::json;

std::string record_label(const json& rec, std::size_t position) {
  if (rec.is_object()) {
    const auto it = rec.find("qid");
    if (it != rec.end() && it->is_string()) return "qid " + it->get<std::string>();
    if (it != rec.end() && it->is_number_integer()) return "qid " + it->dump();
  }
  return "record #" + std::to_string(position);
}

void parse_record(const json& rec, std::size_t position, const std::string* key_qid, const LoadOptions& options,
                  std::vector<Example>& out, std::vector<std::string>& problems) {
  const std::size_t before = problems.size();
  if (!rec.is_object()) {
    problems.push_back(record_label(rec, position) + ": record must be a JSON object");
    return;
  }
  Example ex;
  std::string label = record_label(rec, position);
  auto fail = [&](const std::string& field, const std::string& what) {
    problems.push_back(label + ": " + field + ": " + what);
  };

  if (const auto it = rec.find("qid"); it != rec.end()) {
    if (it->is_string()) {
      ex.qid = it->get<std::string>();
    } else if (it->is_number_integer()) {
      ex.qid = it->dump();
      ex.qid_numeric = true;
    } else {
      fail("qid", "must be a string or integer");
    }
  } else if (key_qid != nullptr) {
    ex.qid = *key_qid;
    label = "qid " + ex.qid;
  } else {
    fail("qid", "missing");
  }
  if (ex.qid.empty() && !ex.qid_numeric && rec.contains("qid")) fail("qid", "must not be empty");

  auto string_field = [&](const char* name, bool required, bool non_empty) -> std::optional<std::string> {
    const auto it = rec.find(name);
    if (it == rec.end()) {
      if (required) fail(name, "missing");
      return std::nullopt;
    }
    if (!it->is_string()) {
      fail(name, "must be a string");
      return std::nullopt;
    }
    std::string v = it->get<std::string>();
    if (non_empty && v.empty()) fail(name, "must not be empty");
    return v;
  };

  ex.image_local_path = string_field("image_local_path", true, false).value_or("");
  ex.text = string_field("text", true, true).value_or("");
  ex.question = string_field("question", true, true).value_or("");
  ex.answer = string_field("answer", options.require_answers, false);
  if (auto code = string_field("answer_type", options.require_answers, false)) {
    ex.answer_type = parse_answer_type(*code);
    if (!ex.answer_type) fail("answer_type", "must be one of YN, E, G (got '" + *code + "')");
  }
  if (ex.answer_type && !ex.answer) fail("answer", "missing while answer_type is set");
  if (auto yn = string_field("yes_or_no", false, false)) {
    ex.yes_or_no = parse_yes_no(*yn);
    if (!ex.yes_or_no) fail("yes_or_no", "must be 'yes' or 'no' (got '" + *yn + "')");
  }
  const bool is_yn = ex.answer_type == AnswerType::kYesNo;
  if (rec.contains("yes_or_no") && ex.answer_type && !is_yn) {
    fail("yes_or_no", "present on a non-YN (" + std::string(answer_type_code(*ex.answer_type)) + ") answer");
  }
  if (is_yn && !rec.contains("yes_or_no")) fail("yes_or_no", "required for YN answers");

  if (problems.size() == before) out.push_back(std::move(ex));
}

}  // namespace

LoadResult parse_dataset(std::string_view json_text, const LoadOptions& options) {
  LoadResult result;
  if (json_text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    result.warnings.push_back("dataset is empty");
    return result;
  }
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("dataset is not valid JSON: ") + e.what());
  }
  std::vector<std::string> problems;
  if (doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) parse_record(doc[i], i, nullptr, options, result.examples, problems);
  } else if (doc.is_object()) {
    std::size_t i = 0;
    for (auto it = doc.begin(); it != doc.end(); ++it, ++i) {
      const std::string key = it.key();
      parse_record(it.value(), i, &key, options, result.examples, problems);
    }
  } else {
    throw ValidationError({"dataset must be a JSON array or object of records"});
  }
  std::set<std::string> seen;
  for (const auto& ex : result.examples) {
    if (!seen.insert(ex.qid).second) problems.push_back("qid " + ex.qid + ": qid: duplicate");
  }
  if (!problems.empty()) throw ValidationError(std::move(problems));
  if (result.examples.empty()) result.warnings.push_back("dataset is empty");
  return result;
}

LoadResult load_dataset(const std::filesystem::path& path, const LoadOptions& options) {
  return parse_dataset(read_file(path), options);
}

std::string serialize_dataset(std::span<const Example> examples) {
  nlohmann::ordered_json doc = nlohmann::ordered_json::array();
  for (const auto& ex : examples) {
    nlohmann::ordered_json rec;
    if (ex.qid_numeric) {
      rec["qid"] = nlohmann::ordered_json::parse(ex.qid);
    } else {
      rec["qid"] = ex.qid;
    }
    rec["image_local_path"] = ex.image_local_path;
    rec["text"] = ex.text;
    rec["question"] = ex.question;
    if (ex.answer) rec["answer"] = *ex.answer;
    if (ex.answer_type) rec["answer_type"] = std::string(answer_type_code(*ex.answer_type));
    if (ex.yes_or_no) rec["yes_or_no"] = std::string(yes_no_code(*ex.yes_or_no));
    doc.push_back(std::move(rec));
  }
  return doc.dump(2) + "\n";
}

void save_dataset(const std::filesystem::path& path, std::span<const Example> examples) {
  write_file(path, serialize_dataset(examples));
}

}  // namespace kecmrn
