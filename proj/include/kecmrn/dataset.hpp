#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kecmrn/example.hpp"

namespace kecmrn {

// Split sizes of the full release, kept for tooling that sanity-checks it.
struct SplitSizes {
  static constexpr std::size_t kTrain = 11312;
  static constexpr std::size_t kVal = 1245;
  static constexpr std::size_t kTestDev = 2189;
  static constexpr std::size_t kTest = 9035;
};

struct LoadOptions {
  // Unlabeled splits (e.g. test-dev) ship without answer / answer_type.
  bool require_answers = true;
};

struct LoadResult {
  std::vector<Example> examples;
  std::vector<std::string> warnings;
};

// Accepts a JSON array of records or an object of records keyed by qid.
// Every record is checked; all violations are reported together in one
// ValidationError whose problems name the qid and field. Empty input yields
// an empty dataset plus a warning.
LoadResult parse_dataset(std::string_view json_text, const LoadOptions& options = {});
LoadResult load_dataset(const std::filesystem::path& path, const LoadOptions& options = {});

// JSON array in attribute order qid, image_local_path, text, question, answer,
// answer_type, yes_or_no.
std::string serialize_dataset(std::span<const Example> examples);
void save_dataset(const std::filesystem::path& path, std::span<const Example> examples);

}  // namespace kecmrn
