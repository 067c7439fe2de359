#include "kecmrn/errors.hpp"

namespace kecmrn {

namespace {
std::string summarize(const std::vector<std::string>& problems) {
  if (problems.empty()) return "validation failed";
  std::string msg = problems.front();
  if (problems.size() > 1) msg += " (and " + std::to_string(problems.size() - 1) + " more)";
  return msg;
}
}  // namespace

ValidationError::ValidationError(std::vector<std::string> problems)
    : std::runtime_error(summarize(problems)), problems_(std::move(problems)) {}

}  // namespace kecmrn
