#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kecmrn/config.hpp"
#include "kecmrn/gradcheck.hpp"

namespace kecmrn {

struct GradCheckSettings {
  std::size_t width = 8;
  std::size_t heads = 2;
  std::size_t modules = 1;
  std::size_t cmr_per_module = 1;
  std::size_t key_entities = 2;
  double eps = 1e-5;
  double tolerance = 1e-4;
};

struct NamedReport {
  std::string unit;  // "attention", "ffn", ..., "model"
  GradCheckReport report;
};

// Unit names accepted by run_gradcheck, in run order.
std::vector<std::string> gradcheck_units();

// Finite-difference checks at 64-bit of each unit (and the assembled model)
// on seeded random inputs. Unit losses are sum(output * R) with a fixed
// random R; the model loss is cross-entropy. Throws ContractError on an
// unknown unit name.
std::vector<NamedReport> run_gradcheck(const GradCheckSettings& settings, std::uint64_t seed,
                                       const std::vector<std::string>& units);

// Tiny model configuration used by the model-level check.
ModelConfig gradcheck_model_config(const GradCheckSettings& settings, std::uint64_t seed);

std::string to_json(const std::vector<NamedReport>& reports);

}  // namespace kecmrn
