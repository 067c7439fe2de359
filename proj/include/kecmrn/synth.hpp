#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kecmrn/example.hpp"
#include "kecmrn/features.hpp"

namespace kecmrn {

// Scenes of people with a hair color (named in both text and image), a shirt
// color (text only) and a held object (image only). Every question links a
// name in the text to a region in the image through the hair color.
struct SynthSpec {
  std::size_t yes_no = 11;
  std::size_t extracted = 11;
  std::size_t generated = 10;
  std::size_t entities_per_scene = 3;
  std::size_t image_dim = 16;
};

struct SynthDataset {
  std::vector<Example> examples;  // regions already attached
  FeatureContainer features;      // keyed by image_local_path
};

// Throws ContractError for infeasible specs: no questions, fewer than two or
// more than eight entities per scene, or image_dim < 16.
SynthDataset gen_synthetic(const SynthSpec& spec, std::uint64_t seed);

// Which evidence a symbolic oracle may use.
enum class OracleView { kFull, kTextOnly, kImageOnly };

// Reads the text and decodes the region features symbolically, then answers
// only if the visible evidence determines a single answer; nullopt otherwise.
std::optional<std::string> symbolic_answer(const Example& ex, OracleView view);

}  // namespace kecmrn
