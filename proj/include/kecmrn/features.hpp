#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "kecmrn/example.hpp"

namespace kecmrn {

struct FeatureRecord {
  std::string key;  // image_local_path or qid
  RegionFeatures features;
};

// Region features keyed by image path or qid. On disk:
//   "VTF1" | u16 version | u32 count |
//   count x [u16 key length | key bytes | u32 n_r | u32 d_i | n_r*d_i f32]
// all little-endian.
class FeatureContainer {
 public:
  static constexpr std::uint16_t kVersion = 1;

  FeatureContainer() = default;
  explicit FeatureContainer(std::vector<FeatureRecord> records);

  // Throws ValidationError on a duplicate key, ContractError on inconsistent sizes.
  void add(FeatureRecord record);

  const RegionFeatures* find(std::string_view key) const;
  // Throws NotFoundError.
  const RegionFeatures& at(std::string_view key) const;

  std::size_t size() const noexcept { return records_.size(); }
  const std::vector<FeatureRecord>& records() const noexcept { return records_; }

  std::string serialize() const;
  // Throws FormatError on bad magic/version, truncation or trailing bytes.
  static FeatureContainer deserialize(std::string_view bytes);

  void write(const std::filesystem::path& path) const;
  static FeatureContainer read(const std::filesystem::path& path);

 private:
  std::vector<FeatureRecord> records_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Fills Example::regions from the container, trying image_local_path first
// and then qid. Throws NotFoundError naming the first unresolved example.
void attach_features(std::vector<Example>& examples, const FeatureContainer& features);

}  // namespace kecmrn
