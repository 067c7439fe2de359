#include "kecmrn/features.hpp"

#include "kecmrn/binary_io.hpp"
#include "kecmrn/errors.hpp"

namespace kecmrn {

namespace {
constexpr std::string_view kMagic = "VTF1";
}

FeatureContainer::FeatureContainer(std::vector<FeatureRecord> records) {
  records_.reserve(records.size());
  for (auto& r : records) add(std::move(r));
}

void FeatureContainer::add(FeatureRecord record) {
  const auto& f = record.features;
  if (f.rows * f.cols != f.values.size()) {
    throw ContractError("feature record '" + record.key + "': " + std::to_string(f.rows) + "x" +
                        std::to_string(f.cols) + " does not match " + std::to_string(f.values.size()) + " values");
  }
  if (index_.contains(record.key)) throw ValidationError({"duplicate feature key '" + record.key + "'"});
  index_.emplace(record.key, records_.size());
  records_.push_back(std::move(record));
}

const RegionFeatures* FeatureContainer::find(std::string_view key) const {
  const auto it = index_.find(std::string(key));
  return it == index_.end() ? nullptr : &records_[it->second].features;
}

const RegionFeatures& FeatureContainer::at(std::string_view key) const {
  const RegionFeatures* f = find(key);
  if (f == nullptr) throw NotFoundError("no features for key '" + std::string(key) + "'");
  return *f;
}

std::string FeatureContainer::serialize() const {
  ByteWriter w;
  w.put_bytes(kMagic);
  w.put(kVersion);
  w.put(static_cast<std::uint32_t>(records_.size()));
  for (const auto& r : records_) {
    w.put_string16(r.key);
    w.put(static_cast<std::uint32_t>(r.features.rows));
    w.put(static_cast<std::uint32_t>(r.features.cols));
    for (float v : r.features.values) w.put(v);
  }
  return w.bytes();
}

FeatureContainer FeatureContainer::deserialize(std::string_view bytes) {
  ByteReader r(bytes, "feature container");
  if (r.get_bytes(kMagic.size()) != kMagic) throw FormatError("feature container: bad magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kVersion) throw FormatError("feature container: unsupported version " + std::to_string(version));
  const auto count = r.get<std::uint32_t>();
  FeatureContainer out;
  for (std::uint32_t i = 0; i < count; ++i) {
    FeatureRecord rec;
    rec.key = r.get_string16();
    rec.features.rows = r.get<std::uint32_t>();
    rec.features.cols = r.get<std::uint32_t>();
    const std::size_t n = rec.features.rows * rec.features.cols;
    if (n > r.remaining() / sizeof(float)) throw FormatError("feature container: truncated payload for '" + rec.key + "'");
    rec.features.values.resize(n);
    for (auto& v : rec.features.values) v = r.get<float>();
    try {
      out.add(std::move(rec));
    } catch (const ValidationError& e) {
      throw FormatError(std::string("feature container: ") + e.what());
    }
  }
  r.expect_end();
  return out;
}

void FeatureContainer::write(const std::filesystem::path& path) const { write_file(path, serialize()); }

FeatureContainer FeatureContainer::read(const std::filesystem::path& path) { return deserialize(read_file(path)); }

void attach_features(std::vector<Example>& examples, const FeatureContainer& features) {
  for (auto& ex : examples) {
    const RegionFeatures* f = features.find(ex.image_local_path);
    if (f == nullptr) f = features.find(ex.qid);
    if (f == nullptr) {
      throw NotFoundError("qid " + ex.qid + ": no region features under '" + ex.image_local_path + "' or its qid");
    }
    ex.regions = *f;
  }
}

}  // namespace kecmrn
