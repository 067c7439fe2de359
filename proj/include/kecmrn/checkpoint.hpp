#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <string_view>

#include "kecmrn/model.hpp"

namespace kecmrn {

// "KCPT" | u16 version | u8 scalar bytes | config text | token table |
// answer table | u32 epoch | RNG state | named parameters with shapes.
inline constexpr std::uint16_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
  Model<T> model;
  std::uint32_t epoch = 0;
  std::mt19937_64 rng;
};

template <typename T>
std::string serialize_checkpoint(const Model<T>& model, std::uint32_t epoch, const std::mt19937_64& rng);

// Parameters are matched by name and shape; any mismatch throws FormatError.
template <typename T>
Checkpoint<T> deserialize_checkpoint(std::string_view bytes);

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const Model<T>& model, std::uint32_t epoch,
                     const std::mt19937_64& rng);

template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

// Scalar width (4 or 8) recorded in a serialized checkpoint.
std::size_t checkpoint_scalar_bytes(std::string_view bytes);

}  // namespace kecmrn
