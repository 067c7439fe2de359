#include "kecmrn/binary_io.hpp"

#include <fstream>
#include <limits>
#include <sstream>

namespace kecmrn {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed for " + path.string());
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

void ByteWriter::put_string16(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) throw ContractError("string too long for u16 length prefix");
  put(static_cast<std::uint16_t>(s.size()));
  put_bytes(s);
}

void ByteWriter::put_string32(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint32_t>::max()) throw ContractError("string too long for u32 length prefix");
  put(static_cast<std::uint32_t>(s.size()));
  put_bytes(s);
}

void ByteReader::need(std::size_t n) const {
  if (bytes_.size() - pos_ < n) {
    throw FormatError(context_ + ": truncated at byte " + std::to_string(pos_) + " (need " + std::to_string(n) +
                      ", have " + std::to_string(bytes_.size() - pos_) + ")");
  }
}

void ByteReader::expect_end() const {
  if (pos_ != bytes_.size()) {
    throw FormatError(context_ + ": " + std::to_string(bytes_.size() - pos_) + " trailing bytes after payload");
  }
}

}  // namespace kecmrn
