#include "neurosleep/binary_io.hpp"

#include <fstream>
#include <limits>
#include <sstream>

namespace neurosleep::io {

void ByteWriter::put_string16(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw ParameterError("string too long for u16 length prefix: " + std::to_string(s.size()));
  }
  put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
  put_bytes(s);
}

std::string_view ByteReader::get_bytes(std::size_t n) {
  if (n > remaining()) {
    fail("truncated: need " + std::to_string(n) + " bytes, " + std::to_string(remaining()) +
         " available");
  }
  const std::string_view out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

std::string ByteReader::get_string16() {
  const auto len = get<std::uint16_t>();
  return std::string(get_bytes(len));
}

void ByteReader::fail(const std::string& message) const { fail_at(pos_, message); }

void ByteReader::fail_at(std::size_t offset, const std::string& message) const {
  throw FormatError(what_ + ": " + message + " (byte offset " + std::to_string(offset) + ")");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed: " + path.string());
}

}  // namespace neurosleep::io
