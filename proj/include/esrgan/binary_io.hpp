#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace esrgan::io {

/// Little-endian serializer for the project's versioned binary formats.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v);
  void f64s(std::span<const double> values);
  void str(std::string_view s);
  void raw(std::span<const std::uint8_t> data);
  /// u64 length prefix followed by the bytes.
  void blob(std::span<const std::uint8_t> data);

  /// Appends CRC-32 of everything written so far.
  void seal();

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

/// Bounds-checked reader; every overrun raises IntegrityError naming `what`.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what);

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64();
  std::vector<double> f64s(std::size_t count);
  std::string str();
  std::vector<std::uint8_t> blob();
  void expect_magic(std::string_view magic);

  bool done() const { return pos_ == bytes_.size(); }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  void expect_done();

 private:
  std::span<const std::uint8_t> take(std::size_t n);
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

/// Checks the trailing CRC-32 and returns the payload without it.
std::span<const std::uint8_t> verify_sealed(std::span<const std::uint8_t> bytes, const std::string& what);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

/// 64-bit FNV-1a, used for configuration fingerprints.
std::uint64_t fnv1a(std::string_view text);

}  // namespace esrgan::io
