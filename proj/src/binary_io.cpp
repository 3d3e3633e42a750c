#include "esrgan/binary_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

#include "esrgan/errors.hpp"

namespace esrgan::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::f64s(std::span<const double> values) {
  const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
  bytes_.insert(bytes_.end(), p, p + values.size_bytes());
}

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::raw(std::span<const std::uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }

void ByteWriter::blob(std::span<const std::uint8_t> data) {
  u64(data.size());
  raw(data);
}

void ByteWriter::seal() { u32(crc32(bytes_)); }

ByteReader::ByteReader(std::span<const std::uint8_t> bytes, std::string what)
    : bytes_(bytes), what_(std::move(what)) {}

std::span<const std::uint8_t> ByteReader::take(std::size_t n) {
  if (n > bytes_.size() - pos_) throw IntegrityError(what_ + ": truncated data");
  auto out = bytes_.subspan(pos_, n);
  pos_ += n;
  return out;
}

std::uint8_t ByteReader::u8() { return take(1)[0]; }

std::uint32_t ByteReader::u32() {
  auto b = take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  auto b = take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::vector<double> ByteReader::f64s(std::size_t count) {
  if (count > remaining() / sizeof(double)) throw IntegrityError(what_ + ": truncated data");
  auto b = take(count * sizeof(double));
  std::vector<double> out(count);
  std::memcpy(out.data(), b.data(), b.size());
  return out;
}

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  auto b = take(n);
  return std::string(b.begin(), b.end());
}

std::vector<std::uint8_t> ByteReader::blob() {
  const std::uint64_t n = u64();
  if (n > remaining()) throw IntegrityError(what_ + ": truncated data");
  auto b = take(static_cast<std::size_t>(n));
  return {b.begin(), b.end()};
}

void ByteReader::expect_magic(std::string_view magic) {
  auto b = take(magic.size());
  if (std::memcmp(b.data(), magic.data(), magic.size()) != 0) throw IntegrityError(what_ + ": bad magic");
}

void ByteReader::expect_done() {
  if (!done()) throw IntegrityError(what_ + ": trailing bytes");
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t offset = 0;
  while (offset < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - offset, 1u << 30));
    crc = ::crc32(crc, bytes.data() + offset, chunk);
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::span<const std::uint8_t> verify_sealed(std::span<const std::uint8_t> bytes, const std::string& what) {
  if (bytes.size() < 4) throw IntegrityError(what + ": file too short");
  auto payload = bytes.first(bytes.size() - 4);
  ByteReader tail(bytes.last(4), what);
  if (tail.u32() != crc32(payload)) throw IntegrityError(what + ": checksum mismatch");
  return payload;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace esrgan::io
