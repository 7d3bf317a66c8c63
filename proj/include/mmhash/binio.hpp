#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mmhash/errors.hpp"

namespace mmhash {

inline constexpr char kMagic[4] = {'M', 'M', 'H', '1'};

enum class FileKind : uint8_t {
  Embeddings = 'E',
  Labels = 'L',
  Params = 'P',
  Codes = 'C',
};

/// Little-endian writer over any ostream. Multi-byte values are serialized
/// byte by byte so files are identical regardless of host endianness.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& os) : os_(os) {}

  void u8(uint8_t v) { os_.put(static_cast<char>(v)); }

  void u32(uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os_.write(b, 4);
  }

  void u64(uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
    os_.write(b, 8);
  }

  void f32(float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    u32(u);
  }

  void f64(double v) {
    uint64_t u;
    std::memcpy(&u, &v, 8);
    u64(u);
  }

  void f32_array(std::span<const float> vals) {
    if constexpr (std::endian::native == std::endian::little) {
      os_.write(reinterpret_cast<const char*>(vals.data()),
                static_cast<std::streamsize>(vals.size() * 4));
    } else {
      for (float v : vals) f32(v);
    }
  }

  void u64_array(std::span<const uint64_t> vals) {
    if constexpr (std::endian::native == std::endian::little) {
      os_.write(reinterpret_cast<const char*>(vals.data()),
                static_cast<std::streamsize>(vals.size() * 8));
    } else {
      for (uint64_t v : vals) u64(v);
    }
  }

  void bytes(std::span<const uint8_t> data) {
    os_.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
  }

  void magic(FileKind kind) {
    os_.write(kMagic, 4);
    u8(static_cast<uint8_t>(kind));
  }

 private:
  std::ostream& os_;
};

/// Little-endian reader; any short read raises TruncatedFile.
class BinaryReader {
 public:
  BinaryReader(std::istream& is, std::string name) : is_(is), name_(std::move(name)) {}

  uint8_t u8() {
    char c;
    read(&c, 1);
    return static_cast<uint8_t>(c);
  }

  uint32_t u32() {
    char b[4];
    read(b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(static_cast<uint8_t>(b[i])) << (8 * i);
    return v;
  }

  uint64_t u64() {
    char b[8];
    read(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(static_cast<uint8_t>(b[i])) << (8 * i);
    return v;
  }

  float f32() {
    const uint32_t u = u32();
    float v;
    std::memcpy(&v, &u, 4);
    return v;
  }

  double f64() {
    const uint64_t u = u64();
    double v;
    std::memcpy(&v, &u, 8);
    return v;
  }

  void f32_array(std::span<float> out) {
    if constexpr (std::endian::native == std::endian::little) {
      read(reinterpret_cast<char*>(out.data()), out.size() * 4);
    } else {
      for (float& v : out) v = f32();
    }
  }

  void u64_array(std::span<uint64_t> out) {
    if constexpr (std::endian::native == std::endian::little) {
      read(reinterpret_cast<char*>(out.data()), out.size() * 8);
    } else {
      for (uint64_t& v : out) v = u64();
    }
  }

  void bytes(std::span<uint8_t> out) {
    read(reinterpret_cast<char*>(out.data()), out.size());
  }

  void expect_magic(FileKind kind) {
    char m[4];
    read(m, 4);
    if (std::memcmp(m, kMagic, 4) != 0)
      raise(Err::BadMagic, name_ + ": not an MMH1 file");
    const uint8_t k = u8();
    if (k != static_cast<uint8_t>(kind))
      raise(Err::BadMagic, name_ + ": wrong kind byte '" + static_cast<char>(k) + "'");
  }

  /// Fails unless the stream is exactly exhausted.
  void expect_eof() {
    is_.peek();
    if (!is_.eof())
      raise(Err::TruncatedFile, name_ + ": trailing bytes beyond declared payload");
  }

  const std::string& name() const { return name_; }

 private:
  void read(char* dst, size_t n) {
    is_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<size_t>(is_.gcount()) != n)
      raise(Err::TruncatedFile, name_ + ": unexpected end of file");
  }

  std::istream& is_;
  std::string name_;
};

/// Runs `body` against a temp file and renames over `path` on success, so an
/// interrupted or failed write never leaves a partial artifact behind.
inline void atomic_write_file(const std::filesystem::path& path,
                              const std::function<void(std::ostream&)>& body) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  try {
    {
      std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
      if (!os) raise(Err::IoFailure, "cannot open " + tmp.string() + " for writing");
      body(os);
      os.flush();
      if (!os) raise(Err::IoFailure, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) raise(Err::IoFailure, "cannot open " + path.string() + " for reading");
  return is;
}

}  // namespace mmhash
