#pragma once

// Little-endian byte encoding shared by the feature, augmented-set and stats
// cache files. All three use the same envelope:
//   magic[4] | version u32 | dim u32 | record_count u64 | records...

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "gdc/common.hpp"

namespace gdc::binio {

inline constexpr std::size_t kHeaderBytes = 4 + 4 + 4 + 8;

class ByteWriter {
 public:
  void bytes(std::string_view raw) { buf_.insert(buf_.end(), raw.begin(), raw.end()); }

  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
  }

  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffU));
  }

  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void header(std::string_view magic, std::uint32_t version, std::uint32_t dim,
              std::uint64_t count) {
    bytes(magic);
    u32(version);
    u32(dim);
    u64(count);
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot open '" + path.string() + "' for writing");
    out.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw ValidationError("write to '" + path.string() + "' failed");
  }

  const std::vector<char>& buffer() const noexcept { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(std::vector<char> data, std::string source)
      : data_(std::move(data)), source_(std::move(source)) {}

  static ByteReader from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open '" + path.string() + "'");
    std::vector<char> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ByteReader(std::move(data), path.string());
  }

  std::size_t offset() const noexcept { return pos_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  const std::string& source() const noexcept { return source_; }

  [[noreturn]] void fail(const std::string& what) const { fail_at(pos_, what); }

  [[noreturn]] void fail_at(std::size_t offset, const std::string& what) const {
    throw ValidationError(source_ + ": " + what + " (byte offset " + std::to_string(offset) + ")");
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string out(data_.data() + pos_, n);
    pos_ += n;
    return out;
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

 private:
  void need(std::size_t n) const {
    if (remaining() < n) {
      fail("unexpected end of file, need " + std::to_string(n) + " more bytes");
    }
  }

  std::vector<char> data_;
  std::string source_;
  std::size_t pos_ = 0;
};

struct Header {
  std::uint32_t version = 0;
  std::uint32_t dim = 0;
  std::uint64_t count = 0;
};

/// Reads and checks the envelope. Fails on an empty file, wrong magic or
/// version, zero dim, and on a body size that does not match count records of
/// `record_bytes(dim)` each.
template <typename RecordBytes>
Header read_header(ByteReader& in, std::string_view magic, std::uint32_t version,
                   RecordBytes record_bytes) {
  if (in.size() == 0) in.fail_at(0, "empty file");
  if (in.size() < kHeaderBytes) in.fail_at(in.size(), "truncated header");
  const std::string got = in.bytes(4);
  if (got != magic) {
    in.fail_at(0, "bad magic, expected '" + std::string(magic) + "'");
  }
  Header h;
  h.version = in.u32();
  if (h.version != version) {
    in.fail_at(4, "unsupported format version " + std::to_string(h.version));
  }
  h.dim = in.u32();
  if (h.dim == 0) in.fail_at(8, "dimension must be positive");
  h.count = in.u64();
  const std::uint64_t per_record = record_bytes(h.dim);
  if (h.count > in.remaining() / per_record || h.count * per_record != in.remaining()) {
    in.fail_at(kHeaderBytes, "body holds " + std::to_string(in.remaining()) +
                                 " bytes but header declares " + std::to_string(h.count) +
                                 " records of " + std::to_string(per_record) + " bytes");
  }
  return h;
}

}  // namespace gdc::binio
