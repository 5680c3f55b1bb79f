#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

#include "depdb/types.hpp"

namespace depdb {

/// Little-endian binary writer shared by the log, snapshot and wire formats.
class ByteWriter {
 public:
  ByteWriter() = default;
  explicit ByteWriter(Bytes initial) : buf_(std::move(initial)) {}

  template <typename T>
    requires std::is_integral_v<T>
  void put(T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      buf_.push_back(static_cast<char>((u >> (8 * i)) & 0xff));
    }
  }

  void u8(std::uint8_t v) { put(v); }
  void u16(std::uint16_t v) { put(v); }
  void u32(std::uint32_t v) { put(v); }
  void u64(std::uint64_t v) { put(v); }

  /// Length-prefixed (u16) short string, used for names.
  void name(std::string_view s);
  /// Length-prefixed (u32) byte string, used for values and payloads.
  void bytes(std::string_view s);
  void raw(std::string_view s) { buf_.append(s); }

  void txn_id(const TxnId& id) {
    u32(id.node);
    u64(id.epoch);
    u32(id.seq);
  }
  void record_ref(const RecordRef& ref) {
    name(ref.table);
    bytes(ref.key);
  }

  std::size_t size() const { return buf_.size(); }
  const Bytes& view() const { return buf_; }
  Bytes take() { return std::move(buf_); }

  /// Overwrite a previously written u32 at `offset`.
  void patch_u32(std::size_t offset, std::uint32_t v);

 private:
  Bytes buf_;
};

/// Bounds-checked reader. Every overrun throws decode_error.
class ByteReader {
 public:
  explicit ByteReader(std::string_view data) : data_(data) {}

  template <typename T>
    requires std::is_integral_v<T>
  T get() {
    need(sizeof(T));
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      u |= static_cast<U>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }

  std::uint8_t u8() { return get<std::uint8_t>(); }
  std::uint16_t u16() { return get<std::uint16_t>(); }
  std::uint32_t u32() { return get<std::uint32_t>(); }
  std::uint64_t u64() { return get<std::uint64_t>(); }

  std::string name();
  Bytes bytes();
  std::string_view raw(std::size_t n);

  TxnId txn_id() {
    TxnId id;
    id.node = u32();
    id.epoch = u64();
    id.seq = u32();
    return id;
  }
  RecordRef record_ref() {
    RecordRef ref;
    ref.table = name();
    ref.key = bytes();
    return ref;
  }

  std::size_t remaining() const { return data_.size() - pos_; }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == data_.size(); }
  void expect_done() const;

 private:
  void need(std::size_t n) const;

  std::string_view data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32(std::string_view data);

/// Frame layout: type (1 byte), payload length (4 bytes), crc32 of payload
/// (4 bytes), payload.
inline constexpr std::size_t kFrameHeaderSize = 9;

void append_frame(Bytes& out, std::uint8_t type, std::string_view payload);

struct Frame {
  std::uint8_t type = 0;
  std::string_view payload;
  std::size_t size = 0;  // header + payload
};

enum class FrameStatus : std::uint8_t { ok, truncated, corrupt };

/// Parse one frame at the start of `data`. `truncated` means the data ends
/// before the frame does; `corrupt` means the bytes are all present but the
/// checksum does not match.
FrameStatus read_frame(std::string_view data, Frame& frame);

}  // namespace depdb
