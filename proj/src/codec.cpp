#include "depdb/codec.hpp"

#include <zlib.h>

#include <limits>

namespace depdb {

void ByteWriter::name(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint16_t>::max()) {
    throw Error(ErrorCode::malformed_params, "name longer than 65535 bytes");
  }
  u16(static_cast<std::uint16_t>(s.size()));
  buf_.append(s);
}

void ByteWriter::bytes(std::string_view s) {
  if (s.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::malformed_params, "byte string too long");
  }
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void ByteWriter::patch_u32(std::size_t offset, std::uint32_t v) {
  for (std::size_t i = 0; i < 4; ++i) {
    buf_[offset + i] = static_cast<char>((v >> (8 * i)) & 0xff);
  }
}

void ByteReader::need(std::size_t n) const {
  if (data_.size() - pos_ < n) {
    throw Error(ErrorCode::decode_error, "unexpected end of data");
  }
}

std::string ByteReader::name() {
  auto n = u16();
  return std::string(raw(n));
}

Bytes ByteReader::bytes() {
  auto n = u32();
  return Bytes(raw(n));
}

std::string_view ByteReader::raw(std::size_t n) {
  need(n);
  auto out = data_.substr(pos_, n);
  pos_ += n;
  return out;
}

void ByteReader::expect_done() const {
  if (!done()) throw Error(ErrorCode::decode_error, "trailing bytes");
}

std::uint32_t crc32(std::string_view data) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      ::crc32(crc, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

void append_frame(Bytes& out, std::uint8_t type, std::string_view payload) {
  ByteWriter w(std::move(out));
  w.u8(type);
  w.u32(static_cast<std::uint32_t>(payload.size()));
  w.u32(crc32(payload));
  w.raw(payload);
  out = w.take();
}

FrameStatus read_frame(std::string_view data, Frame& frame) {
  if (data.size() < kFrameHeaderSize) return FrameStatus::truncated;
  ByteReader r(data.substr(0, kFrameHeaderSize));
  frame.type = r.u8();
  std::uint32_t len = r.u32();
  std::uint32_t crc = r.u32();
  if (data.size() - kFrameHeaderSize < len) return FrameStatus::truncated;
  frame.payload = data.substr(kFrameHeaderSize, len);
  frame.size = kFrameHeaderSize + len;
  if (crc32(frame.payload) != crc) return FrameStatus::corrupt;
  return FrameStatus::ok;
}

}  // namespace depdb
