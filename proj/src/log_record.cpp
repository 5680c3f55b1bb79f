#include "depdb/log_record.hpp"

#include "depdb/codec.hpp"

namespace depdb {

void encode_image(ByteWriter& w, const ColumnImage& image) {
  w.u16(static_cast<std::uint16_t>(image.size()));
  for (const auto& [name, value] : image) {
    w.name(name);
    w.bytes(value);
  }
}

ColumnImage decode_image(ByteReader& r) {
  ColumnImage image;
  auto n = r.u16();
  image.reserve(n);
  for (std::uint16_t i = 0; i < n; ++i) {
    auto name = r.name();
    image.emplace_back(std::move(name), r.bytes());
  }
  return image;
}

void encode_ops(ByteWriter& w, const std::vector<OpCall>& ops) {
  w.u16(static_cast<std::uint16_t>(ops.size()));
  for (const auto& call : ops) {
    w.name(call.op);
    w.bytes(call.args.encode());
  }
}

std::vector<OpCall> decode_ops(ByteReader& r) {
  std::vector<OpCall> ops;
  auto n = r.u16();
  ops.reserve(n);
  for (std::uint16_t i = 0; i < n; ++i) {
    OpCall call;
    call.op = r.name();
    try {
      call.args = Args::decode(r.bytes());
    } catch (const Error& e) {
      throw Error(ErrorCode::decode_error, e.what());
    }
    ops.push_back(std::move(call));
  }
  return ops;
}

namespace {

AccessKind decode_kind(std::uint8_t raw) {
  if (raw < 1 || raw > 4) throw Error(ErrorCode::decode_error, "bad access kind");
  return static_cast<AccessKind>(raw);
}

struct Encoder {
  ByteWriter& w;

  RecordType operator()(const FineLogRecord& r) const {
    w.u64(r.lsn);
    w.txn_id(r.txn);
    w.u16(r.action_index);
    w.record_ref(r.target);
    w.u8(static_cast<std::uint8_t>(r.kind));
    encode_ops(w, r.ops);
    w.u32(static_cast<std::uint32_t>(r.out_edges.size()));
    for (auto e : r.out_edges) w.u64(e);
    w.u8(static_cast<std::uint8_t>(r.dist));
    encode_image(w, r.before);
    encode_image(w, r.after);
    w.u8(r.end_of_txn ? 1 : 0);
    if (r.end_of_txn) w.u32(r.txn_records);
    return RecordType::fine;
  }

  RecordType operator()(const CoarseLogRecord& r) const {
    w.u64(r.lsn);
    w.txn_id(r.txn);
    w.name(r.procedure);
    w.bytes(r.params);
    w.u32(static_cast<std::uint32_t>(r.out_edges.size()));
    for (const auto& t : r.out_edges) w.txn_id(t);
    w.u8(r.distributed ? 1 : 0);
    w.u16(static_cast<std::uint16_t>(r.images.size()));
    for (const auto& img : r.images) {
      w.record_ref(img.target);
      w.u8(static_cast<std::uint8_t>(img.kind));
      encode_image(w, img.before);
      encode_image(w, img.after);
    }
    return RecordType::coarse;
  }

  RecordType operator()(const AriesLogRecord& r) const {
    w.u64(r.lsn);
    w.txn_id(r.txn);
    w.record_ref(r.target);
    w.u8(static_cast<std::uint8_t>(r.kind));
    w.u8(r.distributed ? 1 : 0);
    encode_image(w, r.before);
    encode_image(w, r.after);
    w.u8(r.end_of_txn ? 1 : 0);
    if (r.end_of_txn) w.u32(r.txn_records);
    return RecordType::aries;
  }

  RecordType operator()(const EpochMarker& m) const {
    w.u64(m.epoch);
    w.u8(static_cast<std::uint8_t>(m.kind));
    w.u32(m.record_count);
    return RecordType::epoch_marker;
  }
};

FineLogRecord decode_fine(ByteReader& r) {
  FineLogRecord out;
  out.lsn = r.u64();
  out.txn = r.txn_id();
  out.action_index = r.u16();
  out.target = r.record_ref();
  out.kind = decode_kind(r.u8());
  out.ops = decode_ops(r);
  auto edges = r.u32();
  if (edges > r.remaining() / 8) throw Error(ErrorCode::decode_error, "edge count exceeds payload");
  out.out_edges.reserve(edges);
  for (std::uint32_t i = 0; i < edges; ++i) out.out_edges.push_back(r.u64());
  auto dist = r.u8();
  if (dist > 2) throw Error(ErrorCode::decode_error, "bad dist flag");
  out.dist = static_cast<DistFlag>(dist);
  out.before = decode_image(r);
  out.after = decode_image(r);
  auto end = r.u8();
  if (end > 1) throw Error(ErrorCode::decode_error, "bad end marker");
  out.end_of_txn = end == 1;
  if (out.end_of_txn) out.txn_records = r.u32();
  return out;
}

CoarseLogRecord decode_coarse(ByteReader& r) {
  CoarseLogRecord out;
  out.lsn = r.u64();
  out.txn = r.txn_id();
  out.procedure = r.name();
  out.params = r.bytes();
  auto edges = r.u32();
  if (edges > r.remaining() / 16) throw Error(ErrorCode::decode_error, "edge count exceeds payload");
  out.out_edges.reserve(edges);
  for (std::uint32_t i = 0; i < edges; ++i) out.out_edges.push_back(r.txn_id());
  auto dist = r.u8();
  if (dist > 1) throw Error(ErrorCode::decode_error, "bad dist flag");
  out.distributed = dist == 1;
  auto images = r.u16();
  for (std::uint16_t i = 0; i < images; ++i) {
    RecordImage img;
    img.target = r.record_ref();
    img.kind = decode_kind(r.u8());
    img.before = decode_image(r);
    img.after = decode_image(r);
    out.images.push_back(std::move(img));
  }
  return out;
}

AriesLogRecord decode_aries(ByteReader& r) {
  AriesLogRecord out;
  out.lsn = r.u64();
  out.txn = r.txn_id();
  out.target = r.record_ref();
  out.kind = decode_kind(r.u8());
  auto dist = r.u8();
  if (dist > 1) throw Error(ErrorCode::decode_error, "bad dist flag");
  out.distributed = dist == 1;
  out.before = decode_image(r);
  out.after = decode_image(r);
  auto end = r.u8();
  if (end > 1) throw Error(ErrorCode::decode_error, "bad end marker");
  out.end_of_txn = end == 1;
  if (out.end_of_txn) out.txn_records = r.u32();
  return out;
}

EpochMarker decode_marker(ByteReader& r) {
  EpochMarker m;
  m.epoch = r.u64();
  auto kind = r.u8();
  if (kind > 3) throw Error(ErrorCode::decode_error, "bad marker kind");
  m.kind = static_cast<MarkerKind>(kind);
  m.record_count = r.u32();
  return m;
}

LogEntry decode_payload(std::uint8_t type, std::string_view payload) {
  ByteReader r(payload);
  LogEntry out;
  switch (static_cast<RecordType>(type)) {
    case RecordType::fine: out = decode_fine(r); break;
    case RecordType::coarse: out = decode_coarse(r); break;
    case RecordType::aries: out = decode_aries(r); break;
    case RecordType::epoch_marker: out = decode_marker(r); break;
    default: throw Error(ErrorCode::decode_error, "unknown record type " + std::to_string(type));
  }
  r.expect_done();
  return out;
}

}  // namespace

Bytes encode_record(const LogEntry& entry) {
  ByteWriter payload;
  RecordType type = std::visit(Encoder{payload}, entry);
  Bytes out;
  append_frame(out, static_cast<std::uint8_t>(type), payload.view());
  return out;
}

LogEntry decode_record(std::string_view framed) {
  Frame f;
  switch (read_frame(framed, f)) {
    case FrameStatus::truncated: throw Error(ErrorCode::decode_error, "truncated record");
    case FrameStatus::corrupt: throw Error(ErrorCode::decode_error, "checksum mismatch");
    case FrameStatus::ok: break;
  }
  if (f.size != framed.size()) throw Error(ErrorCode::decode_error, "trailing bytes after record");
  return decode_payload(f.type, f.payload);
}

LogScan scan_log(std::string_view data) {
  LogScan scan;
  std::size_t pos = 0;
  while (pos < data.size()) {
    Frame f;
    auto status = read_frame(data.substr(pos), f);
    if (status == FrameStatus::ok) {
      try {
        scan.entries.push_back(decode_payload(f.type, f.payload));
      } catch (const Error&) {
        // Checksum passed but the payload does not parse: a writer bug.
        throw Error(ErrorCode::unrecoverable_log, "undecodable record at offset " + std::to_string(pos));
      }
      pos += f.size;
      continue;
    }
    if (status == FrameStatus::corrupt) {
      // Corruption is only tolerable as the last thing in the file.
      std::size_t next = pos + f.size;
      Frame probe;
      if (next < data.size() && read_frame(data.substr(next), probe) == FrameStatus::ok) {
        throw Error(ErrorCode::unrecoverable_log, "corrupt record at offset " + std::to_string(pos) +
                                                      " followed by valid records");
      }
    }
    scan.torn_tail = true;
    break;
  }
  scan.valid_bytes = pos;
  return scan;
}

}  // namespace depdb
