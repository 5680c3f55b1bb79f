#pragma once

#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

#include "depdb/codec.hpp"
#include "depdb/procedure.hpp"
#include "depdb/store.hpp"
#include "depdb/types.hpp"

namespace depdb {

/// Locality of a fine-grained record. A local transaction produces only
/// `local` records; a distributed transaction produces `home` records on its
/// coordinating node and `remote` records everywhere else.
enum class DistFlag : std::uint8_t { local = 0, home = 1, remote = 2 };

enum class RecordType : std::uint8_t { fine = 1, coarse = 2, aries = 3, epoch_marker = 4 };

/// One record per record action.
struct FineLogRecord {
  Lsn lsn = 0;
  TxnId txn;
  std::uint16_t action_index = 0;
  RecordRef target;
  AccessKind kind = AccessKind::read;
  /// Replay fragment: resolved op calls.
  std::vector<OpCall> ops;
  /// Outgoing dependency edges as LSNs; incoming edges are never stored.
  std::vector<Lsn> out_edges;
  DistFlag dist = DistFlag::local;
  /// Changed columns; populated only for remote records.
  ColumnImage before;
  ColumnImage after;
  bool end_of_txn = false;
  /// On the end-of-txn record: how many records the transaction wrote on
  /// this node, so a torn multi-file flush is detectable.
  std::uint32_t txn_records = 0;

  bool operator==(const FineLogRecord&) const = default;
};

struct RecordImage {
  RecordRef target;
  AccessKind kind = AccessKind::write;
  ColumnImage before;
  ColumnImage after;

  bool operator==(const RecordImage&) const = default;
};

/// One record per transaction per participating node.
struct CoarseLogRecord {
  Lsn lsn = 0;
  TxnId txn;
  std::string procedure;
  Bytes params;
  std::vector<TxnId> out_edges;
  bool distributed = false;
  /// Updated columns of this node's records; empty for local transactions.
  std::vector<RecordImage> images;

  bool operator==(const CoarseLogRecord&) const = default;
};

/// Baseline physical record: one per updated record per transaction.
struct AriesLogRecord {
  Lsn lsn = 0;
  TxnId txn;
  RecordRef target;
  AccessKind kind = AccessKind::write;
  bool distributed = false;
  ColumnImage before;
  ColumnImage after;
  bool end_of_txn = false;
  std::uint32_t txn_records = 0;

  bool operator==(const AriesLogRecord&) const = default;
};

enum class MarkerKind : std::uint8_t { prepared = 0, commit = 1, abort = 2, local = 3 };

/// Distributed-phase bookkeeping for one epoch on one node. `prepared` is
/// written with the distributed flush and carries that flush's record count;
/// `commit`/`abort` record the cluster decision. `local` closes the flush of
/// the local phase and carries its record count.
struct EpochMarker {
  EpochId epoch = 0;
  MarkerKind kind = MarkerKind::prepared;
  std::uint32_t record_count = 0;

  bool operator==(const EpochMarker&) const = default;
};

using LogEntry = std::variant<FineLogRecord, CoarseLogRecord, AriesLogRecord, EpochMarker>;

/// Framed encoding (type, length, crc32, payload).
Bytes encode_record(const LogEntry& entry);
/// Decode exactly one framed record; throws decode_error on any defect.
LogEntry decode_record(std::string_view framed);

void encode_image(ByteWriter& w, const ColumnImage& image);
ColumnImage decode_image(ByteReader& r);
void encode_ops(ByteWriter& w, const std::vector<OpCall>& ops);
std::vector<OpCall> decode_ops(ByteReader& r);

struct LogScan {
  std::vector<LogEntry> entries;
  /// Bytes of valid records; anything after is a torn tail.
  std::size_t valid_bytes = 0;
  bool torn_tail = false;
};

/// Decode a whole log file. A truncated or checksum-failing final record is
/// a torn tail and is dropped; a bad record followed by valid ones throws
/// unrecoverable_log.
LogScan scan_log(std::string_view data);

}  // namespace depdb
