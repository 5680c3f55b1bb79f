#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "depdb/depgraph.hpp"
#include "depdb/log_record.hpp"
#include "depdb/procedure.hpp"
#include "depdb/store.hpp"

namespace depdb {

enum class LogMode : std::uint8_t { none, fine, coarse, aries };

std::string_view to_string(LogMode mode);
/// Throws invalid_config for unknown names.
LogMode parse_log_mode(std::string_view name);

/// Transaction-level dependency graph (coarse-grained logging).
struct TxnDependencyGraph {
  std::vector<TxnId> vertices;
  std::set<TxnEdge> edges;

  bool operator==(const TxnDependencyGraph&) const = default;
};

/// Project temporal-edge events onto transactions, deduplicating.
TxnDependencyGraph transform_to_txn_graph(std::span<const TxnId> txns, std::span<const TxnEdge> events);

bool check_acyclic(const TxnDependencyGraph& graph);

/// Execution outcome of one graph vertex.
struct ExecutedVertex {
  ExecutedAction exec;
  unsigned worker = 0;
  /// Global completion order; LSNs follow it.
  std::uint64_t completion = 0;
};

using TxnLookup = std::function<const Transaction&(const TxnId&)>;

struct EmitInput {
  const DependencyGraph& graph;
  /// Indexed by vertex.
  std::span<const ExecutedVertex> executed;
  NodeId self = 0;
  /// True for the merged distributed-transaction graph.
  bool distributed_phase = false;
};

template <typename R>
struct Emission {
  std::vector<R> records;
  /// Worker buffer each record goes to.
  std::vector<unsigned> workers;
  /// LSN assigned to each vertex (fine) or to the transaction record (coarse),
  /// in record order.
  std::vector<std::uint32_t> source_vertex;
};

/// One record per vertex, LSNs in completion order, outgoing temporal edges
/// translated to LSNs. The last record of each transaction on this node
/// carries the end-of-txn marker.
Emission<FineLogRecord> emit_fine_records(const EmitInput& in, Lsn& next_lsn);

/// One record per transaction on this node, carrying the transaction-level
/// edges; remote column images for distributed transactions.
Emission<CoarseLogRecord> emit_coarse_records(const EmitInput& in, const TxnDependencyGraph& txn_graph,
                                              const TxnLookup& lookup, Lsn& next_lsn);

/// Baseline: one physical record per write action.
Emission<AriesLogRecord> emit_aries_records(const EmitInput& in, Lsn& next_lsn);

/// Tracks, per transaction, the LSN of its last flushed record until the
/// end-of-txn record is durable.
class ActiveTxnTable {
 public:
  void on_flushed(const TxnId& txn, Lsn lsn, bool end_of_txn);
  std::optional<Lsn> last_lsn(const TxnId& txn) const;
  std::size_t size() const { return table_.size(); }
  void clear() { table_.clear(); }

 private:
  std::map<TxnId, Lsn> table_;
};

struct FlushReceipt {
  /// Number of worker log files written by this flush.
  unsigned files_written = 0;
  std::uint64_t bytes = 0;
  std::uint64_t records = 0;
};

std::filesystem::path log_file_path(const std::filesystem::path& dir, NodeId node, unsigned worker, LogMode mode);

/// Per-worker log buffers and files for one node. Each execution worker
/// appends to its own buffer; `flush` writes every buffer to that worker's
/// file in one go at the epoch barrier.
class LogWriter {
 public:
  LogWriter(std::filesystem::path dir, NodeId node, LogMode mode, unsigned workers);

  LogMode mode() const { return mode_; }
  unsigned workers() const { return workers_; }
  NodeId node() const { return node_; }

  Lsn& next_lsn() { return next_lsn_; }
  void set_next_lsn(Lsn lsn) { next_lsn_ = lsn; }

  void append(unsigned worker, const LogEntry& entry);
  template <typename R>
  void append_all(const Emission<R>& emission) {
    for (std::size_t i = 0; i < emission.records.size(); ++i) append(emission.workers[i], emission.records[i]);
  }

  std::uint64_t pending_bytes() const;
  std::uint64_t pending_records() const { return pending_records_; }

  /// Durably append every buffer to its worker file. Throws storage_failure.
  FlushReceipt flush();
  /// Crash in the middle of a flush: each buffer reaches its file only up to
  /// a random prefix (possibly cutting a record in half).
  void flush_torn(std::mt19937_64& rng);
  /// Drop buffered, unflushed records (volatile state lost).
  void discard();

  /// Write a single marker record straight to worker 0's file.
  void write_marker(const EpochMarker& marker);

  const ActiveTxnTable& active_txns() const { return active_; }
  std::uint64_t total_bytes() const { return total_bytes_; }
  std::uint64_t flush_count() const { return flush_count_; }

  std::vector<std::filesystem::path> files() const;

 private:
  void write_file(unsigned worker, std::string_view data);

  std::filesystem::path dir_;
  NodeId node_;
  LogMode mode_;
  unsigned workers_;
  Lsn next_lsn_ = 1;
  std::vector<Bytes> buffers_;
  std::vector<std::vector<std::pair<TxnId, std::pair<Lsn, bool>>>> pending_meta_;
  std::uint64_t pending_records_ = 0;
  ActiveTxnTable active_;
  std::uint64_t total_bytes_ = 0;
  std::uint64_t flush_count_ = 0;
};

struct Snapshot {
  /// Epoch watermark: every log record of an epoch <= watermark is already
  /// reflected in `store`.
  EpochId watermark = 0;
  Lsn next_lsn = 1;
  Store store;
};

std::filesystem::path snapshot_path(const std::filesystem::path& dir, NodeId node);

/// Write atomically (temp file + rename). On failure the previous snapshot
/// stays in place and storage_failure is thrown.
void write_checkpoint(const std::filesystem::path& dir, NodeId node, const Store& store, EpochId watermark,
                      Lsn next_lsn);
std::optional<Snapshot> read_checkpoint(const std::filesystem::path& dir, NodeId node);

Bytes read_file(const std::filesystem::path& path);

}  // namespace depdb
