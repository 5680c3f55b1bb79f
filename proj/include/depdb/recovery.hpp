#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "depdb/durability.hpp"
#include "depdb/log_record.hpp"
#include "depdb/procedure.hpp"
#include "depdb/store.hpp"

namespace depdb {

/// A node's own view of an epoch's distributed commit, as read from its log
/// (or from volatile state while it is alive).
enum class Standing : std::uint8_t { none = 0, prepared = 1, committed = 2, aborted = 3 };

/// Every decodable entry of a node's log files.
struct LoadedLog {
  LogMode mode = LogMode::none;
  std::vector<FineLogRecord> fine;
  std::vector<CoarseLogRecord> coarse;
  std::vector<AriesLogRecord> aries;
  std::vector<EpochMarker> markers;
  std::uint64_t records = 0;
  std::uint64_t bytes = 0;
  bool torn = false;
  Lsn max_lsn = 0;
  EpochId max_epoch = 0;
};

/// Read all worker files of `node` for `mode`. Torn tails are dropped; with
/// `repair` the files are also truncated to their valid prefix so that new
/// appends stay decodable. Mid-file corruption throws unrecoverable_log.
LoadedLog load_log(const std::filesystem::path& dir, NodeId node, LogMode mode, bool repair);

/// Per-epoch distributed-commit standing recorded by markers.
std::map<EpochId, Standing> log_standings(const LoadedLog& log);

using ReplayPayload = std::variant<FineLogRecord, CoarseLogRecord, AriesLogRecord>;

struct ReplayItem {
  ReplayPayload payload;
  EpochId epoch = 0;
  std::uint8_t phase = 0;  // 0 local, 1 distributed
  Lsn lsn = 0;
  TxnId txn;
};

struct PrunedLog {
  LogMode mode = LogMode::none;
  /// Committed records, sorted by (epoch, phase, lsn).
  std::vector<ReplayItem> items;
  std::set<TxnId> txns;
  std::set<TxnId> dropped_txns;
  std::uint64_t dropped_records = 0;
  std::uint64_t skipped_records = 0;  // at or below the snapshot watermark
};

/// Keep only records of committed transactions: local-phase records need
/// their epoch's local flush marker, distributed-phase records a commit
/// marker or a commit in `decisions`; fine and aries records additionally
/// need a complete transaction (end-of-txn record with matching count).
PrunedLog prune_log(const LoadedLog& log, EpochId watermark, const std::map<EpochId, bool>& decisions = {});

struct ReplayVertex {
  ReplayItem item;
  /// Records this vertex touches on this node.
  std::vector<std::pair<RecordRef, AccessKind>> keys;
  /// Relative replay work (number of record actions).
  std::uint32_t weight = 1;
};

/// Vertices are stored in a topological order: every edge goes from a lower
/// to a higher index.
struct ReplayGraph {
  LogMode mode = LogMode::none;
  std::vector<ReplayVertex> vertices;
  std::vector<std::vector<std::uint32_t>> out;
  std::vector<std::vector<std::uint32_t>> in;
  std::size_t edge_count = 0;

  std::size_t size() const { return vertices.size(); }
  /// Every edge as (from, to), sorted.
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edge_list() const;
};

/// Restore edges from the stored outgoing lists within each flush unit, and
/// add cross-unit edges by chaining conflicting accesses per record.
/// `owner`/`self` select which records of a coarse transaction live here.
ReplayGraph rebuild_replay_graph(const PrunedLog& log, const Registry& registry, const KeyOwnership& owner,
                                 NodeId self);

bool check_acyclic(const ReplayGraph& graph);

/// Apply one vertex: fine local/home records replay their fragment, remote
/// records and distributed coarse records install their after-images, local
/// coarse records re-execute the procedure, aries records install images.
/// Determinism violations surface as unrecoverable_log.
void replay_vertex(Store& store, const Registry& registry, const ReplayVertex& vertex, LogMode mode);

/// Reference redo: every vertex in index order on the calling thread.
void serial_replay(Store& store, const Registry& registry, const ReplayGraph& graph);
/// Redo with `workers` real threads coordinated by completion latches.
void parallel_replay(Store& store, const Registry& registry, const ReplayGraph& graph, unsigned workers);
/// Baseline: install images strictly in LSN order. Returns records applied.
std::uint64_t serial_replay_aries(Store& store, std::span<const AriesLogRecord> records);

/// Simulated makespan of replaying `vertices` (ascending, topological) with
/// `workers` workers, each vertex costing weight * `cost`: greedy list
/// scheduling in index order.
std::uint64_t replay_makespan(const ReplayGraph& graph, std::span<const std::uint32_t> vertices, unsigned workers,
                              std::uint64_t cost);

/// Incremental replay of one graph: background replay in index order plus
/// on-demand replay of the predecessor closure of particular records. Each
/// vertex is replayed exactly once.
class ReplaySession {
 public:
  ReplaySession(Store& store, const Registry& registry, ReplayGraph graph);

  const ReplayGraph& graph() const { return graph_; }
  bool finished() const { return remaining_ == 0; }
  std::size_t remaining() const { return remaining_; }
  std::size_t replayed() const { return graph_.size() - remaining_; }
  bool is_done(std::uint32_t v) const { return done_[v] != 0; }

  /// Pending vertices touching `keys` plus all their pending predecessors,
  /// ascending.
  std::vector<std::uint32_t> closure(std::span<const RecordRef> keys) const;
  /// Replay `closure(keys)`; returns the vertices replayed.
  std::vector<std::uint32_t> recover_keys(std::span<const RecordRef> keys);
  /// Replay up to `max_vertices` pending vertices in index order.
  std::vector<std::uint32_t> background(std::size_t max_vertices);

 private:
  void run(const std::vector<std::uint32_t>& vertices);

  Store& store_;
  const Registry& registry_;
  ReplayGraph graph_;
  std::vector<std::uint8_t> done_;
  std::size_t remaining_;
  std::size_t cursor_ = 0;
  std::unordered_map<RecordRef, std::vector<std::uint32_t>, RecordRefHash> by_key_;
};

struct RecoveryCosts {
  std::uint64_t snapshot_record = 1;
  std::uint64_t log_record = 2;
  std::uint64_t replay_vertex = 10;
  std::uint64_t aries_record = 5;
};

struct PhaseTiming {
  std::string phase;
  std::uint64_t sim = 0;
  double wall_s = 0;
  std::uint64_t records = 0;
};

struct RecoveryReport {
  NodeId node = 0;
  LogMode mode = LogMode::none;
  unsigned workers = 1;
  /// data loading, log loading, replaying
  std::vector<PhaseTiming> phases;
  std::uint64_t replayed = 0;

  std::uint64_t total_sim() const;
  double total_wall() const;
  /// One JSON object per phase, newline separated.
  std::string json_lines() const;
};

struct RecoveryOptions {
  LogMode mode = LogMode::fine;
  unsigned workers = 1;
  /// Replay on real threads (otherwise single-threaded in index order; the
  /// result is the same).
  bool threaded = false;
  RecoveryCosts costs;
  /// Epoch decisions learned from peers for epochs without a local marker.
  std::map<EpochId, bool> decisions;
};

/// What a restarted node knows before talking to anyone.
struct DurableState {
  Store store;
  EpochId watermark = 0;
  Lsn next_lsn = 1;
  LoadedLog log;
  std::map<EpochId, Standing> standings;
  std::uint64_t snapshot_records = 0;
  double snapshot_wall_s = 0;
  double log_wall_s = 0;
};

/// Load snapshot and logs (repairing torn tails). Missing snapshot means an
/// empty store at watermark 0.
DurableState load_durable_state(const std::filesystem::path& dir, NodeId node, LogMode mode);

struct RecoveryResult {
  Store store;
  RecoveryReport report;
  std::set<TxnId> replayed_txns;
  Lsn next_lsn = 1;
  EpochId max_epoch = 0;
};

/// Whole-node recovery in one call: load, prune, rebuild, replay everything.
RecoveryResult recover_node(const std::filesystem::path& dir, NodeId node, const Registry& registry,
                            const KeyOwnership& owner, const RecoveryOptions& options);

}  // namespace depdb
