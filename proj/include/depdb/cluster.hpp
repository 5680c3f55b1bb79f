#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "depdb/recovery.hpp"
#include "depdb/simnet.hpp"
#include "depdb/workload.hpp"

namespace depdb {

struct TranscriptEntry {
  Transaction txn;
  SerialOrder order;
  /// First commit report anywhere in the cluster.
  Tick committed = 0;
  /// Start of the epoch's resolution on the home node.
  Tick submitted = 0;
};

/// Every commit report, deduplicated per transaction.
class Transcript {
 public:
  void report(const Transaction& txn, const SerialOrder& order, Tick time, Tick submitted);
  bool contains(const TxnId& id) const { return by_id_.count(id) > 0; }
  std::size_t size() const { return by_order_.size(); }
  const std::map<SerialOrder, TranscriptEntry>& entries() const { return by_order_; }
  std::set<TxnId> ids() const;
  /// Committed transactions in their equivalent serial order.
  std::vector<Transaction> serial_order() const;

 private:
  std::map<SerialOrder, TranscriptEntry> by_order_;
  std::map<TxnId, SerialOrder> by_id_;
};

/// Execute `txns` one after another on freshly populated stores of every
/// node; the reference state for the serializability and recovery oracles.
Store serial_oracle(const Workload& workload, std::span<const Transaction> txns);

struct RecoveryRecord {
  NodeId node = 0;
  LogMode mode = LogMode::none;
  Tick crashed = 0;
  Tick restarted = 0;
  Tick loaded = 0;
  /// Status round decided and the node accepts transactions again.
  Tick rejoined = 0;
  /// Every committed log record replayed; 0 while still recovering.
  Tick recovered = 0;
  bool finished = false;
  /// Crashed again before finishing; a later record picks up from the log.
  bool interrupted = false;
  /// Snapshot epoch replay started from; older commits live in the snapshot.
  EpochId watermark = 0;
  RecoveryReport report;
  /// Transactions the node replays from its log.
  std::set<TxnId> replayed;
  /// Transcript at the moment of the crash.
  std::set<TxnId> committed_before_crash;
  std::uint64_t on_demand_vertices = 0;
  std::uint64_t background_vertices = 0;
  std::uint64_t graph_vertices = 0;
};

struct EpochStats {
  Tick started = 0;
  /// Last commit report of the epoch's distributed transactions.
  Tick dist_committed = 0;
  std::size_t dist_txns = 0;
  std::size_t local_txns = 0;
};

/// The simulated cluster: every node runs resolution, local execution,
/// distributed graph exchange and execution, group commit and recovery on
/// top of the event loop.
class Cluster {
 public:
  Cluster(SimConfig config, std::shared_ptr<const Workload> workload);
  ~Cluster();
  Cluster(const Cluster&) = delete;
  Cluster& operator=(const Cluster&) = delete;

  const SimConfig& config() const { return config_; }
  const Workload& workload() const { return *workload_; }
  EventLoop& loop() { return loop_; }
  Network& network() { return *net_; }
  const Network& network() const { return *net_; }

  /// Crash `node` at `time` and restart it `restart_delay` later.
  void schedule_crash(Tick time, NodeId node);
  void crash(NodeId node);
  void restart(NodeId node);

  /// Run until no event is left.
  void run();
  void run_until(Tick time);

  bool alive(NodeId node) const;
  bool recovering(NodeId node) const;
  const Store& store(NodeId node) const;
  /// Union of every node's store.
  Store combined_store() const;

  const Transcript& transcript() const { return transcript_; }
  const std::vector<RecoveryRecord>& recoveries() const { return recoveries_; }
  const std::map<EpochId, EpochStats>& epoch_stats() const { return epoch_stats_; }
  std::uint64_t log_bytes() const;
  /// Transactions generated by all nodes so far.
  std::uint64_t submitted() const { return submitted_txns_; }
  /// Highest epoch any node started.
  EpochId max_epoch_started() const;

 private:
  struct Node;
  friend struct Node;

  void deliver(NodeId dest, const Message& msg);
  bool may_start_epoch(EpochId e);
  void report_commit(const Transaction& txn, const SerialOrder& order, Tick submitted);

  SimConfig config_;
  std::shared_ptr<const Workload> workload_;
  EventLoop loop_;
  std::unique_ptr<Network> net_;
  std::vector<std::unique_ptr<Node>> nodes_;
  Transcript transcript_;
  std::vector<RecoveryRecord> recoveries_;
  std::map<EpochId, EpochStats> epoch_stats_;
  std::optional<EpochId> stop_after_;
  std::map<std::pair<EpochId, NodeId>, Tick> submitted_;
  std::uint64_t submitted_txns_ = 0;
};

}  // namespace depdb
