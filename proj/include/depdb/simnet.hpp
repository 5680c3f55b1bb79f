#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "depdb/coordinator.hpp"
#include "depdb/durability.hpp"
#include "depdb/recovery.hpp"
#include "depdb/workload.hpp"

namespace depdb {

/// Simulated time; one tick is a microsecond.
using Tick = std::uint64_t;
inline constexpr Tick kTicksPerSecond = 1'000'000;

struct SimConfig {
  std::size_t nodes = 1;
  Tick rtt = 500;
  /// Added to every one-way delivery.
  Tick message_overhead = 0;
  std::uint64_t seed = 1;
  unsigned workers = 4;
  unsigned constructors = 1;
  std::size_t batch_size = 100;
  LogMode logging = LogMode::fine;
  /// Per record action, per graph edge examined during resolution, per flush.
  Tick action_cost = 20;
  Tick resolve_cost = 2;
  Tick flush_cost = 200;
  RecoveryCosts recovery;
  Tick restart_delay = 0;
  /// Checkpoint every k decided epochs (0: only the initial snapshot).
  std::uint64_t checkpoint_every = 0;
  std::filesystem::path log_dir = "depdb_logs";
  /// Stop issuing epochs after this much simulated time or this many epochs
  /// (0 = no limit); in-flight epochs still finish.
  double duration_s = 10;
  std::uint64_t max_epochs = 0;
  WorkloadConfig workload;
};

/// key=value lines; '#' starts a comment. Unknown keys and bad values throw
/// invalid_config. Keys: nodes rtt message_overhead seed workers constructors
/// batch_size logging action_cost resolve_cost flush_cost replay_cost
/// aries_replay_cost snapshot_load_cost log_load_cost restart_delay
/// checkpoint_every log_dir duration max_epochs workload theta keys
/// ops_per_txn read_ratio columns value_size warehouses districts customers
/// items dist_pct.
void apply_config_line(SimConfig& config, std::string_view key, std::string_view value);
SimConfig parse_sim_config(std::string_view text, SimConfig base = {});
SimConfig load_sim_config(const std::filesystem::path& path, SimConfig base = {});
/// Throws invalid_config on out-of-range values.
void validate(const SimConfig& config);

/// Deterministic discrete-event loop: events run in (time, insertion) order.
class EventLoop {
 public:
  using Fn = std::function<void()>;

  Tick now() const { return now_; }
  void at(Tick time, std::string label, Fn fn);
  void after(Tick delay, std::string label, Fn fn) { at(now_ + delay, std::move(label), std::move(fn)); }

  bool empty() const { return queue_.empty(); }
  std::size_t pending() const { return queue_.size(); }
  /// Run one event; false when none is left.
  bool step();
  /// Run every event with time <= `limit`.
  void run_until(Tick limit);
  void run();

  /// Running hash over (time, sequence, label) of every executed event.
  std::uint64_t trace_hash() const { return trace_; }
  std::uint64_t executed() const { return executed_; }

 private:
  struct Event {
    Tick time;
    std::uint64_t seq;
    std::string label;
    Fn fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  Tick now_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t trace_ = 0xcbf29ce484222325ULL;
  std::uint64_t executed_ = 0;
};

struct MessageCounts {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t dropped = 0;
  std::uint64_t bytes = 0;
  std::map<MessageType, std::uint64_t> by_type;
  /// SUBGRAPH messages per (epoch, origin).
  std::map<std::pair<EpochId, NodeId>, std::uint64_t> subgraphs;
};

/// Reliable FIFO links between live nodes. One-way delay is rtt/2 plus the
/// per-message overhead, identical for every message, so per-pair FIFO
/// follows from the event order. A crash drops everything in flight to or
/// from the node.
class Network {
 public:
  using Handler = std::function<void(NodeId dest, const Message& msg)>;
  using DropHandler = std::function<void(NodeId origin, NodeId dest, const Message& msg)>;

  Network(EventLoop& loop, std::size_t nodes, Tick rtt, Tick overhead = 0);

  void set_handler(Handler h) { handler_ = std::move(h); }
  /// Called at send time + rtt when the destination was dead.
  void set_drop_handler(DropHandler h) { on_drop_ = std::move(h); }

  void send(NodeId origin, NodeId dest, const Message& msg);
  void crash(NodeId node);
  void restart(NodeId node);
  bool alive(NodeId node) const { return alive_[node] != 0; }
  std::size_t size() const { return alive_.size(); }
  Tick one_way() const { return rtt_ / 2 + overhead_; }

  const MessageCounts& counts() const { return counts_; }

 private:
  EventLoop& loop_;
  Tick rtt_;
  Tick overhead_;
  std::vector<std::uint8_t> alive_;
  std::vector<std::uint64_t> generation_;
  Handler handler_;
  DropHandler on_drop_;
  MessageCounts counts_;
};

}  // namespace depdb
