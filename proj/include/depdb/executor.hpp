#pragma once

#include <atomic>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "depdb/depgraph.hpp"
#include "depdb/durability.hpp"
#include "depdb/procedure.hpp"
#include "depdb/store.hpp"

namespace depdb {

/// Transaction contexts of one graph, keyed by transaction. Populate with
/// `prepare` before handing the table to several workers: workers then only
/// touch existing entries, and actions of one transaction are chained by
/// logical edges, so no entry is used by two workers at once.
class ContextTable {
 public:
  void prepare(const DependencyGraph& graph);
  TxnContext& at(const TxnId& id);
  void merge(const TxnId& id, const Args& values) { table_[id].merge(values); }

 private:
  std::unordered_map<TxnId, TxnContext, TxnIdHash> table_;
};

/// Per-vertex completion latches shared by the workers of one graph.
class Latches {
 public:
  explicit Latches(std::size_t n) : done_(n) {}
  void wait(std::uint32_t v) const;
  void signal(std::uint32_t v);
  std::uint64_t next_completion() { return counter_.fetch_add(1); }

 private:
  std::vector<std::atomic<std::uint8_t>> done_;
  std::atomic<std::uint64_t> counter_{0};
};

/// Run one worker's schedule, waiting on the latch of every in-edge before
/// each vertex. Effects come back in execution order.
std::vector<std::pair<std::uint32_t, ExecutedVertex>> execute_schedule(Store& store, const Registry& registry,
                                                                       const DependencyGraph& graph,
                                                                       const Schedule& schedule,
                                                                       ContextTable& contexts, Latches& latches);

/// Execute a whole graph on one real thread per schedule. Result is indexed
/// by vertex; `completion` is the global finishing order.
std::vector<ExecutedVertex> run_graph_threaded(Store& store, const Registry& registry, const DependencyGraph& graph,
                                               std::span<const Schedule> schedules, ContextTable& contexts);

struct VertexTiming {
  std::uint64_t start = 0;
  std::uint64_t finish = 0;
  unsigned worker = 0;
};

struct ScheduleTiming {
  /// Indexed like the graph; only scheduled vertices are meaningful.
  std::vector<VertexTiming> timing;
  /// Scheduled vertices sorted by finish time (a topological order).
  std::vector<std::uint32_t> completion_order;
  std::uint64_t end = 0;
};

/// Logical-time execution of schedules: each worker runs its list in order,
/// a vertex starts once its worker is free and all of its scheduled
/// predecessors have finished, and takes `cost` units.
ScheduleTiming time_schedules(const DependencyGraph& graph, std::span<const Schedule> schedules, std::uint64_t cost,
                              std::uint64_t start);

/// Single-threaded execution in simulated time: derive schedules over
/// `subset` (all vertices when empty), time them, then apply the actions in
/// completion order. `executed[v]` is filled for every vertex run.
struct VirtualRun {
  std::vector<std::uint32_t> order;
  std::uint64_t end = 0;
};
VirtualRun run_graph_virtual(Store& store, const Registry& registry, const DependencyGraph& graph,
                             std::span<const std::uint32_t> subset, unsigned workers, std::uint64_t cost,
                             std::uint64_t start, ContextTable& contexts, std::vector<ExecutedVertex>& executed,
                             std::uint64_t& completion_counter);

/// Tracks which vertices of a distributed graph may run: a vertex is ready
/// when all local predecessors are done and all remote predecessors have
/// reported completion.
class WaveRunner {
 public:
  explicit WaveRunner(const DependencyGraph& graph);

  /// A remote action finished.
  void remote_done(const ActionId& remote);
  /// Everything runnable now, plus everything that becomes runnable as
  /// those finish, without further remote input. Marks them done.
  std::vector<std::uint32_t> take_wave();
  bool finished() const { return remaining_ == 0; }
  std::size_t remaining() const { return remaining_; }

 private:
  const DependencyGraph& graph_;
  std::vector<std::uint32_t> local_pending_;
  std::vector<std::uint32_t> remote_pending_;
  std::vector<std::uint8_t> taken_;
  std::unordered_map<ActionId, std::vector<std::uint32_t>, ActionIdHash> waiting_on_;
  std::size_t remaining_ = 0;
};

struct TxnOutcome {
  TxnId id;
  bool committed = false;
  /// Resolution start to commit, in simulated units.
  std::uint64_t latency = 0;
};

struct EpochResult {
  EpochId epoch = 0;
  std::vector<TxnOutcome> txns;
  /// Indexed by graph vertex.
  std::vector<ExecutedVertex> effects;
  DependencyGraph graph;
  std::uint64_t span = 0;
};

struct LocalEpochOptions {
  unsigned workers = 1;
  unsigned constructors = 1;
  /// Real threads instead of the single-threaded simulated-time path.
  bool threaded = false;
  std::uint64_t action_cost = 1;
};

/// One epoch on a single node whose transactions are all local: build the
/// graph, derive schedules, execute. Every transaction commits.
EpochResult run_local_epoch(Store& store, const Registry& registry, EpochId epoch, std::span<const Transaction> batch,
                            const KeyOwnership& owner, const LocalEpochOptions& options);

}  // namespace depdb
