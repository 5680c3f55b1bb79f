#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "depdb/procedure.hpp"
#include "depdb/types.hpp"

namespace depdb {

enum class EdgeKind : std::uint8_t { logical = 0, temporal = 1, node = 2 };

std::string_view to_string(EdgeKind kind);

struct Edge {
  std::uint32_t from = 0;
  std::uint32_t to = 0;
  EdgeKind kind = EdgeKind::logical;

  auto operator<=>(const Edge&) const = default;
  bool operator==(const Edge&) const = default;
};

struct Vertex {
  RecordAction action;
  /// Node that owns the record this action targets.
  NodeId owner = 0;
  /// Home node of the transaction.
  NodeId origin = 0;
  /// Arrival position of the transaction within its batch.
  std::uint32_t seq = 0;
};

/// Dependency on (or of) an action that lives in another node's graph.
struct RemoteDep {
  std::uint32_t vertex = 0;  // local vertex index
  ActionId remote;
  NodeId remote_node = 0;

  bool operator==(const RemoteDep&) const = default;
};

/// Record-action dependency graph for one batch on one node.
class DependencyGraph {
 public:
  EpochId epoch = 0;
  std::vector<Vertex> vertices;

  /// Sorts and deduplicates edges and rebuilds the adjacency index.
  void finalize();

  const std::vector<Edge>& edges() const { return edges_; }
  void add_edge(std::uint32_t from, std::uint32_t to, EdgeKind kind) { edges_.push_back(Edge{from, to, kind}); }
  void set_edges(std::vector<Edge> edges) { edges_ = std::move(edges); }

  /// Local vertex must wait for a remote action (incoming node edge).
  std::vector<RemoteDep> remote_in;
  /// A remote action waits for a local vertex (outgoing node edge).
  std::vector<RemoteDep> remote_out;

  std::size_t size() const { return vertices.size(); }
  bool empty() const { return vertices.empty(); }
  std::optional<std::uint32_t> find(const ActionId& id) const;

  /// Edge indices leaving / entering a vertex. Valid after finalize().
  std::span<const std::uint32_t> out_edges(std::uint32_t v) const;
  std::span<const std::uint32_t> in_edges(std::uint32_t v) const;

  /// Edge list restricted to one kind.
  std::vector<Edge> edges_of(EdgeKind kind) const;

 private:
  std::vector<Edge> edges_;
  std::vector<std::uint32_t> out_index_, out_offsets_;
  std::vector<std::uint32_t> in_index_, in_offsets_;
  std::unordered_map<ActionId, std::uint32_t, ActionIdHash> by_id_;
};

struct DecomposedTxn {
  Transaction txn;
  std::vector<RecordAction> actions;
};

std::vector<DecomposedTxn> decompose_batch(const Registry& registry, std::span<const Transaction> txns);

struct BuildOptions {
  /// Number of parallel graph constructors; keys are hash-partitioned across
  /// them so each key's temporal chain is built by exactly one constructor.
  unsigned constructors = 1;
};

/// A transaction-level projection of one temporal edge.
using TxnEdge = std::pair<TxnId, TxnId>;

/// Build the dependency graph of an ordered batch. Logical edges chain each
/// transaction's actions in program order (node edges where consecutive
/// actions live on different nodes); temporal edges link each conflicting
/// action to its immediate predecessors on the same record, in batch order.
/// Projections of temporal edges onto transactions are appended to
/// `txn_edges` as they are discovered.
DependencyGraph build_graph(EpochId epoch, std::span<const DecomposedTxn> batch, const KeyOwnership& owner,
                            const BuildOptions& options = {}, std::vector<TxnEdge>* txn_edges = nullptr);

/// Append temporal chains over the vertices of `graph`, visiting them in the
/// order given by `order` (a permutation of vertex indices).
void add_temporal_chains(DependencyGraph& graph, std::span<const std::uint32_t> order,
                         std::vector<TxnEdge>* txn_edges = nullptr);

bool check_acyclic(const DependencyGraph& graph);

struct Schedule {
  unsigned worker = 0;
  std::vector<std::uint32_t> vertices;
};

/// Kahn leveling with round-robin assignment of ready vertices to workers
/// (ties broken by action id). Throws invalid_config for zero workers.
std::vector<Schedule> derive_schedules(const DependencyGraph& graph, unsigned workers);
/// Same over a vertex subset; edges from outside the subset are treated as
/// already satisfied.
std::vector<Schedule> derive_schedules(const DependencyGraph& graph, unsigned workers,
                                       std::span<const std::uint32_t> subset);

/// Text edge list used by golden-file tests:
///   epoch <id>
///   <from> -> <to> <kind>
std::string dump_graph(const DependencyGraph& graph);

}  // namespace depdb
