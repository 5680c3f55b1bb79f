#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "depdb/depgraph.hpp"
#include "depdb/procedure.hpp"
#include "depdb/types.hpp"

namespace depdb {

struct BatchSplit {
  std::vector<Transaction> local;
  std::vector<Transaction> distributed;
};

/// A transaction is local iff every record it touches is owned by its home
/// node. Throws ownership_gap when some record maps to no node.
BatchSplit split_batch(std::span<const Transaction> batch, const KeyOwnership& owner, std::size_t node_count);

/// Transaction metadata shipped alongside vertices: enough to order merged
/// vertices canonically and to write coarse-grained log records.
struct TxnMeta {
  TxnId id;
  std::string procedure;
  Bytes params;
  NodeId home = 0;
  std::uint32_t seq = 0;

  bool operator==(const TxnMeta&) const = default;
};

/// A completion dependency that crosses nodes.
struct RemoteLink {
  std::uint32_t vertex = 0;  // index into Subgraph::vertices
  ActionId remote;
  NodeId remote_node = 0;

  bool operator==(const RemoteLink&) const = default;
};

/// The part of one origin's distributed graph that lives on one destination.
struct Subgraph {
  NodeId origin = 0;
  NodeId dest = 0;
  EpochId epoch = 0;
  std::vector<RecordAction> vertices;
  /// Edges with both endpoints in this subgraph (indices into `vertices`).
  std::vector<Edge> edges;
  /// This vertex waits for a remote action.
  std::vector<RemoteLink> remote_in;
  /// A remote action waits for this vertex.
  std::vector<RemoteLink> remote_out;
  std::vector<TxnMeta> txns;

  bool empty() const { return vertices.empty(); }
  bool operator==(const Subgraph&) const = default;
};

/// Split an origin's distributed-transaction graph along its node edges.
/// Every vertex lands in the subgraph of the node that owns its record.
std::map<NodeId, Subgraph> partition_graph(const DependencyGraph& dist_graph, std::span<const TxnMeta> txns,
                                           NodeId origin);

struct MergedGraph {
  DependencyGraph graph;
  /// Transaction-level projections of the merged temporal edges.
  std::vector<TxnEdge> txn_edges;
  std::map<TxnId, TxnMeta> txns;
};

/// Build the global graph of all distributed actions on this node. Vertices
/// from every origin are ordered by (transaction sequence, origin node,
/// action index) and temporal chains are rebuilt per record in that order, so
/// the result does not depend on arrival order. `origins` lists every node
/// that must have contributed (empty subgraphs included); a missing one
/// throws epoch_incomplete.
MergedGraph merge_subgraphs(const Subgraph& local, std::span<const Subgraph> remotes,
                            std::span<const NodeId> origins);

// ---- wire messages ------------------------------------------------------

/// Completion of distributed vertices, with the transaction context they
/// produced, aggregated per destination per execution wave.
struct VertexDone {
  ActionId action;
  Args context;

  bool operator==(const VertexDone&) const = default;
};

/// Per-epoch standing of one node, exchanged while resolving in-doubt epochs
/// after a failure.
struct EpochStanding {
  EpochId epoch = 0;
  /// 0 = no vote, 1 = prepared (voted yes), 2 = committed, 3 = aborted.
  std::uint8_t state = 0;

  bool operator==(const EpochStanding&) const = default;
};

enum class MessageType : std::uint8_t {
  subgraph = 1,
  epoch_empty = 2,
  epoch_done = 3,
  vertex_done = 4,
  status = 5,
  decision = 6,
};

struct Message {
  MessageType type = MessageType::epoch_empty;
  EpochId epoch = 0;
  NodeId origin = 0;
  /// Incarnation of the sender; lets receivers ignore stale recovery traffic.
  std::uint32_t incarnation = 0;
  Subgraph subgraph;                  // subgraph
  std::vector<VertexDone> completed;  // vertex_done
  std::vector<EpochStanding> standings;  // status / decision
  /// status: highest epoch the sender has started; decision: epoch to resume at.
  EpochId epoch_hint = 0;
  /// status: true for the request sent by a recovering node.
  bool request = false;

  bool operator==(const Message&) const = default;
};

Bytes encode_message(const Message& msg);
/// Throws decode_error.
Message decode_message(std::string_view data);

}  // namespace depdb
