#include "depdb/depgraph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace depdb {

std::string_view to_string(EdgeKind kind) {
  switch (kind) {
    case EdgeKind::logical: return "logical";
    case EdgeKind::temporal: return "temporal";
    case EdgeKind::node: return "node";
  }
  return "unknown";
}

void DependencyGraph::finalize() {
  std::sort(edges_.begin(), edges_.end());
  edges_.erase(std::unique(edges_.begin(), edges_.end()), edges_.end());

  const auto n = vertices.size();
  by_id_.clear();
  by_id_.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) by_id_.emplace(vertices[i].action.id, i);

  auto build = [&](bool outgoing, std::vector<std::uint32_t>& index, std::vector<std::uint32_t>& offsets) {
    offsets.assign(n + 1, 0);
    for (const auto& e : edges_) ++offsets[(outgoing ? e.from : e.to) + 1];
    for (std::size_t i = 0; i < n; ++i) offsets[i + 1] += offsets[i];
    index.assign(edges_.size(), 0);
    std::vector<std::uint32_t> fill(offsets.begin(), offsets.end() - 1);
    for (std::uint32_t i = 0; i < edges_.size(); ++i) {
      auto v = outgoing ? edges_[i].from : edges_[i].to;
      index[fill[v]++] = i;
    }
  };
  build(true, out_index_, out_offsets_);
  build(false, in_index_, in_offsets_);
}

std::optional<std::uint32_t> DependencyGraph::find(const ActionId& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::uint32_t> DependencyGraph::out_edges(std::uint32_t v) const {
  return {out_index_.data() + out_offsets_[v], out_offsets_[v + 1] - out_offsets_[v]};
}

std::span<const std::uint32_t> DependencyGraph::in_edges(std::uint32_t v) const {
  return {in_index_.data() + in_offsets_[v], in_offsets_[v + 1] - in_offsets_[v]};
}

std::vector<Edge> DependencyGraph::edges_of(EdgeKind kind) const {
  std::vector<Edge> out;
  for (const auto& e : edges_) {
    if (e.kind == kind) out.push_back(e);
  }
  return out;
}

std::vector<DecomposedTxn> decompose_batch(const Registry& registry, std::span<const Transaction> txns) {
  std::vector<DecomposedTxn> out;
  out.reserve(txns.size());
  for (const auto& t : txns) out.push_back(DecomposedTxn{t, decompose_transaction(registry, t)});
  return out;
}

namespace {

/// Per-record chaining state: the last writer and the readers after it.
struct KeyChain {
  std::optional<std::uint32_t> last_write;
  std::vector<std::uint32_t> readers;
};

void chain_action(KeyChain& chain, std::uint32_t v, AccessKind kind, std::vector<Edge>& edges) {
  if (!is_write(kind)) {
    if (chain.last_write) edges.push_back(Edge{*chain.last_write, v, EdgeKind::temporal});
    chain.readers.push_back(v);
    return;
  }
  if (!chain.readers.empty()) {
    for (auto r : chain.readers) edges.push_back(Edge{r, v, EdgeKind::temporal});
  } else if (chain.last_write) {
    edges.push_back(Edge{*chain.last_write, v, EdgeKind::temporal});
  }
  chain.last_write = v;
  chain.readers.clear();
}

void project(const DependencyGraph& g, const std::vector<Edge>& temporal, std::vector<TxnEdge>& out) {
  std::set<TxnEdge> seen;
  for (const auto& e : temporal) {
    TxnEdge te{g.vertices[e.from].action.id.txn, g.vertices[e.to].action.id.txn};
    if (seen.insert(te).second) out.push_back(te);
  }
}

}  // namespace

void add_temporal_chains(DependencyGraph& graph, std::span<const std::uint32_t> order,
                         std::vector<TxnEdge>* txn_edges) {
  std::unordered_map<RecordRef, KeyChain, RecordRefHash> chains;
  std::vector<Edge> temporal;
  for (auto v : order) {
    const auto& a = graph.vertices[v].action;
    chain_action(chains[a.target], v, a.kind, temporal);
  }
  if (txn_edges != nullptr) project(graph, temporal, *txn_edges);
  for (const auto& e : temporal) graph.add_edge(e.from, e.to, e.kind);
}

DependencyGraph build_graph(EpochId epoch, std::span<const DecomposedTxn> batch, const KeyOwnership& owner,
                            const BuildOptions& options, std::vector<TxnEdge>* txn_edges) {
  DependencyGraph g;
  g.epoch = epoch;
  std::vector<std::uint32_t> first_vertex;
  first_vertex.reserve(batch.size());
  for (std::uint32_t seq = 0; seq < batch.size(); ++seq) {
    first_vertex.push_back(static_cast<std::uint32_t>(g.vertices.size()));
    for (const auto& a : batch[seq].actions) {
      g.vertices.push_back(Vertex{a, owner(a.target), batch[seq].txn.home, seq});
    }
  }

  const unsigned constructors = std::max(1u, options.constructors);
  std::vector<std::vector<Edge>> edges(constructors);
  std::vector<std::vector<TxnEdge>> projected(constructors);

  auto construct = [&](unsigned c) {
    std::unordered_map<RecordRef, KeyChain, RecordRefHash> chains;
    auto& out = edges[c];
    std::vector<Edge> temporal;
    for (std::uint32_t seq = 0; seq < batch.size(); ++seq) {
      const auto& actions = batch[seq].actions;
      const auto base = first_vertex[seq];
      // Logical edges belong to the transaction's home constructor.
      if (seq % constructors == c) {
        for (std::uint32_t i = 1; i < actions.size(); ++i) {
          const auto kind = g.vertices[base + i - 1].owner == g.vertices[base + i].owner ? EdgeKind::logical
                                                                                         : EdgeKind::node;
          out.push_back(Edge{base + i - 1, base + i, kind});
        }
      }
      for (std::uint32_t i = 0; i < actions.size(); ++i) {
        if (RecordRefHash{}(actions[i].target) % constructors != c) continue;
        chain_action(chains[actions[i].target], base + i, actions[i].kind, temporal);
      }
    }
    if (txn_edges != nullptr) project(g, temporal, projected[c]);
    out.insert(out.end(), temporal.begin(), temporal.end());
  };

  if (constructors == 1) {
    construct(0);
  } else {
    std::vector<std::thread> threads;
    threads.reserve(constructors);
    for (unsigned c = 0; c < constructors; ++c) threads.emplace_back(construct, c);
    for (auto& t : threads) t.join();
  }

  std::vector<Edge> all;
  for (auto& part : edges) all.insert(all.end(), part.begin(), part.end());
  g.set_edges(std::move(all));
  g.finalize();

  if (txn_edges != nullptr) {
    std::set<TxnEdge> seen(txn_edges->begin(), txn_edges->end());
    for (auto& part : projected) {
      for (auto& te : part) {
        if (seen.insert(te).second) txn_edges->push_back(te);
      }
    }
  }
  return g;
}

bool check_acyclic(const DependencyGraph& graph) {
  const auto n = graph.size();
  std::vector<std::uint32_t> indegree(n, 0);
  for (const auto& e : graph.edges()) ++indegree[e.to];
  std::vector<std::uint32_t> ready;
  for (std::uint32_t v = 0; v < n; ++v) {
    if (indegree[v] == 0) ready.push_back(v);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    auto v = ready.back();
    ready.pop_back();
    ++visited;
    for (auto ei : graph.out_edges(v)) {
      auto to = graph.edges()[ei].to;
      if (--indegree[to] == 0) ready.push_back(to);
    }
  }
  return visited == n;
}

std::vector<Schedule> derive_schedules(const DependencyGraph& graph, unsigned workers) {
  std::vector<std::uint32_t> all(graph.size());
  for (std::uint32_t v = 0; v < all.size(); ++v) all[v] = v;
  return derive_schedules(graph, workers, all);
}

std::vector<Schedule> derive_schedules(const DependencyGraph& graph, unsigned workers,
                                       std::span<const std::uint32_t> subset) {
  if (workers == 0) throw Error(ErrorCode::invalid_config, "worker count must be positive");
  std::vector<Schedule> schedules(workers);
  for (unsigned w = 0; w < workers; ++w) schedules[w].worker = w;

  const auto n = graph.size();
  std::vector<std::uint8_t> member(n, 0);
  for (auto v : subset) member[v] = 1;
  std::vector<std::uint32_t> indegree(n, 0);
  for (const auto& e : graph.edges()) {
    if (member[e.from] && member[e.to]) ++indegree[e.to];
  }
  std::vector<std::uint32_t> level;
  for (auto v : subset) {
    if (indegree[v] == 0) level.push_back(v);
  }

  auto by_action = [&](std::uint32_t a, std::uint32_t b) {
    return graph.vertices[a].action.id < graph.vertices[b].action.id;
  };
  std::size_t next_worker = 0;
  std::size_t placed = 0;
  while (!level.empty()) {
    std::sort(level.begin(), level.end(), by_action);
    std::vector<std::uint32_t> next;
    for (auto v : level) {
      schedules[next_worker].vertices.push_back(v);
      next_worker = (next_worker + 1) % workers;
      ++placed;
      for (auto ei : graph.out_edges(v)) {
        auto to = graph.edges()[ei].to;
        if (member[to] && --indegree[to] == 0) next.push_back(to);
      }
    }
    level = std::move(next);
  }
  if (placed != subset.size()) throw Error(ErrorCode::invalid_config, "schedule derivation on a cyclic graph");
  return schedules;
}

std::string dump_graph(const DependencyGraph& graph) {
  std::ostringstream os;
  os << "epoch " << graph.epoch << '\n';
  for (const auto& e : graph.edges()) {
    os << to_string(graph.vertices[e.from].action.id) << " -> " << to_string(graph.vertices[e.to].action.id) << ' '
       << to_string(e.kind) << '\n';
  }
  return os.str();
}

}  // namespace depdb
