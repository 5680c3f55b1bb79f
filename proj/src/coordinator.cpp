#include "depdb/coordinator.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "depdb/codec.hpp"
#include "depdb/log_record.hpp"

namespace depdb {

BatchSplit split_batch(std::span<const Transaction> batch, const KeyOwnership& owner, std::size_t node_count) {
  BatchSplit out;
  for (const auto& txn : batch) {
    bool local = true;
    for (const auto& access : txn.access_set) {
      auto node = owner(access.target);
      if (node >= node_count) throw Error(ErrorCode::ownership_gap, "no owner for " + to_string(access.target));
      if (node != txn.home) local = false;
    }
    (local ? out.local : out.distributed).push_back(txn);
  }
  return out;
}

std::map<NodeId, Subgraph> partition_graph(const DependencyGraph& dist_graph, std::span<const TxnMeta> txns,
                                           NodeId origin) {
  std::map<NodeId, Subgraph> parts;
  std::vector<std::uint32_t> local_index(dist_graph.size());
  std::map<NodeId, std::set<TxnId>> txns_on;
  for (std::uint32_t v = 0; v < dist_graph.size(); ++v) {
    const auto& vx = dist_graph.vertices[v];
    auto& part = parts[vx.owner];
    part.origin = origin;
    part.dest = vx.owner;
    part.epoch = dist_graph.epoch;
    local_index[v] = static_cast<std::uint32_t>(part.vertices.size());
    part.vertices.push_back(vx.action);
    txns_on[vx.owner].insert(vx.action.id.txn);
  }
  for (const auto& e : dist_graph.edges()) {
    const auto& from = dist_graph.vertices[e.from];
    const auto& to = dist_graph.vertices[e.to];
    if (from.owner == to.owner) {
      parts[from.owner].edges.push_back(Edge{local_index[e.from], local_index[e.to], e.kind});
      continue;
    }
    parts[from.owner].remote_out.push_back(RemoteLink{local_index[e.from], to.action.id, to.owner});
    parts[to.owner].remote_in.push_back(RemoteLink{local_index[e.to], from.action.id, from.owner});
  }
  for (auto& [node, part] : parts) {
    for (const auto& meta : txns) {
      if (txns_on[node].count(meta.id)) part.txns.push_back(meta);
    }
  }
  return parts;
}

MergedGraph merge_subgraphs(const Subgraph& local, std::span<const Subgraph> remotes,
                            std::span<const NodeId> origins) {
  std::vector<const Subgraph*> all{&local};
  for (const auto& r : remotes) all.push_back(&r);

  std::set<NodeId> present;
  for (const auto* s : all) {
    if (s->epoch != local.epoch) throw Error(ErrorCode::epoch_incomplete, "subgraph from a different epoch");
    present.insert(s->origin);
  }
  for (auto o : origins) {
    if (!present.count(o)) {
      throw Error(ErrorCode::epoch_incomplete,
                  "no subgraph from node " + std::to_string(o) + " for epoch " + std::to_string(local.epoch));
    }
  }

  MergedGraph out;
  for (const auto* s : all) {
    for (const auto& meta : s->txns) out.txns.emplace(meta.id, meta);
  }

  // Canonical vertex order: (txn sequence, origin, action index).
  struct Slot {
    std::uint32_t seq;
    NodeId origin;
    std::uint16_t index;
    std::size_t part;
    std::uint32_t vertex;
  };
  std::vector<Slot> slots;
  for (std::size_t p = 0; p < all.size(); ++p) {
    const auto& s = *all[p];
    for (std::uint32_t v = 0; v < s.vertices.size(); ++v) {
      const auto& id = s.vertices[v].id;
      auto meta = out.txns.find(id.txn);
      if (meta == out.txns.end()) throw Error(ErrorCode::decode_error, "subgraph vertex without txn meta");
      slots.push_back(Slot{meta->second.seq, s.origin, id.index, p, v});
    }
  }
  std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    return std::tie(a.seq, a.origin, a.index) < std::tie(b.seq, b.origin, b.index);
  });

  auto& g = out.graph;
  g.epoch = local.epoch;
  std::vector<std::vector<std::uint32_t>> remap(all.size());
  for (std::size_t p = 0; p < all.size(); ++p) remap[p].resize(all[p]->vertices.size());
  for (std::uint32_t i = 0; i < slots.size(); ++i) {
    const auto& sl = slots[i];
    const auto& s = *all[sl.part];
    remap[sl.part][sl.vertex] = i;
    g.vertices.push_back(Vertex{s.vertices[sl.vertex], s.dest, sl.origin, sl.seq});
  }

  for (std::size_t p = 0; p < all.size(); ++p) {
    const auto& s = *all[p];
    for (const auto& e : s.edges) {
      if (e.kind == EdgeKind::temporal) continue;  // rebuilt below across origins
      g.add_edge(remap[p][e.from], remap[p][e.to], e.kind);
    }
    for (const auto& l : s.remote_in) g.remote_in.push_back(RemoteDep{remap[p][l.vertex], l.remote, l.remote_node});
    for (const auto& l : s.remote_out) g.remote_out.push_back(RemoteDep{remap[p][l.vertex], l.remote, l.remote_node});
  }

  std::vector<std::uint32_t> order(g.size());
  for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
  add_temporal_chains(g, order, &out.txn_edges);
  g.finalize();

  auto by_link = [](const RemoteDep& a, const RemoteDep& b) {
    return std::tie(a.vertex, a.remote, a.remote_node) < std::tie(b.vertex, b.remote, b.remote_node);
  };
  std::sort(g.remote_in.begin(), g.remote_in.end(), by_link);
  std::sort(g.remote_out.begin(), g.remote_out.end(), by_link);
  return out;
}

// ---- wire encoding ------------------------------------------------------

namespace {

void put_action_id(ByteWriter& w, const ActionId& id) {
  w.txn_id(id.txn);
  w.u16(id.index);
}

ActionId get_action_id(ByteReader& r) {
  ActionId id;
  id.txn = r.txn_id();
  id.index = r.u16();
  return id;
}

void put_links(ByteWriter& w, const std::vector<RemoteLink>& links) {
  w.u32(static_cast<std::uint32_t>(links.size()));
  for (const auto& l : links) {
    w.u32(l.vertex);
    put_action_id(w, l.remote);
    w.u32(l.remote_node);
  }
}

std::vector<RemoteLink> get_links(ByteReader& r, std::size_t vertex_count) {
  std::vector<RemoteLink> out(r.u32());
  for (auto& l : out) {
    l.vertex = r.u32();
    if (l.vertex >= vertex_count) throw Error(ErrorCode::decode_error, "remote link to unknown vertex");
    l.remote = get_action_id(r);
    l.remote_node = r.u32();
  }
  return out;
}

void put_subgraph(ByteWriter& w, const Subgraph& s) {
  w.u32(s.origin);
  w.u32(s.dest);
  w.u64(s.epoch);
  w.u32(static_cast<std::uint32_t>(s.vertices.size()));
  for (const auto& a : s.vertices) {
    put_action_id(w, a.id);
    w.record_ref(a.target);
    w.u8(static_cast<std::uint8_t>(a.kind));
    encode_ops(w, a.ops);
  }
  w.u32(static_cast<std::uint32_t>(s.edges.size()));
  for (const auto& e : s.edges) {
    w.u32(e.from);
    w.u32(e.to);
    w.u8(static_cast<std::uint8_t>(e.kind));
  }
  put_links(w, s.remote_in);
  put_links(w, s.remote_out);
  w.u32(static_cast<std::uint32_t>(s.txns.size()));
  for (const auto& t : s.txns) {
    w.txn_id(t.id);
    w.name(t.procedure);
    w.bytes(t.params);
    w.u32(t.home);
    w.u32(t.seq);
  }
}

Subgraph get_subgraph(ByteReader& r) {
  Subgraph s;
  s.origin = r.u32();
  s.dest = r.u32();
  s.epoch = r.u64();
  auto n = r.u32();
  if (n > r.remaining()) throw Error(ErrorCode::decode_error, "vertex count exceeds payload");
  s.vertices.resize(n);
  for (auto& a : s.vertices) {
    a.id = get_action_id(r);
    a.target = r.record_ref();
    auto kind = r.u8();
    if (kind < 1 || kind > 4) throw Error(ErrorCode::decode_error, "bad access kind");
    a.kind = static_cast<AccessKind>(kind);
    a.ops = decode_ops(r);
  }
  auto edges = r.u32();
  if (edges > r.remaining() / 9) throw Error(ErrorCode::decode_error, "edge count exceeds payload");
  s.edges.resize(edges);
  for (auto& e : s.edges) {
    e.from = r.u32();
    e.to = r.u32();
    auto kind = r.u8();
    if (kind > 2 || e.from >= n || e.to >= n) throw Error(ErrorCode::decode_error, "bad subgraph edge");
    e.kind = static_cast<EdgeKind>(kind);
  }
  s.remote_in = get_links(r, n);
  s.remote_out = get_links(r, n);
  auto txns = r.u32();
  if (txns > r.remaining()) throw Error(ErrorCode::decode_error, "txn count exceeds payload");
  s.txns.resize(txns);
  for (auto& t : s.txns) {
    t.id = r.txn_id();
    t.procedure = r.name();
    t.params = r.bytes();
    t.home = r.u32();
    t.seq = r.u32();
  }
  return s;
}

}  // namespace

Bytes encode_message(const Message& msg) {
  ByteWriter w;
  w.u64(msg.epoch);
  w.u32(msg.origin);
  w.u32(msg.incarnation);
  switch (msg.type) {
    case MessageType::subgraph: put_subgraph(w, msg.subgraph); break;
    case MessageType::epoch_empty:
    case MessageType::epoch_done: break;
    case MessageType::vertex_done:
      w.u32(static_cast<std::uint32_t>(msg.completed.size()));
      for (const auto& d : msg.completed) {
        put_action_id(w, d.action);
        w.bytes(d.context.encode());
      }
      break;
    case MessageType::status:
    case MessageType::decision:
      w.u64(msg.epoch_hint);
      w.u8(msg.request ? 1 : 0);
      w.u32(static_cast<std::uint32_t>(msg.standings.size()));
      for (const auto& s : msg.standings) {
        w.u64(s.epoch);
        w.u8(s.state);
      }
      break;
  }
  Bytes out;
  append_frame(out, static_cast<std::uint8_t>(msg.type), w.view());
  return out;
}

Message decode_message(std::string_view data) {
  Frame f;
  if (read_frame(data, f) != FrameStatus::ok || f.size != data.size()) {
    throw Error(ErrorCode::decode_error, "bad message frame");
  }
  if (f.type < 1 || f.type > 6) throw Error(ErrorCode::decode_error, "unknown message type");
  Message msg;
  msg.type = static_cast<MessageType>(f.type);
  ByteReader r(f.payload);
  msg.epoch = r.u64();
  msg.origin = r.u32();
  msg.incarnation = r.u32();
  switch (msg.type) {
    case MessageType::subgraph: msg.subgraph = get_subgraph(r); break;
    case MessageType::epoch_empty:
    case MessageType::epoch_done: break;
    case MessageType::vertex_done: {
      auto n = r.u32();
      if (n > r.remaining()) throw Error(ErrorCode::decode_error, "completion count exceeds payload");
      msg.completed.resize(n);
      for (auto& d : msg.completed) {
        d.action = get_action_id(r);
        try {
          d.context = Args::decode(r.bytes());
        } catch (const Error& e) {
          throw Error(ErrorCode::decode_error, e.what());
        }
      }
      break;
    }
    case MessageType::status:
    case MessageType::decision: {
      msg.epoch_hint = r.u64();
      auto req = r.u8();
      if (req > 1) throw Error(ErrorCode::decode_error, "bad request flag");
      msg.request = req == 1;
      auto n = r.u32();
      if (n > r.remaining()) throw Error(ErrorCode::decode_error, "standing count exceeds payload");
      msg.standings.resize(n);
      for (auto& s : msg.standings) {
        s.epoch = r.u64();
        s.state = r.u8();
        if (s.state > 3) throw Error(ErrorCode::decode_error, "bad epoch standing");
      }
      break;
    }
  }
  r.expect_done();
  return msg;
}

}  // namespace depdb
