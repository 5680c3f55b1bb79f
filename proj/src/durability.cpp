#include "depdb/durability.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "depdb/codec.hpp"

namespace depdb {

std::string_view to_string(LogMode mode) {
  switch (mode) {
    case LogMode::none: return "none";
    case LogMode::fine: return "fine";
    case LogMode::coarse: return "coarse";
    case LogMode::aries: return "aries";
  }
  return "unknown";
}

LogMode parse_log_mode(std::string_view name) {
  if (name == "none") return LogMode::none;
  if (name == "fine") return LogMode::fine;
  if (name == "coarse") return LogMode::coarse;
  if (name == "aries") return LogMode::aries;
  throw Error(ErrorCode::invalid_config, "unknown logging mode '" + std::string(name) + "'");
}

TxnDependencyGraph transform_to_txn_graph(std::span<const TxnId> txns, std::span<const TxnEdge> events) {
  TxnDependencyGraph g;
  g.vertices.assign(txns.begin(), txns.end());
  for (const auto& e : events) {
    if (e.first != e.second) g.edges.insert(e);
  }
  return g;
}

bool check_acyclic(const TxnDependencyGraph& graph) {
  std::map<TxnId, std::size_t> indegree;
  std::map<TxnId, std::vector<TxnId>> out;
  for (const auto& t : graph.vertices) indegree[t];
  for (const auto& [from, to] : graph.edges) {
    indegree[from];
    ++indegree[to];
    out[from].push_back(to);
  }
  std::vector<TxnId> ready;
  for (const auto& [t, d] : indegree) {
    if (d == 0) ready.push_back(t);
  }
  std::size_t seen = 0;
  while (!ready.empty()) {
    auto t = ready.back();
    ready.pop_back();
    ++seen;
    for (const auto& to : out[t]) {
      if (--indegree[to] == 0) ready.push_back(to);
    }
  }
  return seen == indegree.size();
}

namespace {

std::vector<std::uint32_t> completion_order(const EmitInput& in) {
  std::vector<std::uint32_t> order(in.graph.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) {
    return std::pair(in.executed[a].completion, a) < std::pair(in.executed[b].completion, b);
  });
  return order;
}

}  // namespace

Emission<FineLogRecord> emit_fine_records(const EmitInput& in, Lsn& next_lsn) {
  const auto& g = in.graph;
  auto order = completion_order(in);

  std::vector<Lsn> lsn_of(g.size());
  std::unordered_map<TxnId, std::pair<std::uint32_t, std::uint32_t>, TxnIdHash> per_txn;  // count, last vertex
  for (auto v : order) {
    lsn_of[v] = next_lsn++;
    auto& slot = per_txn[g.vertices[v].action.id.txn];
    ++slot.first;
    slot.second = v;
  }

  Emission<FineLogRecord> out;
  out.records.reserve(order.size());
  for (auto v : order) {
    const auto& vx = g.vertices[v];
    const auto& ex = in.executed[v];
    FineLogRecord r;
    r.lsn = lsn_of[v];
    r.txn = vx.action.id.txn;
    r.action_index = vx.action.id.index;
    r.target = vx.action.target;
    r.kind = vx.action.kind;
    r.ops = ex.exec.fragment;
    for (auto ei : g.out_edges(v)) {
      const auto& e = g.edges()[ei];
      if (e.kind != EdgeKind::logical) r.out_edges.push_back(lsn_of[e.to]);
    }
    std::sort(r.out_edges.begin(), r.out_edges.end());
    if (!in.distributed_phase) {
      r.dist = DistFlag::local;
    } else {
      r.dist = vx.origin == in.self ? DistFlag::home : DistFlag::remote;
    }
    if (r.dist == DistFlag::remote) {
      r.before = ex.exec.effect.before;
      r.after = ex.exec.effect.after;
    }
    const auto& [count, last] = per_txn[r.txn];
    if (last == v) {
      r.end_of_txn = true;
      r.txn_records = count;
    }
    out.records.push_back(std::move(r));
    out.workers.push_back(ex.worker);
    out.source_vertex.push_back(v);
  }
  return out;
}

Emission<CoarseLogRecord> emit_coarse_records(const EmitInput& in, const TxnDependencyGraph& txn_graph,
                                              const TxnLookup& lookup, Lsn& next_lsn) {
  const auto& g = in.graph;
  auto order = completion_order(in);

  // Transactions ordered by the completion of their last action here.
  std::vector<TxnId> txns;
  std::unordered_map<TxnId, std::vector<std::uint32_t>, TxnIdHash> members;
  for (auto v : order) {
    const auto& id = g.vertices[v].action.id.txn;
    auto [it, fresh] = members.try_emplace(id);
    it->second.push_back(v);
    if (fresh) txns.push_back(id);
  }
  std::sort(txns.begin(), txns.end(), [&](const TxnId& a, const TxnId& b) {
    return in.executed[members[a].back()].completion < in.executed[members[b].back()].completion;
  });

  std::unordered_map<TxnId, std::vector<TxnId>, TxnIdHash> out_edges;
  for (const auto& [from, to] : txn_graph.edges) {
    if (members.count(from) && members.count(to)) out_edges[from].push_back(to);
  }

  Emission<CoarseLogRecord> out;
  for (const auto& id : txns) {
    const auto& txn = lookup(id);
    CoarseLogRecord r;
    r.lsn = next_lsn++;
    r.txn = id;
    r.procedure = txn.procedure;
    r.params = txn.params;
    if (auto it = out_edges.find(id); it != out_edges.end()) {
      r.out_edges = it->second;
      std::sort(r.out_edges.begin(), r.out_edges.end());
    }
    r.distributed = in.distributed_phase;
    if (r.distributed) {
      auto vs = members[id];
      std::sort(vs.begin(), vs.end(), [&](auto a, auto b) {
        return g.vertices[a].action.id.index < g.vertices[b].action.id.index;
      });
      for (auto v : vs) {
        const auto& eff = in.executed[v].exec.effect;
        if (!is_write(eff.kind)) continue;
        r.images.push_back(RecordImage{eff.target, eff.kind, eff.before, eff.after});
      }
    }
    out.records.push_back(std::move(r));
    out.workers.push_back(in.executed[members[id].back()].worker);
    out.source_vertex.push_back(members[id].back());
  }
  return out;
}

Emission<AriesLogRecord> emit_aries_records(const EmitInput& in, Lsn& next_lsn) {
  const auto& g = in.graph;
  auto order = completion_order(in);
  std::unordered_map<TxnId, std::pair<std::uint32_t, std::size_t>, TxnIdHash> per_txn;  // count, last record

  Emission<AriesLogRecord> out;
  for (auto v : order) {
    const auto& eff = in.executed[v].exec.effect;
    if (!is_write(eff.kind)) continue;
    AriesLogRecord r;
    r.lsn = next_lsn++;
    r.txn = g.vertices[v].action.id.txn;
    r.target = eff.target;
    r.kind = eff.kind;
    r.distributed = in.distributed_phase;
    r.before = eff.before;
    r.after = eff.after;
    auto& slot = per_txn[r.txn];
    ++slot.first;
    slot.second = out.records.size();
    out.records.push_back(std::move(r));
    out.workers.push_back(in.executed[v].worker);
    out.source_vertex.push_back(v);
  }
  for (const auto& [txn, slot] : per_txn) {
    out.records[slot.second].end_of_txn = true;
    out.records[slot.second].txn_records = slot.first;
  }
  return out;
}

void ActiveTxnTable::on_flushed(const TxnId& txn, Lsn lsn, bool end_of_txn) {
  if (end_of_txn) {
    table_.erase(txn);
  } else {
    table_[txn] = lsn;
  }
}

std::optional<Lsn> ActiveTxnTable::last_lsn(const TxnId& txn) const {
  auto it = table_.find(txn);
  if (it == table_.end()) return std::nullopt;
  return it->second;
}

std::filesystem::path log_file_path(const std::filesystem::path& dir, NodeId node, unsigned worker, LogMode mode) {
  return dir / ("node" + std::to_string(node) + ".w" + std::to_string(worker) + "." + std::string(to_string(mode)) +
                ".log");
}

LogWriter::LogWriter(std::filesystem::path dir, NodeId node, LogMode mode, unsigned workers)
    : dir_(std::move(dir)), node_(node), mode_(mode), workers_(workers), buffers_(workers), pending_meta_(workers) {
  if (workers == 0) throw Error(ErrorCode::invalid_config, "log writer needs at least one worker");
  if (mode_ != LogMode::none) std::filesystem::create_directories(dir_);
}

void LogWriter::append(unsigned worker, const LogEntry& entry) {
  if (mode_ == LogMode::none) return;
  auto& buf = buffers_.at(worker);
  buf += encode_record(entry);
  ++pending_records_;
  if (const auto* f = std::get_if<FineLogRecord>(&entry)) {
    pending_meta_[worker].push_back({f->txn, {f->lsn, f->end_of_txn}});
  } else if (const auto* a = std::get_if<AriesLogRecord>(&entry)) {
    pending_meta_[worker].push_back({a->txn, {a->lsn, a->end_of_txn}});
  } else if (const auto* c = std::get_if<CoarseLogRecord>(&entry)) {
    pending_meta_[worker].push_back({c->txn, {c->lsn, true}});
  }
}

std::uint64_t LogWriter::pending_bytes() const {
  std::uint64_t n = 0;
  for (const auto& b : buffers_) n += b.size();
  return n;
}

void LogWriter::write_file(unsigned worker, std::string_view data) {
  std::ofstream out(log_file_path(dir_, node_, worker, mode_), std::ios::binary | std::ios::app);
  if (!out) throw Error(ErrorCode::storage_failure, "cannot open log file for worker " + std::to_string(worker));
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::storage_failure, "log write failed for worker " + std::to_string(worker));
}

FlushReceipt LogWriter::flush() {
  FlushReceipt receipt;
  if (mode_ == LogMode::none) return receipt;
  for (unsigned w = 0; w < workers_; ++w) {
    write_file(w, buffers_[w]);
    ++receipt.files_written;
    receipt.bytes += buffers_[w].size();
    buffers_[w].clear();
    for (const auto& [txn, meta] : pending_meta_[w]) active_.on_flushed(txn, meta.first, meta.second);
    pending_meta_[w].clear();
  }
  receipt.records = pending_records_;
  pending_records_ = 0;
  total_bytes_ += receipt.bytes;
  ++flush_count_;
  return receipt;
}

void LogWriter::flush_torn(std::mt19937_64& rng) {
  if (mode_ == LogMode::none) return;
  for (unsigned w = 0; w < workers_; ++w) {
    const auto& buf = buffers_[w];
    std::uniform_int_distribution<std::size_t> cut(0, buf.size());
    write_file(w, std::string_view(buf).substr(0, cut(rng)));
  }
  discard();
}

void LogWriter::discard() {
  for (auto& b : buffers_) b.clear();
  for (auto& m : pending_meta_) m.clear();
  pending_records_ = 0;
}

void LogWriter::write_marker(const EpochMarker& marker) {
  if (mode_ == LogMode::none) return;
  auto bytes = encode_record(marker);
  write_file(0, bytes);
  total_bytes_ += bytes.size();
}

std::vector<std::filesystem::path> LogWriter::files() const {
  std::vector<std::filesystem::path> out;
  for (unsigned w = 0; w < workers_; ++w) out.push_back(log_file_path(dir_, node_, w, mode_));
  return out;
}

std::filesystem::path snapshot_path(const std::filesystem::path& dir, NodeId node) {
  return dir / ("node" + std::to_string(node) + ".snapshot");
}

namespace {
constexpr std::uint8_t kSnapshotFrame = 16;
}

void write_checkpoint(const std::filesystem::path& dir, NodeId node, const Store& store, EpochId watermark,
                      Lsn next_lsn) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  ByteWriter payload;
  payload.u64(watermark);
  payload.u64(next_lsn);
  payload.raw(store.serialize());
  Bytes framed;
  append_frame(framed, kSnapshotFrame, payload.view());

  auto final_path = snapshot_path(dir, node);
  auto tmp = final_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(framed.data(), static_cast<std::streamsize>(framed.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp, ec);
      throw Error(ErrorCode::storage_failure, "snapshot write failed");
    }
  }
  std::filesystem::rename(tmp, final_path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(ErrorCode::storage_failure, "snapshot rename failed");
  }
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::optional<Snapshot> read_checkpoint(const std::filesystem::path& dir, NodeId node) {
  auto path = snapshot_path(dir, node);
  if (!std::filesystem::exists(path)) return std::nullopt;
  auto data = read_file(path);
  Frame f;
  if (read_frame(data, f) != FrameStatus::ok || f.type != kSnapshotFrame || f.size != data.size()) {
    throw Error(ErrorCode::unrecoverable_log, "snapshot file is damaged");
  }
  ByteReader r(f.payload);
  Snapshot snap;
  snap.watermark = r.u64();
  snap.next_lsn = r.u64();
  snap.store = Store::deserialize(f.payload.substr(r.position()));
  return snap;
}

}  // namespace depdb
