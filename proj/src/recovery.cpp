#include "depdb/recovery.hpp"

#include <algorithm>
#include <chrono>
#include <queue>
#include <regex>
#include <thread>

#include "depdb/executor.hpp"
#include "json.hpp"

namespace depdb {

namespace fs = std::filesystem;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<fs::path> node_log_files(const fs::path& dir, NodeId node, LogMode mode) {
  std::vector<std::pair<unsigned, fs::path>> found;
  if (!fs::exists(dir)) return {};
  std::regex pattern("node" + std::to_string(node) + R"(\.w(\d+)\.)" + std::string(to_string(mode)) + R"(\.log)");
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    auto name = entry.path().filename().string();
    if (std::regex_match(name, m, pattern)) found.emplace_back(std::stoul(m[1].str()), entry.path());
  }
  std::sort(found.begin(), found.end());
  std::vector<fs::path> out;
  for (auto& [w, p] : found) out.push_back(p);
  return out;
}

struct UnitKey {
  EpochId epoch;
  std::uint8_t phase;
  auto operator<=>(const UnitKey&) const = default;
};

}  // namespace

LoadedLog load_log(const fs::path& dir, NodeId node, LogMode mode, bool repair) {
  LoadedLog out;
  out.mode = mode;
  if (mode == LogMode::none) return out;
  for (const auto& path : node_log_files(dir, node, mode)) {
    auto data = read_file(path);
    auto scan = scan_log(data);
    out.bytes += scan.valid_bytes;
    if (scan.torn_tail) {
      out.torn = true;
      if (repair) fs::resize_file(path, scan.valid_bytes);
    }
    for (auto& entry : scan.entries) {
      std::visit(
          [&](auto& r) {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, EpochMarker>) {
              out.max_epoch = std::max(out.max_epoch, r.epoch);
              out.markers.push_back(r);
            } else {
              ++out.records;
              out.max_lsn = std::max(out.max_lsn, r.lsn);
              out.max_epoch = std::max(out.max_epoch, r.txn.epoch);
              if constexpr (std::is_same_v<R, FineLogRecord>) out.fine.push_back(std::move(r));
              if constexpr (std::is_same_v<R, CoarseLogRecord>) out.coarse.push_back(std::move(r));
              if constexpr (std::is_same_v<R, AriesLogRecord>) out.aries.push_back(std::move(r));
            }
          },
          entry);
    }
  }
  return out;
}

std::map<EpochId, Standing> log_standings(const LoadedLog& log) {
  std::map<EpochId, Standing> out;
  for (const auto& m : log.markers) {
    auto& s = out[m.epoch];
    switch (m.kind) {
      case MarkerKind::prepared:
        if (s == Standing::none) s = Standing::prepared;
        break;
      case MarkerKind::commit:
        s = Standing::committed;
        break;
      case MarkerKind::abort:
        s = Standing::aborted;
        break;
      case MarkerKind::local:
        break;
    }
  }
  std::erase_if(out, [](const auto& kv) { return kv.second == Standing::none; });
  return out;
}

PrunedLog prune_log(const LoadedLog& log, EpochId watermark, const std::map<EpochId, bool>& decisions) {
  PrunedLog out;
  out.mode = log.mode;
  std::set<EpochId> local_done, dist_committed;
  for (const auto& m : log.markers) {
    if (m.kind == MarkerKind::local) local_done.insert(m.epoch);
    if (m.kind == MarkerKind::commit) dist_committed.insert(m.epoch);
  }
  for (const auto& [e, commit] : decisions) {
    if (commit) dist_committed.insert(e);
  }
  auto unit_committed = [&](EpochId e, std::uint8_t phase) {
    return phase == 0 ? local_done.count(e) > 0 : dist_committed.count(e) > 0;
  };

  std::vector<ReplayItem> candidates;
  auto consider = [&](ReplayItem item) {
    if (item.epoch <= watermark) {
      ++out.skipped_records;
      return;
    }
    if (!unit_committed(item.epoch, item.phase)) {
      ++out.dropped_records;
      out.dropped_txns.insert(item.txn);
      return;
    }
    candidates.push_back(std::move(item));
  };
  for (const auto& r : log.fine) {
    consider(ReplayItem{r, r.txn.epoch, static_cast<std::uint8_t>(r.dist == DistFlag::local ? 0 : 1), r.lsn, r.txn});
  }
  for (const auto& r : log.coarse) {
    consider(ReplayItem{r, r.txn.epoch, static_cast<std::uint8_t>(r.distributed ? 1 : 0), r.lsn, r.txn});
  }
  for (const auto& r : log.aries) {
    consider(ReplayItem{r, r.txn.epoch, static_cast<std::uint8_t>(r.distributed ? 1 : 0), r.lsn, r.txn});
  }

  // Fine and aries transactions span several records: keep a transaction
  // only if its end-of-txn record is present and the count matches.
  if (log.mode == LogMode::fine || log.mode == LogMode::aries) {
    std::map<TxnId, std::pair<std::uint32_t, std::uint32_t>> seen;  // records, declared
    for (const auto& item : candidates) {
      auto& s = seen[item.txn];
      ++s.first;
      std::visit(
          [&](const auto& r) {
            using R = std::decay_t<decltype(r)>;
            if constexpr (!std::is_same_v<R, CoarseLogRecord>) {
              if (r.end_of_txn) s.second = r.txn_records;
            }
          },
          item.payload);
    }
    std::erase_if(candidates, [&](const ReplayItem& item) {
      const auto& s = seen[item.txn];
      bool complete = s.second != 0 && s.first == s.second;
      if (!complete) {
        ++out.dropped_records;
        out.dropped_txns.insert(item.txn);
      }
      return !complete;
    });
  }

  std::sort(candidates.begin(), candidates.end(), [](const ReplayItem& a, const ReplayItem& b) {
    return std::tuple(a.epoch, a.phase, a.lsn) < std::tuple(b.epoch, b.phase, b.lsn);
  });
  for (const auto& item : candidates) out.txns.insert(item.txn);
  for (const auto& t : out.txns) out.dropped_txns.erase(t);
  out.items = std::move(candidates);
  return out;
}

std::vector<std::pair<std::uint32_t, std::uint32_t>> ReplayGraph::edge_list() const {
  std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
  out.reserve(edge_count);
  for (std::uint32_t v = 0; v < this->out.size(); ++v) {
    for (auto to : this->out[v]) out.emplace_back(v, to);
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

std::vector<std::pair<RecordRef, AccessKind>> vertex_keys(const ReplayItem& item, const Registry& registry,
                                                          const KeyOwnership& owner, NodeId self) {
  std::vector<std::pair<RecordRef, AccessKind>> keys;
  std::visit(
      [&](const auto& r) {
        using R = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<R, CoarseLogRecord>) {
          for (auto& a : registry.declared_access(r.procedure, r.params)) {
            if (owner(a.target) == self) keys.emplace_back(a.target, a.kind);
          }
          // Images name exactly what was written here; make sure they count
          // even if ownership disagrees with the declared set.
          for (const auto& img : r.images) {
            auto it = std::find_if(keys.begin(), keys.end(), [&](const auto& k) { return k.first == img.target; });
            if (it == keys.end()) keys.emplace_back(img.target, img.kind);
          }
        } else {
          keys.emplace_back(r.target, r.kind);
        }
      },
      item.payload);
  return keys;
}

}  // namespace

ReplayGraph rebuild_replay_graph(const PrunedLog& log, const Registry& registry, const KeyOwnership& owner,
                                 NodeId self) {
  ReplayGraph g;
  g.mode = log.mode;
  const auto& items = log.items;

  // Split into flush units; inside each unit restore the stored edges and
  // order the unit topologically (stable by lsn).
  std::vector<std::uint32_t> order;
  order.reserve(items.size());
  std::vector<std::vector<std::uint32_t>> stored_out(items.size());
  for (std::size_t begin = 0; begin < items.size();) {
    std::size_t end = begin;
    while (end < items.size() && items[end].epoch == items[begin].epoch && items[end].phase == items[begin].phase) {
      ++end;
    }
    std::unordered_map<Lsn, std::uint32_t> by_lsn;
    std::unordered_map<TxnId, std::uint32_t, TxnIdHash> by_txn;
    for (auto i = begin; i < end; ++i) {
      by_lsn[items[i].lsn] = static_cast<std::uint32_t>(i);
      by_txn[items[i].txn] = static_cast<std::uint32_t>(i);
    }
    for (auto i = begin; i < end; ++i) {
      std::visit(
          [&](const auto& r) {
            using R = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<R, FineLogRecord>) {
              for (auto lsn : r.out_edges) {
                auto it = by_lsn.find(lsn);
                if (it == by_lsn.end()) {
                  throw Error(ErrorCode::unrecoverable_log, "edge from lsn " + std::to_string(r.lsn) +
                                                                " to missing lsn " + std::to_string(lsn));
                }
                stored_out[i].push_back(it->second);
              }
            } else if constexpr (std::is_same_v<R, CoarseLogRecord>) {
              for (const auto& t : r.out_edges) {
                auto it = by_txn.find(t);
                if (it == by_txn.end()) {
                  throw Error(ErrorCode::unrecoverable_log,
                              "edge from " + to_string(r.txn) + " to missing " + to_string(t));
                }
                stored_out[i].push_back(it->second);
              }
            }
          },
          items[i].payload);
    }
    // Kahn within the unit, smallest lsn first.
    std::unordered_map<std::uint32_t, std::uint32_t> indeg;
    for (auto i = begin; i < end; ++i) {
      for (auto to : stored_out[i]) ++indeg[to];
    }
    std::priority_queue<std::uint32_t, std::vector<std::uint32_t>, std::greater<>> ready;
    for (auto i = begin; i < end; ++i) {
      if (indeg[static_cast<std::uint32_t>(i)] == 0) ready.push(static_cast<std::uint32_t>(i));
    }
    std::size_t emitted = 0;
    while (!ready.empty()) {
      auto v = ready.top();
      ready.pop();
      order.push_back(v);
      ++emitted;
      for (auto to : stored_out[v]) {
        if (--indeg[to] == 0) ready.push(to);
      }
    }
    if (emitted != end - begin) throw Error(ErrorCode::unrecoverable_log, "cyclic edges in log");
    begin = end;
  }

  std::vector<std::uint32_t> position(items.size());
  for (std::uint32_t p = 0; p < order.size(); ++p) position[order[p]] = p;
  g.vertices.reserve(items.size());
  for (auto i : order) {
    ReplayVertex v;
    v.item = items[i];
    v.keys = vertex_keys(items[i], registry, owner, self);
    v.weight = static_cast<std::uint32_t>(std::max<std::size_t>(1, v.keys.size()));
    g.vertices.push_back(std::move(v));
  }
  g.out.assign(g.size(), {});
  g.in.assign(g.size(), {});
  std::set<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (auto to : stored_out[i]) edges.emplace(position[i], position[to]);
  }

  // Cross-unit edges: chain conflicting accesses per record in vertex order;
  // within-unit pairs are already ordered by the stored edges.
  struct Chain {
    std::optional<std::uint32_t> writer;
    std::vector<std::uint32_t> readers;
  };
  std::unordered_map<RecordRef, Chain, RecordRefHash> chains;
  auto unit_of = [&](std::uint32_t v) { return UnitKey{g.vertices[v].item.epoch, g.vertices[v].item.phase}; };
  bool chain_all = g.mode == LogMode::aries;  // no stored edges at all
  for (std::uint32_t v = 0; v < g.size(); ++v) {
    for (const auto& [key, kind] : g.vertices[v].keys) {
      auto& c = chains[key];
      auto link = [&](std::uint32_t from) {
        if (from != v && (chain_all || unit_of(from) != unit_of(v))) edges.emplace(from, v);
      };
      if (is_write(kind)) {
        if (c.writer) link(*c.writer);
        for (auto r : c.readers) link(r);
        c.writer = v;
        c.readers.clear();
      } else {
        if (c.writer) link(*c.writer);
        c.readers.push_back(v);
      }
    }
  }
  for (auto [from, to] : edges) {
    g.out[from].push_back(to);
    g.in[to].push_back(from);
  }
  g.edge_count = edges.size();
  return g;
}

bool check_acyclic(const ReplayGraph& graph) {
  std::vector<std::uint32_t> indeg(graph.size(), 0);
  for (std::uint32_t v = 0; v < graph.size(); ++v) {
    for (auto to : graph.out[v]) ++indeg[to];
  }
  std::vector<std::uint32_t> stack;
  for (std::uint32_t v = 0; v < graph.size(); ++v) {
    if (indeg[v] == 0) stack.push_back(v);
  }
  std::size_t seen = 0;
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    ++seen;
    for (auto to : graph.out[v]) {
      if (--indeg[to] == 0) stack.push_back(to);
    }
  }
  return seen == graph.size();
}

void replay_vertex(Store& store, const Registry& registry, const ReplayVertex& vertex, LogMode mode) {
  try {
    std::visit(
        [&](const auto& r) {
          using R = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<R, FineLogRecord>) {
            if (r.dist == DistFlag::remote) {
              redo_effect(store, r.target, r.kind, r.after);
            } else {
              replay_fragment(store, registry, r.target, r.kind, r.ops);
            }
          } else if constexpr (std::is_same_v<R, CoarseLogRecord>) {
            if (r.distributed) {
              for (const auto& img : r.images) redo_effect(store, img.target, img.kind, img.after);
            } else {
              Transaction t;
              t.id = r.txn;
              t.procedure = r.procedure;
              t.params = r.params;
              t.home = r.txn.node;
              execute_transaction(store, registry, t);
            }
          } else {
            redo_effect(store, r.target, r.kind, r.after);
          }
        },
        vertex.item.payload);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::unrecoverable_log) throw;
    throw Error(ErrorCode::unrecoverable_log,
                std::string(to_string(mode)) + " replay of " + to_string(vertex.item.txn) + " failed: " + e.what());
  }
}

void serial_replay(Store& store, const Registry& registry, const ReplayGraph& graph) {
  for (const auto& v : graph.vertices) replay_vertex(store, registry, v, graph.mode);
}

void parallel_replay(Store& store, const Registry& registry, const ReplayGraph& graph, unsigned workers) {
  if (workers == 0) throw Error(ErrorCode::invalid_config, "replay needs at least one worker");
  if (workers == 1 || graph.size() == 0) {
    serial_replay(store, registry, graph);
    return;
  }
  // Level the graph; deal each level round-robin. Every worker's list is in
  // level order, so waiting on predecessors cannot deadlock.
  std::vector<std::uint32_t> level(graph.size(), 0);
  std::uint32_t max_level = 0;
  for (std::uint32_t v = 0; v < graph.size(); ++v) {
    for (auto from : graph.in[v]) level[v] = std::max(level[v], level[from] + 1);
    max_level = std::max(max_level, level[v]);
  }
  std::vector<std::vector<std::uint32_t>> by_level(max_level + 1);
  for (std::uint32_t v = 0; v < graph.size(); ++v) by_level[level[v]].push_back(v);
  std::vector<std::vector<std::uint32_t>> lists(workers);
  std::size_t next = 0;
  for (const auto& lv : by_level) {
    for (auto v : lv) lists[next++ % workers].push_back(v);
  }

  Latches latches(graph.size());
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> threads;
    for (unsigned w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          for (auto v : lists[w]) {
            for (auto from : graph.in[v]) latches.wait(from);
            replay_vertex(store, registry, graph.vertices[v], graph.mode);
            latches.signal(v);
          }
        } catch (...) {
          errors[w] = std::current_exception();
          for (auto v : lists[w]) latches.signal(v);
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::uint64_t serial_replay_aries(Store& store, std::span<const AriesLogRecord> records) {
  std::vector<const AriesLogRecord*> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->lsn < b->lsn; });
  for (auto* r : sorted) {
    try {
      redo_effect(store, r->target, r->kind, r->after);
    } catch (const Error& e) {
      throw Error(ErrorCode::unrecoverable_log, std::string("aries redo failed: ") + e.what());
    }
  }
  return sorted.size();
}

std::uint64_t replay_makespan(const ReplayGraph& graph, std::span<const std::uint32_t> vertices, unsigned workers,
                              std::uint64_t cost) {
  if (vertices.empty()) return 0;
  workers = std::max(1u, workers);
  std::unordered_map<std::uint32_t, std::uint64_t> finish;
  finish.reserve(vertices.size());
  std::priority_queue<std::uint64_t, std::vector<std::uint64_t>, std::greater<>> free_at;
  for (unsigned w = 0; w < workers; ++w) free_at.push(0);
  std::uint64_t end = 0;
  for (auto v : vertices) {
    std::uint64_t ready = 0;
    for (auto from : graph.in[v]) {
      if (auto it = finish.find(from); it != finish.end()) ready = std::max(ready, it->second);
    }
    auto worker_free = free_at.top();
    free_at.pop();
    auto start = std::max(ready, worker_free);
    auto done = start + cost * graph.vertices[v].weight;
    free_at.push(done);
    finish[v] = done;
    end = std::max(end, done);
  }
  return end;
}

ReplaySession::ReplaySession(Store& store, const Registry& registry, ReplayGraph graph)
    : store_(store), registry_(registry), graph_(std::move(graph)), done_(graph_.size(), 0), remaining_(graph_.size()) {
  for (std::uint32_t v = 0; v < graph_.size(); ++v) {
    for (const auto& [key, kind] : graph_.vertices[v].keys) by_key_[key].push_back(v);
  }
}

std::vector<std::uint32_t> ReplaySession::closure(std::span<const RecordRef> keys) const {
  std::vector<std::uint8_t> in_closure(graph_.size(), 0);
  std::vector<std::uint32_t> stack;
  for (const auto& key : keys) {
    auto it = by_key_.find(key);
    if (it == by_key_.end()) continue;
    for (auto v : it->second) {
      if (!done_[v] && !in_closure[v]) {
        in_closure[v] = 1;
        stack.push_back(v);
      }
    }
  }
  std::vector<std::uint32_t> out;
  while (!stack.empty()) {
    auto v = stack.back();
    stack.pop_back();
    out.push_back(v);
    for (auto from : graph_.in[v]) {
      if (!done_[from] && !in_closure[from]) {
        in_closure[from] = 1;
        stack.push_back(from);
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void ReplaySession::run(const std::vector<std::uint32_t>& vertices) {
  for (auto v : vertices) {
    replay_vertex(store_, registry_, graph_.vertices[v], graph_.mode);
    done_[v] = 1;
    --remaining_;
  }
}

std::vector<std::uint32_t> ReplaySession::recover_keys(std::span<const RecordRef> keys) {
  auto c = closure(keys);
  run(c);
  return c;
}

std::vector<std::uint32_t> ReplaySession::background(std::size_t max_vertices) {
  std::vector<std::uint32_t> batch;
  while (cursor_ < graph_.size() && batch.size() < max_vertices) {
    if (!done_[cursor_]) batch.push_back(static_cast<std::uint32_t>(cursor_));
    ++cursor_;
  }
  run(batch);
  return batch;
}

std::uint64_t RecoveryReport::total_sim() const {
  std::uint64_t t = 0;
  for (const auto& p : phases) t += p.sim;
  return t;
}

double RecoveryReport::total_wall() const {
  double t = 0;
  for (const auto& p : phases) t += p.wall_s;
  return t;
}

std::string RecoveryReport::json_lines() const {
  std::string out;
  for (const auto& p : phases) {
    nlohmann::json j{{"node", node},       {"mode", std::string(to_string(mode))},
                     {"phase", p.phase},   {"sim_units", p.sim},
                     {"wall_s", p.wall_s}, {"records", p.records},
                     {"workers", workers}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

DurableState load_durable_state(const fs::path& dir, NodeId node, LogMode mode) {
  DurableState st;
  auto t0 = std::chrono::steady_clock::now();
  if (auto snap = read_checkpoint(dir, node)) {
    st.store = std::move(snap->store);
    st.watermark = snap->watermark;
    st.next_lsn = snap->next_lsn;
  }
  st.snapshot_records = st.store.size();
  st.snapshot_wall_s = seconds_since(t0);
  t0 = std::chrono::steady_clock::now();
  st.log = load_log(dir, node, mode, true);
  st.log_wall_s = seconds_since(t0);
  st.next_lsn = std::max(st.next_lsn, st.log.max_lsn + 1);
  st.standings = log_standings(st.log);
  return st;
}

RecoveryResult recover_node(const fs::path& dir, NodeId node, const Registry& registry, const KeyOwnership& owner,
                            const RecoveryOptions& options) {
  RecoveryResult res;
  auto st = load_durable_state(dir, node, options.mode);
  res.report.node = node;
  res.report.mode = options.mode;
  res.report.workers = options.workers;
  res.report.phases.push_back(PhaseTiming{"data_loading", st.snapshot_records * options.costs.snapshot_record,
                                          st.snapshot_wall_s, st.snapshot_records});
  auto t0 = std::chrono::steady_clock::now();
  auto pruned = prune_log(st.log, st.watermark, options.decisions);
  ReplayGraph graph;
  if (options.mode != LogMode::aries) graph = rebuild_replay_graph(pruned, registry, owner, node);
  res.report.phases.push_back(PhaseTiming{"log_loading", st.log.records * options.costs.log_record,
                                          st.log_wall_s + seconds_since(t0), st.log.records});

  t0 = std::chrono::steady_clock::now();
  res.store = std::move(st.store);
  std::uint64_t sim = 0;
  if (options.mode == LogMode::aries) {
    std::vector<AriesLogRecord> records;
    records.reserve(pruned.items.size());
    for (const auto& item : pruned.items) records.push_back(std::get<AriesLogRecord>(item.payload));
    res.report.replayed = serial_replay_aries(res.store, records);
    sim = res.report.replayed * options.costs.aries_record;
  } else if (options.mode != LogMode::none) {
    if (options.threaded) {
      parallel_replay(res.store, registry, graph, options.workers);
    } else {
      serial_replay(res.store, registry, graph);
    }
    res.report.replayed = graph.size();
    std::vector<std::uint32_t> all(graph.size());
    for (std::uint32_t v = 0; v < graph.size(); ++v) all[v] = v;
    sim = replay_makespan(graph, all, options.workers, options.costs.replay_vertex);
  }
  res.report.phases.push_back(PhaseTiming{"replaying", sim, seconds_since(t0), res.report.replayed});
  res.replayed_txns = pruned.txns;
  res.next_lsn = st.next_lsn;
  res.max_epoch = st.log.max_epoch;
  return res;
}

}  // namespace depdb
