// Acceptance run: one PASS/FAIL line per criterion, then a summary.
//
// Exit status is 0 when every criterion passes. The real-thread replay
// speedup needs eight hardware threads; on smaller machines its line still
// prints the measured result but does not decide the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "depdb/bench.hpp"
#include "depdb/cluster.hpp"
#include "depdb/executor.hpp"
#include "fixtures.hpp"

using namespace depdb;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
  /// False when the result depends on hardware this machine lacks.
  bool decisive = true;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("depdb_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::shared_ptr<const Workload> workload_for(const SimConfig& cfg) {
  return std::shared_ptr<const Workload>(make_workload(cfg.workload, cfg.nodes));
}

SimConfig cluster_config(LogMode mode, std::size_t nodes, std::size_t batch, std::uint64_t epochs, std::uint64_t keys,
                         double dist_pct, std::uint64_t seed, const fs::path& dir) {
  SimConfig cfg;
  cfg.nodes = nodes;
  cfg.workers = 4;
  cfg.batch_size = batch;
  cfg.max_epochs = epochs;
  cfg.logging = mode;
  cfg.seed = seed;
  cfg.log_dir = dir;
  cfg.workload.keys = keys;
  cfg.workload.dist_pct = dist_pct;
  cfg.workload.batch_size = batch;
  cfg.workload.seed = seed;
  return cfg;
}

bool writes_on(const Transaction& t, const Workload& w, NodeId node) {
  for (const auto& a : t.access_set) {
    if (is_write(a.kind) && w.ownership()(a.target) == node) return true;
  }
  return false;
}

// ---- 1 -------------------------------------------------------------------

Verdict serializability() {
  std::mt19937_64 rng(1);
  const double dists[] = {0, 10, 50, 100};
  const LogMode modes[] = {LogMode::none, LogMode::fine, LogMode::coarse, LogMode::aries};
  auto dir = scratch("serial");
  std::uint64_t epochs = 0, runs = 0, mismatches = 0;
  while (epochs < 1000) {
    auto keys = 64 + rng() % (1024 - 64 + 1);
    auto cfg = cluster_config(modes[runs % 4], 4, 20, 20, keys, dists[rng() % 4], 100 + runs, dir);
    Cluster c(cfg, workload_for(cfg));
    c.run();
    epochs += c.epoch_stats().size();
    ++runs;
    auto expected = serial_oracle(c.workload(), c.transcript().serial_order());
    if (c.transcript().size() != c.submitted() || c.combined_store().serialize() != expected.serialize()) ++mismatches;
  }
  return {mismatches == 0, fmt::format("{} epochs in {} cluster runs, {} state mismatches", epochs, runs, mismatches)};
}

// ---- 2 -------------------------------------------------------------------

Verdict crash_recovery() {
  std::mt19937_64 rng(2);
  std::uint64_t runs = 0, state_bad = 0, unlogged = 0, phantom = 0, unfinished = 0;
  for (auto mode : {LogMode::fine, LogMode::coarse, LogMode::aries}) {
    auto dir = scratch(std::string("crash_") + std::string(to_string(mode)));
    for (int i = 0; i < 100; ++i, ++runs) {
      auto keys = 200 + rng() % 600;
      auto cfg = cluster_config(mode, 4, 20, 10, keys, 20, 1000 + i, dir);
      auto w = workload_for(cfg);
      Tick horizon;
      {
        Cluster dry(cfg, w);
        dry.run();
        horizon = dry.loop().now();
      }
      Cluster c(cfg, w);
      c.schedule_crash(1 + rng() % horizon, static_cast<NodeId>(rng() % cfg.nodes));
      c.run();
      auto expected = serial_oracle(c.workload(), c.transcript().serial_order());
      if (c.combined_store().serialize() != expected.serialize()) ++state_bad;
      const auto ids = c.transcript().ids();
      std::map<TxnId, const Transaction*> by_id;
      for (const auto& [order, entry] : c.transcript().entries()) by_id.emplace(entry.txn.id, &entry.txn);
      for (const auto& rec : c.recoveries()) {
        if (rec.interrupted) continue;
        if (!rec.finished) ++unfinished;
        for (const auto& t : rec.replayed) phantom += ids.count(t) == 0;
        for (const auto& t : rec.committed_before_crash) {
          if (t.epoch > rec.watermark && writes_on(*by_id.at(t), c.workload(), rec.node) && !rec.replayed.count(t)) {
            ++unlogged;
          }
        }
      }
    }
  }
  bool ok = state_bad == 0 && unlogged == 0 && phantom == 0 && unfinished == 0;
  return {ok, fmt::format("{} crash runs: {} state mismatches, {} committed-but-unlogged, {} uncommitted replayed, "
                          "{} unfinished recoveries",
                          runs, state_bad, unlogged, phantom, unfinished)};
}

// ---- 3 -------------------------------------------------------------------

SimConfig single_node(LogMode mode, const fs::path& dir) {
  auto cfg = cluster_config(mode, 1, 1000, 10, 200'000, 0, 3, dir);
  cfg.workload.theta = 0;  // low contention
  cfg.workload.columns = 2;
  cfg.workload.value_size = 16;
  cfg.duration_s = 0;
  return cfg;
}

double replay_wall(const fs::path& dir, const Workload& w, LogMode mode, unsigned workers, std::uint64_t* records) {
  RecoveryOptions opt;
  opt.mode = mode;
  opt.workers = workers;
  opt.threaded = workers > 1;
  double best = 1e300;
  for (int rep = 0; rep < 3; ++rep) {
    auto res = recover_node(dir, 0, w.registry(), w.ownership(), opt);
    const auto& replay = res.report.phases.back();
    best = std::min(best, replay.wall_s);
    if (records) *records = replay.records;
  }
  return best;
}

Verdict replay_speedup() {
  // Same transcript logged twice: fine-grained and physical baseline.
  auto fine_dir = scratch("speedup_fine");
  auto aries_dir = scratch("speedup_aries");
  auto fine_cfg = single_node(LogMode::fine, fine_dir);
  auto aries_cfg = single_node(LogMode::aries, aries_dir);
  auto w = workload_for(fine_cfg);
  {
    Cluster a(fine_cfg, w);
    a.run();
    Cluster b(aries_cfg, w);
    b.run();
  }
  std::uint64_t fine_records = 0, aries_records = 0;
  double fine8 = replay_wall(fine_dir, *w, LogMode::fine, 8, &fine_records);
  double aries1 = replay_wall(aries_dir, *w, LogMode::aries, 1, &aries_records);
  double speedup = aries1 / fine8;

  // Coarse replay on a single-warehouse order-entry log: every transaction
  // touches the warehouse row, so replay is a chain.
  auto hot_dir = scratch("hot");
  auto hot = cluster_config(LogMode::coarse, 1, 200, 5, 1000, 0, 4, hot_dir);
  hot.workload.kind = WorkloadKind::tpcc;
  hot.workload.warehouses = 1;
  auto hw = workload_for(hot);
  {
    Cluster c(hot, hw);
    c.run();
  }
  auto state = load_durable_state(hot_dir, 0, LogMode::coarse);
  auto graph = rebuild_replay_graph(prune_log(state.log, state.watermark), hw->registry(), hw->ownership(), 0);
  std::vector<std::uint32_t> all(graph.size());
  std::iota(all.begin(), all.end(), 0);
  auto serial = replay_makespan(graph, all, 1, hot.recovery.replay_vertex);
  auto parallel = replay_makespan(graph, all, 8, hot.recovery.replay_vertex);
  double effective = static_cast<double>(serial) / static_cast<double>(parallel);

  unsigned hw_threads = std::thread::hardware_concurrency();
  bool speed_ok = speedup >= 2.5;
  bool hot_ok = effective <= 1.5 && graph.size() > 0;
  Verdict v;
  v.pass = speed_ok && hot_ok && fine_records >= 100'000;
  v.decisive = hw_threads >= 8;
  v.detail = fmt::format(
      "fine replay of {} records on 8 threads {:.3f}s vs serial baseline of {} records {:.3f}s: {:.2f}x (need >= 2.5); "
      "coarse hot-record effective parallelism {:.2f} over {} transactions (need <= 1.5); {} hardware threads",
      fine_records, fine8, aries_records, aries1, speedup, effective, graph.size(), hw_threads);
  if (!v.decisive) v.detail += " -- speedup needs 8 hardware threads, not counted toward the exit status";
  return v;
}

// ---- 4 -------------------------------------------------------------------

// Node 0 issues N distributed transactions per epoch, node 1 none. Each one
// is a request/response: write at home, write at the peer, write at home
// again, on keys no other transaction touches.
class RoundTrips final : public Workload {
 public:
  RoundTrips(const WorkloadConfig& config) : Workload(config, 2) {
    registry_ = fx::script_registry();
    owner_ = [](const RecordRef& ref) -> NodeId { return ref.key[0] == 'b' ? 1 : 0; };
  }
  static std::string key(char side, EpochId e, std::size_t i) {
    return fmt::format("{}{}_{}", side, e, i);
  }
  void populate(Store& store, NodeId node) const override {
    for (std::size_t i = 0; i < config_.batch_size; ++i) {
      for (char side : node == 0 ? std::string("ac") : std::string("b")) {
        Record r;
        r.set("v", key(side, 1, i));
        store.put(fx::key(key(side, 1, i)), r);
      }
    }
  }
  std::vector<Transaction> generate(NodeId node, EpochId e, std::size_t count) const override {
    std::vector<Transaction> out;
    if (node != 0) return out;
    auto rw = AccessKind::read_write;
    for (std::uint32_t i = 0; i < count; ++i) {
      out.push_back(fx::script_txn(registry_, TxnId{0, e, i}, 0, {{key('a', e, i), rw}, {key('b', e, i), rw}, {key('c', e, i), rw}}));
    }
    return out;
  }
};

Verdict latency_amortization() {
  const Tick rtt = 1000;
  bool ok = true;
  std::string detail;
  for (std::size_t n : {1, 8, 64}) {
    SimConfig cfg;
    cfg.nodes = 2;
    cfg.batch_size = n;
    cfg.max_epochs = 1;
    cfg.logging = LogMode::none;
    cfg.rtt = rtt;
    cfg.action_cost = 0;
    cfg.resolve_cost = 0;
    cfg.flush_cost = 0;
    cfg.workload.batch_size = n;
    Cluster c(cfg, std::make_shared<RoundTrips>(cfg.workload));
    c.run();
    const auto& s = c.epoch_stats().at(1);
    double per_txn = static_cast<double>(s.dist_committed - s.started) / static_cast<double>(s.dist_txns);
    double want = 2.0 * rtt / static_cast<double>(n);
    bool good = s.dist_txns == n && std::abs(per_txn - want) <= 0.1 * want;
    ok &= good;
    detail += fmt::format("{}N={}: {:.1f} ticks/txn (2R/N = {:.1f})", detail.empty() ? "" : "; ", n, per_txn, want);
  }
  return {ok, detail};
}

// ---- 5 -------------------------------------------------------------------

Verdict log_sizes() {
  std::map<LogMode, std::uint64_t> bytes;
  for (auto mode : {LogMode::fine, LogMode::coarse, LogMode::aries}) {
    auto cfg = cluster_config(mode, 4, 50, 20, 4000, 10, 5, scratch("size_" + std::string(to_string(mode))));
    cfg.workload.read_ratio = 0.5;
    cfg.workload.ops_per_txn = 10;
    Cluster c(cfg, workload_for(cfg));
    c.run();
    bytes[mode] = c.log_bytes();
  }
  bool order = bytes[LogMode::coarse] < bytes[LogMode::fine] && bytes[LogMode::fine] < bytes[LogMode::aries];

  // Two overlapping writers: t1 updates A, B, C and t2 updates B, C, D.
  auto reg = fx::script_registry();
  auto rw = AccessKind::read_write;
  std::vector<Transaction> batch{fx::script_txn(reg, TxnId{0, 1, 1}, 0, {{"A", rw}, {"B", rw}, {"C", rw}}),
                                 fx::script_txn(reg, TxnId{0, 1, 2}, 0, {{"B", rw}, {"C", rw}, {"D", rw}})};
  auto store = fx::seeded_store({"A", "B", "C", "D"});
  const KeyOwnership local = [](const RecordRef&) -> NodeId { return 0; };
  auto res = run_local_epoch(store, reg, 1, batch, local, LocalEpochOptions{});
  std::vector<TxnEdge> events;
  build_graph(1, decompose_batch(reg, batch), local, BuildOptions{}, &events);
  Lsn next = 1;
  auto fine = emit_fine_records(EmitInput{res.graph, res.effects, 0, false}, next);
  auto tg = transform_to_txn_graph(std::vector<TxnId>{batch[0].id, batch[1].id}, events);
  TxnLookup lookup = [&](const TxnId& id) -> const Transaction& { return batch[id.seq - 1]; };
  next = 1;
  auto coarse = emit_coarse_records(EmitInput{res.graph, res.effects, 0, false}, tg, lookup, next);
  bool micro = fine.records.size() == 6 && coarse.records.size() == 2;

  return {order && micro,
          fmt::format("bytes coarse {} < fine {} < aries {}: {}; overlapping writers give {} fine vs {} coarse records",
                      bytes[LogMode::coarse], bytes[LogMode::fine], bytes[LogMode::aries], order ? "yes" : "no",
                      fine.records.size(), coarse.records.size())};
}

// ---- 6 -------------------------------------------------------------------

Verdict on_demand_recovery() {
  // Wall-clock part: a fine log of a few epochs on one node.
  auto dir = scratch("on_demand");
  auto cfg = cluster_config(LogMode::fine, 1, 500, 4, 20'000, 0, 6, dir);
  cfg.workload.theta = 0.6;
  cfg.duration_s = 0;
  auto w = workload_for(cfg);
  {
    Cluster c(cfg, w);
    c.run();
  }
  auto state = load_durable_state(dir, 0, LogMode::fine);
  auto graph = rebuild_replay_graph(prune_log(state.log, state.watermark), w->registry(), w->ownership(), 0);

  auto t0 = std::chrono::steady_clock::now();
  {
    Store full = state.store;
    ReplaySession s(full, w->registry(), graph);
    s.background(graph.size());
  }
  double full_wall = seconds_since(t0);

  // The first newly arriving transaction whose closure is at most 1% of the graph.
  Store store = state.store;
  ReplaySession session(store, w->registry(), graph);
  std::optional<Transaction> txn;
  std::size_t closure = 0;
  for (const auto& t : w->generate(0, cfg.max_epochs + 1, 200)) {
    std::vector<RecordRef> keys;
    for (const auto& a : t.access_set) keys.push_back(a.target);
    closure = session.closure(keys).size();
    if (closure * 100 <= graph.size()) {
      txn = t;
      break;
    }
  }
  double on_demand_wall = 0;
  if (txn) {
    std::vector<RecordRef> keys;
    for (const auto& a : txn->access_set) keys.push_back(a.target);
    auto t1 = std::chrono::steady_clock::now();
    session.recover_keys(keys);
    DirectView view(store);
    run_procedure(view, w->registry(), *txn);
    on_demand_wall = seconds_since(t1);
  }
  bool wall_ok = txn && graph.size() >= 10'000 && on_demand_wall < 0.1 * full_wall;

  // Throughput-over-time part: crash one node of a running cluster and count
  // commits in every whole bucket between its restart and full recovery. The
  // bucket holding the crash is skipped: epochs already committing when the
  // node failed drain into it under every mode.
  const Tick bucket = 5'000;
  std::map<LogMode, std::pair<std::uint64_t, std::uint64_t>> during;  // commits, buckets
  for (auto mode : {LogMode::fine, LogMode::coarse, LogMode::aries}) {
    auto cc = cluster_config(mode, 4, 40, 40, 400, 10, 1, scratch("availability_" + std::string(to_string(mode))));
    cc.recovery.replay_vertex = 40;
    cc.recovery.aries_record = 40;
    Cluster c(cc, workload_for(cc));
    c.schedule_crash(120'000, 1);
    c.run();
    if (c.recoveries().size() != 1 || !c.recoveries()[0].finished) return {false, "recovery did not finish"};
    const auto& rec = c.recoveries()[0];
    std::map<Tick, std::uint64_t> per_bucket;
    for (const auto& [order, entry] : c.transcript().entries()) ++per_bucket[entry.committed / bucket];
    std::uint64_t commits = 0, buckets = 0;
    for (Tick b = rec.restarted / bucket + 1; (b + 1) * bucket <= rec.recovered; ++b) {
      commits += per_bucket.count(b) ? per_bucket[b] : 0;
      ++buckets;
    }
    during[mode] = {commits, buckets};
  }
  bool shape_ok = during[LogMode::fine].first > 0 && during[LogMode::coarse].first > 0 &&
                  during[LogMode::aries].first == 0 && during[LogMode::aries].second > 0;

  return {wall_ok && shape_ok,
          fmt::format("graph {} vertices, closure {} ({:.2f}%): on-demand commit {:.4f}s vs full replay {:.4f}s "
                      "({:.1f}%); commits during recovery: fine {} / coarse {} / aries {} (over {}/{}/{} buckets of {} "
                      "ticks)",
                      graph.size(), closure, 100.0 * static_cast<double>(closure) / std::max<std::size_t>(1, graph.size()),
                      on_demand_wall, full_wall, full_wall > 0 ? 100 * on_demand_wall / full_wall : 0.0,
                      during[LogMode::fine].first, during[LogMode::coarse].first, during[LogMode::aries].first,
                      during[LogMode::fine].second, during[LogMode::coarse].second, during[LogMode::aries].second,
                      bucket)};
}

// ---- 7 -------------------------------------------------------------------

constexpr double kChi2Critical99 = 134.64161685578915;  // df 99, alpha 0.01

std::vector<TxnMeta> metas_of(const std::vector<Transaction>& txns) {
  std::vector<TxnMeta> out;
  for (const auto& t : txns) out.push_back(TxnMeta{t.id, t.procedure, t.params, t.home, t.id.seq});
  return out;
}

Verdict invariant_suites() {
  std::vector<std::string> failed;
  auto check = [&](bool ok, const std::string& what) {
    if (!ok) failed.push_back(what);
  };
  auto reg = fx::script_registry();
  const KeyOwnership local = [](const RecordRef&) -> NodeId { return 0; };
  std::mt19937_64 rng(7);

  // Constructed graphs, and the transaction graph as their projection.
  {
    auto keys = fx::key_names(20);
    bool acyclic = true, projected = true;
    for (EpochId e = 1; e <= 1000; ++e) {
      auto batch = fx::random_batch(reg, rng, e, keys, 25, 4, 0.5);
      std::vector<TxnEdge> events;
      auto g = build_graph(e, decompose_batch(reg, batch), local, BuildOptions{1 + static_cast<unsigned>(e % 3)}, &events);
      acyclic &= check_acyclic(g);
      std::vector<TxnId> ids;
      for (const auto& t : batch) ids.push_back(t.id);
      auto tg = transform_to_txn_graph(ids, events);
      std::set<TxnEdge> expected;
      for (const auto& edge : g.edges_of(EdgeKind::temporal)) {
        const auto& a = g.vertices[edge.from].action.id.txn;
        const auto& b = g.vertices[edge.to].action.id.txn;
        if (a != b) expected.emplace(a, b);
      }
      projected &= tg.edges == expected && check_acyclic(tg);
    }
    check(acyclic, "constructed graph acyclicity");
    check(projected, "txn graph projection");
  }

  // Merged graphs over four nodes.
  {
    const std::size_t nodes = 4;
    KeyOwnership owner = [](const RecordRef& ref) -> NodeId { return static_cast<NodeId>(std::stoul(ref.key.substr(1)) % 4); };
    auto keys = fx::key_names(24);
    bool acyclic = true;
    for (EpochId e = 1; e <= 200; ++e) {
      std::vector<std::map<NodeId, Subgraph>> parts(nodes);
      for (NodeId o = 0; o < nodes; ++o) {
        auto batch = fx::random_batch(reg, rng, e, keys, 15, 4, 0.6, o);
        auto split = split_batch(batch, owner, nodes);
        auto g = build_graph(e, decompose_batch(reg, split.distributed), owner);
        parts[o] = partition_graph(g, metas_of(split.distributed), o);
      }
      std::vector<NodeId> origins{0, 1, 2, 3};
      for (NodeId d = 0; d < nodes; ++d) {
        Subgraph own{d, d, e, {}, {}, {}, {}, {}};
        std::vector<Subgraph> remotes;
        for (NodeId o = 0; o < nodes; ++o) {
          auto it = parts[o].find(d);
          Subgraph s = it != parts[o].end() ? it->second : Subgraph{o, d, e, {}, {}, {}, {}, {}};
          if (o == d) {
            own = s;
          } else {
            remotes.push_back(s);
          }
        }
        acyclic &= check_acyclic(merge_subgraphs(own, remotes, origins).graph);
      }
    }
    check(acyclic, "merged graph acyclicity");
  }

  // Rebuilt replay graphs from a cluster's logs, every mode and node.
  {
    bool acyclic = true;
    for (auto mode : {LogMode::fine, LogMode::coarse, LogMode::aries}) {
      auto cfg = cluster_config(mode, 3, 30, 10, 300, 30, 8, scratch("rebuilt"));
      Cluster c(cfg, workload_for(cfg));
      c.run();
      for (NodeId n = 0; n < cfg.nodes; ++n) {
        auto log = load_log(cfg.log_dir, n, mode, false);
        acyclic &= check_acyclic(rebuild_replay_graph(prune_log(log, 0), c.workload().registry(), c.workload().ownership(), n));
      }
    }
    check(acyclic, "rebuilt graph acyclicity");
  }

  // Stored out-edges plus in-transaction action order rebuild every edge.
  std::vector<LogEntry> corpus;
  {
    auto keys = fx::key_names(12);
    bool lossless = true;
    for (int round = 0; round < 200; ++round) {
      auto store = fx::seeded_store(keys);
      auto batch = fx::random_batch(reg, rng, 1, keys, 30, 4, 0.5);
      LocalEpochOptions opt;
      opt.workers = 4;
      auto res = run_local_epoch(store, reg, 1, batch, local, opt);
      Lsn next = 1;
      auto em = emit_fine_records(EmitInput{res.graph, res.effects, 0, false}, next);
      std::map<Lsn, std::uint32_t> vertex_of;
      std::map<ActionId, std::uint32_t> by_action;
      for (std::size_t i = 0; i < em.records.size(); ++i) {
        vertex_of[em.records[i].lsn] = em.source_vertex[i];
        by_action[ActionId{em.records[i].txn, em.records[i].action_index}] = em.source_vertex[i];
      }
      std::set<std::pair<std::uint32_t, std::uint32_t>> rebuilt, original;
      for (std::size_t i = 0; i < em.records.size(); ++i) {
        for (auto to : em.records[i].out_edges) rebuilt.emplace(em.source_vertex[i], vertex_of.at(to));
      }
      for (const auto& [id, v] : by_action) {
        auto it = by_action.find(ActionId{id.txn, static_cast<std::uint16_t>(id.index + 1)});
        if (it != by_action.end()) rebuilt.emplace(v, it->second);
      }
      for (const auto& e : res.graph.edges()) original.emplace(e.from, e.to);
      lossless &= em.records.size() == res.graph.size() && rebuilt == original;
      if (round < 3) {
        corpus.insert(corpus.end(), em.records.begin(), em.records.end());
        next = 1;
        auto ar = emit_aries_records(EmitInput{res.graph, res.effects, 0, false}, next);
        corpus.insert(corpus.end(), ar.records.begin(), ar.records.end());
      }
    }
    check(lossless, "edge compression losslessness");
  }

  // Codec: round trip and every truncation of every record is rejected; a
  // scan of every prefix of the concatenated log yields exactly the whole
  // records before the cut.
  {
    CoarseLogRecord coarse;
    coarse.lsn = 9;
    coarse.txn = TxnId{0, 7, 1};
    coarse.procedure = "script";
    coarse.params = "params";
    coarse.out_edges = {TxnId{0, 7, 2}};
    coarse.distributed = true;
    coarse.images = {RecordImage{fx::key("A"), AccessKind::read_write, {{"v", "A"}}, {{"v", "A.x"}}}};
    corpus.push_back(coarse);
    for (auto kind : {MarkerKind::prepared, MarkerKind::commit, MarkerKind::abort, MarkerKind::local}) {
      corpus.push_back(EpochMarker{3, kind, 5});
    }
    std::uint64_t misdecodes = 0, cuts = 0;
    Bytes log;
    std::vector<std::size_t> ends;
    for (const auto& e : corpus) {
      auto wire = encode_record(e);
      if (!(decode_record(wire) == e)) ++misdecodes;
      for (std::size_t cut = 0; cut < wire.size(); ++cut, ++cuts) {
        try {
          decode_record(std::string_view(wire).substr(0, cut));
          ++misdecodes;
        } catch (const Error&) {
        }
      }
      log += wire;
      ends.push_back(log.size());
    }
    for (std::size_t cut = 0; cut <= log.size(); cut += 1) {
      auto scan = scan_log(std::string_view(log).substr(0, cut));
      std::size_t whole = std::upper_bound(ends.begin(), ends.end(), cut) - ends.begin();
      bool same = scan.entries.size() == whole;
      for (std::size_t i = 0; same && i < whole; ++i) same = scan.entries[i] == corpus[i];
      if (!same) ++misdecodes;
    }
    check(misdecodes == 0, fmt::format("codec ({} mis-decodes over {} truncations)", misdecodes, cuts));
  }

  // Zipf goodness of fit.
  std::string chi;
  for (double theta : {0.0, 0.6, 0.8}) {
    ZipfSampler z(theta, 100);
    std::mt19937_64 zr(77);
    std::vector<double> counts(100, 0);
    const std::size_t samples = 200'000;
    for (std::size_t i = 0; i < samples; ++i) counts[z.sample(zr) - 1] += 1;
    double norm = 0;
    for (int k = 1; k <= 100; ++k) norm += std::pow(k, -theta);
    double stat = 0;
    for (int k = 1; k <= 100; ++k) {
      double expected = samples * std::pow(k, -theta) / norm;
      stat += (counts[k - 1] - expected) * (counts[k - 1] - expected) / expected;
    }
    check(stat < kChi2Critical99, fmt::format("zipf chi-square at theta {}", theta));
    chi += fmt::format("{}{:.1f}", chi.empty() ? "" : "/", stat);
  }

  // Order-entry transaction mix.
  std::string mix;
  {
    WorkloadConfig cfg;
    cfg.kind = WorkloadKind::tpcc;
    auto w = make_workload(cfg, 2);
    std::map<std::string, double> count;
    double total = 0;
    for (EpochId e = 1; total < 10'000; ++e) {
      for (NodeId n = 0; n < 2; ++n) {
        for (const auto& t : w->generate(n, e, 77)) {
          count[t.procedure] += 1;
          total += 1;
        }
      }
    }
    const std::pair<const char*, double> want[] = {
        {"new_order", 0.44}, {"payment", 0.45}, {"delivery", 0.04}, {"order_status", 0.04}, {"stock_level", 0.03}};
    for (const auto& [name, share] : want) {
      double got = count[name] / total;
      check(std::abs(got - share) <= 0.01, fmt::format("mix share of {}", name));
      mix += fmt::format("{}{:.1f}", mix.empty() ? "" : "/", 100 * got);
    }
  }

  std::string detail = fmt::format("chi-square {} (critical {:.2f}); order-entry mix {}", chi, kChi2Critical99, mix);
  if (!failed.empty()) {
    detail += "; failed:";
    for (const auto& f : failed) detail += " [" + f + "]";
  }
  return {failed.empty(), detail};
}

// ---- 8 -------------------------------------------------------------------

Verdict message_economy() {
  bool ok = true;
  std::string detail;
  for (double dist : {10.0, 50.0, 100.0}) {
    auto cfg = cluster_config(LogMode::none, 4, 40, 15, 800, dist, 9, scratch("economy"));
    Cluster c(cfg, workload_for(cfg));
    c.run();
    std::uint64_t worst = 0, dist_txns = 0;
    for (const auto& [key, n] : c.network().counts().subgraphs) worst = std::max(worst, n);
    for (const auto& [e, s] : c.epoch_stats()) dist_txns += s.dist_txns;
    ok &= worst <= cfg.nodes - 1 && !c.network().counts().subgraphs.empty();
    detail += fmt::format("{}dist {}%: {} distributed txns, max {} subgraphs per (epoch, node)", detail.empty() ? "" : "; ",
                          dist, dist_txns, worst);
  }
  return {ok, detail + " (bound 3)"};
}

}  // namespace

int main() {
  const std::vector<std::pair<int, std::function<Verdict()>>> criteria{
      {1, serializability},    {2, crash_recovery}, {3, replay_speedup},   {4, latency_amortization},
      {5, log_sizes},          {6, on_demand_recovery}, {7, invariant_suites}, {8, message_economy},
  };
  int failed = 0, passed = 0;
  for (const auto& [n, run] : criteria) {
    auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("threw: ") + e.what()};
    }
    fmt::print("criterion {}: {} -- {} [{:.1f}s]\n", n, v.pass ? "PASS" : "FAIL", v.detail, seconds_since(t0));
    std::fflush(stdout);
    if (v.pass) {
      ++passed;
    } else if (v.decisive) {
      ++failed;
    }
  }
  fmt::print("{}/{} criteria passed\n", passed, criteria.size());
  return failed == 0 ? 0 : 1;
}
