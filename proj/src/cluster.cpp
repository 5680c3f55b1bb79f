#include "depdb/cluster.hpp"

#include <algorithm>
#include <chrono>
#include <regex>

#include "depdb/executor.hpp"

namespace depdb {

namespace fs = std::filesystem;

void Transcript::report(const Transaction& txn, const SerialOrder& order, Tick time, Tick submitted) {
  if (by_id_.count(txn.id)) return;
  by_id_.emplace(txn.id, order);
  by_order_.emplace(order, TranscriptEntry{txn, order, time, submitted});
}

std::set<TxnId> Transcript::ids() const {
  std::set<TxnId> out;
  for (const auto& [id, order] : by_id_) out.insert(id);
  return out;
}

std::vector<Transaction> Transcript::serial_order() const {
  std::vector<Transaction> out;
  out.reserve(by_order_.size());
  for (const auto& [order, entry] : by_order_) out.push_back(entry.txn);
  return out;
}

Store serial_oracle(const Workload& workload, std::span<const Transaction> txns) {
  Store store;
  for (NodeId n = 0; n < workload.nodes(); ++n) workload.populate(store, n);
  for (const auto& t : txns) execute_transaction(store, workload.registry(), t);
  return store;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::uint8_t standing_code(Standing s) { return static_cast<std::uint8_t>(s); }

}  // namespace

struct Cluster::Node {
  enum class Mode { normal, loading, collecting, replaying };

  struct Epoch {
    EpochId e = 0;
    Tick started = 0;
    bool resolved = false;
    std::vector<Transaction> local;
    DependencyGraph local_graph;
    std::vector<TxnEdge> local_edges;
    Subgraph own;
    std::map<NodeId, Subgraph> remote;
    bool local_done = false;
    bool merged = false;
    MergedGraph mg;
    std::unique_ptr<WaveRunner> runner;
    ContextTable ctx;
    std::vector<ExecutedVertex> executed;
    std::uint64_t counter = 0;
    std::vector<std::uint32_t> exec_order;
    std::vector<VertexDone> early;
    bool prepared = false;
    std::set<NodeId> votes;
  };

  Cluster& c;
  NodeId id;
  Mode mode = Mode::normal;
  bool alive = true;
  std::uint32_t incarnation = 0;
  Store store;
  std::unique_ptr<LogWriter> log;
  std::map<EpochId, Epoch> epochs;
  EpochId next_resolve = 1;
  EpochId decided_upto = 0;
  EpochId resume_applied = 0;
  EpochId max_started = 0;
  bool resolving = false;
  bool busy = false;
  bool flushing = false;
  bool parked = false;
  std::map<EpochId, Standing> decided;
  std::set<EpochId> in_doubt;  // durable prepared-but-undecided, while recovering
  std::vector<NodeId> deferred_replies;
  std::map<NodeId, std::vector<EpochStanding>> statuses;
  std::map<NodeId, EpochId> hints;
  std::optional<DurableState> durable;
  std::unique_ptr<ReplaySession> session;
  Tick idle_since = 0;
  std::uint64_t credit = 0;
  std::uint64_t wake_token = 0;
  std::size_t record = 0;  // index into c.recoveries_
  double replay_wall_s = 0;  // real time spent replaying for the current recovery
  std::mt19937_64 rng;

  Node(Cluster& cluster, NodeId node) : c(cluster), id(node), rng(cluster.config_.seed * 7919 + node) {
    const auto& cfg = c.config_;
    c.workload_->populate(store, id);
    write_checkpoint(cfg.log_dir, id, store, 0, 1);
    log = std::make_unique<LogWriter>(cfg.log_dir, id, cfg.logging, cfg.workers);
  }

  const SimConfig& cfg() const { return c.config_; }
  const Registry& reg() const { return c.workload_->registry(); }
  const KeyOwnership& owner() const { return c.workload_->ownership(); }
  std::size_t n() const { return c.config_.nodes; }
  Tick now() const { return c.loop_.now(); }
  bool logging() const { return cfg().logging != LogMode::none; }

  void after(Tick delay, const char* label, std::function<void()> fn) {
    c.loop_.after(delay, label, [this, inc = incarnation, fn = std::move(fn)] {
      if (alive && incarnation == inc) fn();
    });
  }

  void send(NodeId dest, Message msg) {
    msg.origin = id;
    msg.incarnation = incarnation;
    c.net_->send(id, dest, msg);
  }

  // ---- normal operation ---------------------------------------------------

  void kick() {
    if (!alive || mode != Mode::normal || parked) return;
    if (!resolving && next_resolve <= decided_upto + 2 && c.may_start_epoch(next_resolve)) start_resolution();
    if (busy) return;
    auto it = epochs.find(decided_upto + 1);
    if (it == epochs.end() || !it->second.resolved) return idle();
    auto& ep = it->second;
    if (!ep.local_done) return run_local(ep);
    if (!ep.merged) {
      if (ep.remote.size() + 1 < n()) return idle();
      merge(ep);
    }
    if (!ep.runner->finished()) {
      auto wave = ep.runner->take_wave();
      if (wave.empty()) return idle();
      return run_wave(ep, std::move(wave));
    }
    if (!ep.prepared) return dist_flush(ep);
    idle();
  }

  void start_resolution() {
    EpochId e = next_resolve++;
    resolving = true;
    max_started = std::max(max_started, e);
    auto& ep = epochs[e];
    ep.e = e;
    ep.started = now();
    c.submitted_[{e, id}] = now();
    auto& stats = c.epoch_stats_[e];
    if (stats.started == 0 || now() < stats.started) stats.started = now();

    std::size_t count = session ? 1 : cfg().batch_size;
    auto batch = c.workload_->generate(id, e, count);
    c.submitted_txns_ += batch.size();
    auto split = split_batch(batch, owner(), n());
    BuildOptions bo{cfg().constructors};
    auto dl = decompose_batch(reg(), split.local);
    ep.local_graph = build_graph(e, dl, owner(), bo, &ep.local_edges);
    auto dd = decompose_batch(reg(), split.distributed);
    auto dg = build_graph(e, dd, owner(), bo);
    std::vector<TxnMeta> metas;
    for (const auto& t : split.distributed) metas.push_back(TxnMeta{t.id, t.procedure, t.params, t.home, t.id.seq});
    auto parts = partition_graph(dg, metas, id);
    ep.local = std::move(split.local);
    auto work = ep.local_graph.size() + ep.local_graph.edges().size() + dg.size() + dg.edges().size();
    Tick cost = cfg().resolve_cost * work / cfg().constructors;
    after(cost, "resolve", [this, e, parts = std::move(parts)]() mutable { finish_resolution(e, std::move(parts)); });
  }

  void finish_resolution(EpochId e, std::map<NodeId, Subgraph> parts) {
    if (e < resume_applied) return;  // superseded by a decision
    resolving = false;
    auto it = epochs.find(e);
    if (it == epochs.end()) return kick();
    auto& ep = it->second;
    for (NodeId p = 0; p < n(); ++p) {
      if (p == id) continue;
      Message m;
      m.epoch = e;
      if (auto s = parts.find(p); s != parts.end() && !s->second.empty()) {
        m.type = MessageType::subgraph;
        m.subgraph = std::move(s->second);
      } else {
        m.type = MessageType::epoch_empty;
      }
      send(p, std::move(m));
    }
    if (auto s = parts.find(id); s != parts.end()) {
      ep.own = std::move(s->second);
    } else {
      ep.own = Subgraph{id, id, e, {}, {}, {}, {}, {}};
    }
    ep.resolved = true;
    kick();
  }

  Tick on_demand(const DependencyGraph& g, std::span<const std::uint32_t> vertices) {
    if (!session) return 0;
    std::vector<RecordRef> keys;
    keys.reserve(vertices.size());
    for (auto v : vertices) keys.push_back(g.vertices[v].action.target);
    auto t0 = std::chrono::steady_clock::now();
    auto replayed = session->recover_keys(keys);
    replay_wall_s += seconds_since(t0);
    c.recoveries_[record].on_demand_vertices += replayed.size();
    Tick t = replay_makespan(session->graph(), replayed, cfg().workers, cfg().recovery.replay_vertex);
    return t;
  }

  Tick on_demand_all(const DependencyGraph& g) {
    std::vector<std::uint32_t> all(g.size());
    for (std::uint32_t v = 0; v < g.size(); ++v) all[v] = v;
    return on_demand(g, all);
  }

  std::size_t append_log(const DependencyGraph& g, std::span<const ExecutedVertex> ex, bool dist,
                         const std::vector<TxnEdge>& txn_edges, const TxnLookup& lookup) {
    if (!logging()) return 0;
    EmitInput in{g, ex, id, dist};
    switch (cfg().logging) {
      case LogMode::fine: {
        auto em = emit_fine_records(in, log->next_lsn());
        log->append_all(em);
        return em.records.size();
      }
      case LogMode::coarse: {
        std::vector<TxnId> ids;
        for (const auto& v : g.vertices) ids.push_back(v.action.id.txn);
        std::sort(ids.begin(), ids.end());
        ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
        auto tg = transform_to_txn_graph(ids, txn_edges);
        auto em = emit_coarse_records(in, tg, lookup, log->next_lsn());
        log->append_all(em);
        return em.records.size();
      }
      case LogMode::aries: {
        auto em = emit_aries_records(in, log->next_lsn());
        log->append_all(em);
        return em.records.size();
      }
      case LogMode::none:
        break;
    }
    return 0;
  }

  void run_local(Epoch& ep) {
    begin_activity();
    EpochId e = ep.e;
    Tick t = on_demand_all(ep.local_graph);
    ContextTable ctx;
    ctx.prepare(ep.local_graph);
    std::vector<ExecutedVertex> ex;
    std::uint64_t counter = 0;
    auto run = run_graph_virtual(store, reg(), ep.local_graph, {}, cfg().workers, cfg().action_cost, 0, ctx, ex,
                                 counter);
    t += run.end;
    std::map<TxnId, const Transaction*> by_id;
    for (const auto& txn : ep.local) by_id[txn.id] = &txn;
    auto count = append_log(ep.local_graph, ex, false, ep.local_edges,
                            [&](const TxnId& tid) -> const Transaction& { return *by_id.at(tid); });
    after(t, "local.exec", [this, e, count] {
      if (!logging()) return local_flushed(e, count);
      flushing = true;
      after(cfg().flush_cost, "local.flush", [this, e, count] { local_flushed(e, count); });
    });
  }

  void local_flushed(EpochId e, std::size_t count) {
    if (logging()) {
      flushing = false;
      log->flush();
      log->write_marker(EpochMarker{e, MarkerKind::local, static_cast<std::uint32_t>(count)});
    }
    auto it = epochs.find(e);
    if (it == epochs.end()) return end_activity();
    auto& ep = it->second;
    ep.local_done = true;
    for (const auto& t : ep.local) {
      c.report_commit(t, SerialOrder{e, 0, t.id.seq, id}, ep.started);
    }
    c.epoch_stats_[e].local_txns += ep.local.size();
    end_activity();
  }

  void merge(Epoch& ep) {
    std::vector<Subgraph> remotes;
    for (const auto& [o, s] : ep.remote) remotes.push_back(s);
    std::vector<NodeId> origins(n());
    for (NodeId i = 0; i < n(); ++i) origins[i] = i;
    ep.mg = merge_subgraphs(ep.own, remotes, origins);
    ep.runner = std::make_unique<WaveRunner>(ep.mg.graph);
    ep.ctx.prepare(ep.mg.graph);
    ep.executed.resize(ep.mg.graph.size());
    ep.merged = true;
    for (const auto& d : ep.early) apply_done(ep, d);
    ep.early.clear();
  }

  void apply_done(Epoch& ep, const VertexDone& d) {
    ep.ctx.merge(d.action.txn, d.context);
    ep.runner->remote_done(d.action);
  }

  void run_wave(Epoch& ep, std::vector<std::uint32_t> wave) {
    begin_activity();
    EpochId e = ep.e;
    const auto& g = ep.mg.graph;
    Tick t = on_demand(g, wave);
    auto run = run_graph_virtual(store, reg(), g, wave, cfg().workers, cfg().action_cost, 0, ep.ctx, ep.executed,
                                 ep.counter);
    ep.exec_order.insert(ep.exec_order.end(), run.order.begin(), run.order.end());
    t += run.end;
    std::vector<std::uint8_t> in_wave(g.size(), 0);
    for (auto v : wave) in_wave[v] = 1;
    std::map<NodeId, std::vector<VertexDone>> out;
    std::set<std::pair<NodeId, std::uint32_t>> sent;
    for (const auto& link : g.remote_out) {
      if (!in_wave[link.vertex] || !sent.emplace(link.remote_node, link.vertex).second) continue;
      const auto& aid = g.vertices[link.vertex].action.id;
      out[link.remote_node].push_back(VertexDone{aid, ep.ctx.at(aid.txn)});
    }
    after(t, "dist.wave", [this, e, out = std::move(out)] {
      for (const auto& [dest, done] : out) {
        Message m;
        m.type = MessageType::vertex_done;
        m.epoch = e;
        m.completed = done;
        send(dest, std::move(m));
      }
      end_activity();
    });
  }

  void dist_flush(Epoch& ep) {
    begin_activity();
    EpochId e = ep.e;
    std::map<TxnId, Transaction> txns;
    for (const auto& [tid, meta] : ep.mg.txns) txns[tid] = Transaction{meta.id, meta.procedure, meta.params, meta.home, {}};
    auto count = append_log(ep.mg.graph, ep.executed, true, ep.mg.txn_edges,
                            [&](const TxnId& tid) -> const Transaction& { return txns.at(tid); });
    if (!logging()) return prepared(e, count);
    flushing = true;
    after(cfg().flush_cost, "dist.flush", [this, e, count] { prepared(e, count); });
  }

  void prepared(EpochId e, std::size_t count) {
    if (logging()) {
      flushing = false;
      log->flush();
      log->write_marker(EpochMarker{e, MarkerKind::prepared, static_cast<std::uint32_t>(count)});
    }
    auto it = epochs.find(e);
    if (it == epochs.end()) return end_activity();
    auto& ep = it->second;
    ep.prepared = true;
    ep.votes.insert(id);
    for (NodeId p = 0; p < n(); ++p) {
      if (p == id) continue;
      Message m;
      m.type = MessageType::epoch_done;
      m.epoch = e;
      send(p, std::move(m));
    }
    busy = false;
    check_commit(e);
    end_activity();
  }

  void check_commit(EpochId e) {
    auto it = epochs.find(e);
    if (it == epochs.end() || !it->second.prepared || it->second.votes.size() < n()) return;
    commit_epoch(e);
  }

  void commit_epoch(EpochId e) {
    auto& ep = epochs.at(e);
    if (logging()) log->write_marker(EpochMarker{e, MarkerKind::commit, 0});
    for (const auto& [tid, meta] : ep.mg.txns) {
      Transaction t{meta.id, meta.procedure, meta.params, meta.home, {}};
      auto sub = c.submitted_.find({e, meta.home});
      c.report_commit(t, SerialOrder{e, 1, meta.seq, meta.home}, sub == c.submitted_.end() ? ep.started : sub->second);
    }
    auto& stats = c.epoch_stats_[e];
    if (!ep.mg.txns.empty()) stats.dist_committed = std::max(stats.dist_committed, now());
    if (id == 0 || stats.dist_txns == 0) stats.dist_txns = std::max(stats.dist_txns, ep.mg.txns.size());
    decided[e] = Standing::committed;
    decided_upto = std::max(decided_upto, e);
    epochs.erase(e);
    trim_decided();
    if (cfg().checkpoint_every != 0 && e % cfg().checkpoint_every == 0 && !session && mode == Mode::normal) {
      write_checkpoint(cfg().log_dir, id, store, e, log->next_lsn());
    }
  }

  void trim_decided() {
    while (decided.size() > 16) decided.erase(decided.begin());
  }

  void begin_activity() {
    advance_background();
    busy = true;
  }

  void end_activity() {
    busy = false;
    idle_since = now();
    for (auto r : std::exchange(deferred_replies, {})) reply_status(r);
    kick();
  }

  void idle() { schedule_wakeup(); }

  // ---- background replay while recovering ----------------------------------

  void advance_background() {
    if (!session) return;
    if (!busy) {
      credit += (now() - idle_since) * cfg().workers;
      auto cost = std::max<Tick>(1, cfg().recovery.replay_vertex);
      auto count = credit / cost;
      credit -= count * cost;
      if (count > 0) {
        auto t0 = std::chrono::steady_clock::now();
        c.recoveries_[record].background_vertices += session->background(count).size();
        replay_wall_s += seconds_since(t0);
      }
    }
    idle_since = now();
    check_recovered();
  }

  void schedule_wakeup() {
    if (!session) return;
    auto cost = std::max<Tick>(1, cfg().recovery.replay_vertex);
    Tick need = (session->remaining() * cost + cfg().workers - 1) / cfg().workers;
    need = need > credit / cfg().workers ? need - credit / cfg().workers : 1;
    auto token = ++wake_token;
    after(std::max<Tick>(1, need), "recovery.background", [this, token] {
      if (token != wake_token || busy) return;
      advance_background();
      schedule_wakeup();
      kick();
    });
  }

  void check_recovered() {
    if (!session || !session->finished()) return;
    auto& rec = c.recoveries_[record];
    rec.recovered = now();
    rec.finished = true;
    rec.report.phases.push_back(PhaseTiming{"replaying", now() - rec.rejoined, replay_wall_s, session->replayed()});
    rec.report.replayed = session->replayed();
    session.reset();
  }

  // ---- messages -------------------------------------------------------------

  void on_message(const Message& m) {
    switch (m.type) {
      case MessageType::status:
        return m.request ? on_status_request(m) : on_status_reply(m);
      case MessageType::decision:
        return on_decision(m);
      default:
        break;
    }
    if (mode != Mode::normal || m.epoch < resume_applied || m.epoch <= decided_upto) return;
    auto& ep = epochs[m.epoch];
    ep.e = m.epoch;
    switch (m.type) {
      case MessageType::subgraph:
        ep.remote[m.origin] = m.subgraph;
        break;
      case MessageType::epoch_empty:
        ep.remote[m.origin] = Subgraph{m.origin, id, m.epoch, {}, {}, {}, {}, {}};
        break;
      case MessageType::vertex_done:
        for (const auto& d : m.completed) {
          if (ep.merged) {
            apply_done(ep, d);
          } else {
            ep.early.push_back(d);
          }
        }
        break;
      case MessageType::epoch_done:
        ep.votes.insert(m.origin);
        check_commit(m.epoch);
        break;
      default:
        break;
    }
    kick();
  }

  std::vector<EpochStanding> standings() const {
    std::map<EpochId, Standing> s;
    EpochId horizon = max_epoch() > 8 ? max_epoch() - 8 : 0;
    for (const auto& [e, st] : decided) {
      if (e > horizon) s[e] = st;
    }
    for (auto e : in_doubt) s[e] = Standing::prepared;
    for (const auto& [e, ep] : epochs) {
      if (ep.prepared) s[e] = Standing::prepared;
    }
    std::vector<EpochStanding> out;
    for (const auto& [e, st] : s) out.push_back(EpochStanding{e, standing_code(st)});
    return out;
  }

  EpochId max_epoch() const { return max_started; }

  void reply_status(NodeId to) {
    Message m;
    m.type = MessageType::status;
    m.request = false;
    m.standings = standings();
    m.epoch_hint = max_epoch();
    send(to, std::move(m));
  }

  void on_status_request(const Message& m) {
    switch (mode) {
      case Mode::loading:
        statuses[m.origin] = m.standings;
        hints[m.origin] = m.epoch_hint;
        deferred_replies.push_back(m.origin);
        return;
      case Mode::collecting:
        reply_status(m.origin);
        statuses[m.origin] = m.standings;
        hints[m.origin] = m.epoch_hint;
        return maybe_decide();
      case Mode::replaying:
        return reply_status(m.origin);
      case Mode::normal:
        parked = true;
        if (busy) {
          deferred_replies.push_back(m.origin);
        } else {
          reply_status(m.origin);
        }
        return;
    }
  }

  void on_status_reply(const Message& m) {
    if (mode != Mode::collecting) return;
    statuses[m.origin] = m.standings;
    hints[m.origin] = m.epoch_hint;
    maybe_decide();
  }

  void undo_epoch(Epoch& ep) {
    if (!ep.merged) return;
    for (auto it = ep.exec_order.rbegin(); it != ep.exec_order.rend(); ++it) {
      undo_effect(store, ep.executed[*it].exec.effect);
    }
    ep.exec_order.clear();
  }

  void on_decision(const Message& m) {
    if (mode != Mode::normal || m.epoch_hint <= resume_applied) return;
    for (const auto& s : m.standings) {
      auto it = epochs.find(s.epoch);
      if (s.state == standing_code(Standing::committed)) {
        if (it != epochs.end() && it->second.prepared) {
          commit_epoch(s.epoch);
        } else if (!decided.count(s.epoch) && it != epochs.end() && it->second.merged) {
          throw Error(ErrorCode::recovery_fault, "commit decided for an epoch this node never prepared");
        }
      } else if (it != epochs.end()) {
        undo_epoch(it->second);
        if (it->second.prepared && logging()) log->write_marker(EpochMarker{s.epoch, MarkerKind::abort, 0});
        decided[s.epoch] = Standing::aborted;
        epochs.erase(it);
      }
    }
    for (auto it = epochs.rbegin(); it != epochs.rend(); ++it) undo_epoch(it->second);
    resume(m.epoch_hint);
  }

  void resume(EpochId r) {
    epochs.clear();
    trim_decided();
    decided_upto = r - 1;
    next_resolve = r;
    resume_applied = r;
    max_started = std::max(max_started, r - 1);
    parked = false;
    resolving = false;
    idle_since = now();
    kick();
  }

  // ---- crash and recovery ---------------------------------------------------

  void crash() {
    if (!alive) return;
    if (log) {
      if (flushing) {
        log->flush_torn(rng);
      } else {
        log->discard();
      }
    }
    alive = false;
    ++incarnation;
    c.net_->crash(id);
    store.clear();
    epochs.clear();
    session.reset();
    durable.reset();
    statuses.clear();
    hints.clear();
    deferred_replies.clear();
    decided.clear();
    in_doubt.clear();
    busy = resolving = flushing = parked = false;
    if (record < c.recoveries_.size() && c.recoveries_[record].node == id && !c.recoveries_[record].finished) {
      c.recoveries_[record].interrupted = true;
    }
    RecoveryRecord rec;
    rec.node = id;
    rec.mode = cfg().logging;
    rec.crashed = now();
    rec.committed_before_crash = c.transcript_.ids();
    c.recoveries_.push_back(std::move(rec));
    record = c.recoveries_.size() - 1;
  }

  void restart() {
    if (alive) return;
    alive = true;
    ++incarnation;
    c.net_->restart(id);
    mode = Mode::loading;
    durable = load_durable_state(cfg().log_dir, id, cfg().logging);
    log = std::make_unique<LogWriter>(cfg().log_dir, id, cfg().logging, cfg().workers);
    log->set_next_lsn(durable->next_lsn);
    auto& rec = c.recoveries_[record];
    rec.restarted = now();
    rec.watermark = durable->watermark;
    rec.report = RecoveryReport{};
    rec.report.node = id;
    rec.report.mode = cfg().logging;
    rec.report.workers = cfg().workers;
    Tick snap = durable->snapshot_records * cfg().recovery.snapshot_record;
    Tick logs = durable->log.records * cfg().recovery.log_record;
    rec.report.phases.push_back(PhaseTiming{"data_loading", snap, durable->snapshot_wall_s, durable->snapshot_records});
    rec.report.phases.push_back(PhaseTiming{"log_loading", logs, durable->log_wall_s, durable->log.records});
    for (const auto& [e, s] : durable->standings) {
      if (s == Standing::prepared) {
        in_doubt.insert(e);
      } else {
        decided[e] = s;
      }
    }
    max_started = std::max(durable->log.max_epoch, durable->watermark);
    after(snap + logs, "recovery.loaded", [this] { loaded(); });
  }

  void loaded() {
    mode = Mode::collecting;
    c.recoveries_[record].loaded = now();
    statuses[id] = standings();
    hints[id] = max_epoch();
    for (NodeId p = 0; p < n(); ++p) {
      if (p == id) continue;
      Message m;
      m.type = MessageType::status;
      m.request = true;
      m.standings = statuses[id];
      m.epoch_hint = hints[id];
      send(p, std::move(m));
    }
    for (auto r : std::exchange(deferred_replies, {})) reply_status(r);
    maybe_decide();
  }

  void maybe_decide() {
    if (mode != Mode::collecting || statuses.size() < n()) return;
    std::map<EpochId, std::pair<std::size_t, bool>> votes;  // yes votes, anyone committed
    EpochId top = 0;
    for (const auto& [node, list] : statuses) {
      for (const auto& s : list) {
        auto& v = votes[s.epoch];
        if (s.state == standing_code(Standing::prepared) || s.state == standing_code(Standing::committed)) ++v.first;
        if (s.state == standing_code(Standing::committed)) v.second = true;
        top = std::max(top, s.epoch);
      }
    }
    for (const auto& [node, h] : hints) top = std::max(top, h);
    std::vector<EpochStanding> decision;
    std::map<EpochId, bool> commits;
    for (const auto& [e, v] : votes) {
      bool commit = v.second || v.first == n();
      decision.push_back(EpochStanding{e, standing_code(commit ? Standing::committed : Standing::aborted)});
      commits[e] = commit;
    }
    EpochId resume_at = top + 1;

    // Settle this node's own in-doubt epochs durably before acting on them.
    for (auto e : in_doubt) {
      bool commit = commits.count(e) && commits[e];
      if (logging()) log->write_marker(EpochMarker{e, commit ? MarkerKind::commit : MarkerKind::abort, 0});
      decided[e] = commit ? Standing::committed : Standing::aborted;
    }
    in_doubt.clear();
    statuses.clear();
    hints.clear();

    auto& rec = c.recoveries_[record];
    auto pruned = prune_log(durable->log, durable->watermark, commits);
    rec.replayed = pruned.txns;
    store = std::move(durable->store);

    if (cfg().logging == LogMode::aries) {
      mode = Mode::replaying;
      std::vector<AriesLogRecord> records;
      records.reserve(pruned.items.size());
      for (const auto& item : pruned.items) records.push_back(std::get<AriesLogRecord>(item.payload));
      auto t0 = std::chrono::steady_clock::now();
      auto applied = serial_replay_aries(store, records);
      double wall = seconds_since(t0);
      Tick cost = applied * cfg().recovery.aries_record;
      rec.graph_vertices = applied;
      durable.reset();
      after(cost, "recovery.aries", [this, decision, resume_at, applied, cost, wall] {
        auto& r = c.recoveries_[record];
        r.report.phases.push_back(PhaseTiming{"replaying", cost, wall, applied});
        r.report.replayed = applied;
        r.recovered = now();
        r.finished = true;
        rejoin(decision, resume_at);
      });
      return;
    }
    if (cfg().logging != LogMode::none) {
      auto graph = rebuild_replay_graph(pruned, reg(), owner(), id);
      rec.graph_vertices = graph.size();
      session = std::make_unique<ReplaySession>(store, reg(), std::move(graph));
      credit = 0;
      replay_wall_s = 0;
    }
    durable.reset();
    rejoin(decision, resume_at);
    if (!session) {
      auto& r = c.recoveries_[record];
      r.recovered = now();
      r.finished = true;
      r.report.phases.push_back(PhaseTiming{"replaying", 0, 0, 0});
    } else {
      check_recovered();
    }
  }

  void rejoin(const std::vector<EpochStanding>& decision, EpochId resume_at) {
    for (NodeId p = 0; p < n(); ++p) {
      if (p == id) continue;
      Message m;
      m.type = MessageType::decision;
      m.standings = decision;
      m.epoch_hint = resume_at;
      send(p, std::move(m));
    }
    c.recoveries_[record].rejoined = now();
    mode = Mode::normal;
    resume(resume_at);
  }
};

Cluster::Cluster(SimConfig config, std::shared_ptr<const Workload> workload)
    : config_(std::move(config)), workload_(std::move(workload)) {
  validate(config_);
  if (workload_->nodes() != config_.nodes) throw Error(ErrorCode::invalid_config, "workload built for another node count");
  fs::create_directories(config_.log_dir);
  static const std::regex ours(R"(node\d+\.(w\d+\.\w+\.log|snapshot(\.tmp)?))");
  for (const auto& entry : fs::directory_iterator(config_.log_dir)) {
    if (std::regex_match(entry.path().filename().string(), ours)) fs::remove(entry.path());
  }
  net_ = std::make_unique<Network>(loop_, config_.nodes, config_.rtt, config_.message_overhead);
  net_->set_handler([this](NodeId dest, const Message& msg) { deliver(dest, msg); });
  for (NodeId i = 0; i < config_.nodes; ++i) nodes_.push_back(std::make_unique<Node>(*this, i));
  loop_.at(0, "start", [this] {
    for (auto& node : nodes_) node->kick();
  });
}

Cluster::~Cluster() = default;

void Cluster::deliver(NodeId dest, const Message& msg) {
  auto& node = *nodes_.at(dest);
  if (node.alive) node.on_message(msg);
}

bool Cluster::may_start_epoch(EpochId e) {
  if (config_.max_epochs != 0 && e > config_.max_epochs) return false;
  if (stop_after_) return e <= *stop_after_;
  if (config_.duration_s > 0 && loop_.now() >= static_cast<Tick>(config_.duration_s * kTicksPerSecond)) {
    stop_after_ = max_epoch_started();
    return e <= *stop_after_;
  }
  return true;
}

void Cluster::report_commit(const Transaction& txn, const SerialOrder& order, Tick submitted) {
  transcript_.report(txn, order, loop_.now(), submitted);
}

void Cluster::schedule_crash(Tick time, NodeId node) {
  if (node >= nodes_.size()) throw Error(ErrorCode::invalid_config, "no such node");
  loop_.at(time, "crash", [this, node] {
    if (!nodes_[node]->alive) return;
    crash(node);
    loop_.after(config_.restart_delay, "restart", [this, node] { restart(node); });
  });
}

void Cluster::crash(NodeId node) { nodes_.at(node)->crash(); }
void Cluster::restart(NodeId node) { nodes_.at(node)->restart(); }

void Cluster::run() { loop_.run(); }
void Cluster::run_until(Tick time) { loop_.run_until(time); }

bool Cluster::alive(NodeId node) const { return nodes_.at(node)->alive; }

bool Cluster::recovering(NodeId node) const {
  const auto& n = *nodes_.at(node);
  return !n.alive || n.mode != Node::Mode::normal || n.session != nullptr;
}

const Store& Cluster::store(NodeId node) const { return nodes_.at(node)->store; }

Store Cluster::combined_store() const {
  Store out;
  for (const auto& node : nodes_) {
    node->store.for_each_sorted([&](const RecordRef& ref, const Record& rec) { out.put(ref, rec); });
  }
  return out;
}

std::uint64_t Cluster::log_bytes() const {
  std::uint64_t total = 0;
  if (!fs::exists(config_.log_dir)) return 0;
  for (const auto& entry : fs::directory_iterator(config_.log_dir)) {
    if (entry.path().extension() == ".log") total += entry.file_size();
  }
  return total;
}

EpochId Cluster::max_epoch_started() const {
  EpochId top = 0;
  for (const auto& node : nodes_) top = std::max(top, node->max_started);
  return top;
}

}  // namespace depdb
