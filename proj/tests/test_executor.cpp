#include <gtest/gtest.h>

#include <random>
#include <set>

#include "depdb/coordinator.hpp"
#include "depdb/executor.hpp"
#include "fixtures.hpp"

using namespace depdb;

namespace {

const KeyOwnership kAllLocal = [](const RecordRef&) -> NodeId { return 0; };

Store serial_run(Store store, const Registry& reg, const std::vector<Transaction>& batch) {
  for (const auto& t : batch) execute_transaction(store, reg, t);
  return store;
}

}  // namespace

TEST(RunLocalEpoch, MatchesSerialExecution) {
  auto reg = fx::script_registry();
  std::mt19937_64 rng(3);
  auto keys = fx::key_names(16);
  for (int round = 0; round < 50; ++round) {
    auto base = fx::seeded_store(keys);
    auto batch = fx::random_batch(reg, rng, 1, keys, 40, 4, 0.5);
    auto expected = serial_run(base, reg, batch);
    for (unsigned workers : {1u, 3u, 8u}) {
      auto store = base;
      LocalEpochOptions opt;
      opt.workers = workers;
      auto res = run_local_epoch(store, reg, 1, batch, kAllLocal, opt);
      EXPECT_EQ(store, expected) << "workers " << workers;
      ASSERT_EQ(res.txns.size(), batch.size());
      for (const auto& o : res.txns) EXPECT_TRUE(o.committed);
      EXPECT_EQ(res.effects.size(), res.graph.size());
    }
  }
}

TEST(RunLocalEpoch, ThreadedMatchesVirtual) {
  auto reg = fx::script_registry();
  std::mt19937_64 rng(12);
  auto keys = fx::key_names(10);
  for (int round = 0; round < 30; ++round) {
    auto base = fx::seeded_store(keys);
    auto batch = fx::random_batch(reg, rng, 1, keys, 60, 4, 0.6);
    auto virt = base, real = base;
    LocalEpochOptions opt;
    opt.workers = 4;
    run_local_epoch(virt, reg, 1, batch, kAllLocal, opt);
    opt.threaded = true;
    run_local_epoch(real, reg, 1, batch, kAllLocal, opt);
    EXPECT_EQ(virt, real);
    EXPECT_EQ(real, serial_run(base, reg, batch));
  }
}

TEST(RunLocalEpoch, SpanShrinksWithIndependentWork) {
  // 64 single-key writers on distinct keys: no edges at all.
  auto reg = fx::script_registry();
  auto keys = fx::key_names(64);
  std::vector<Transaction> batch;
  for (std::uint32_t s = 0; s < 64; ++s) batch.push_back(fx::script_txn(reg, TxnId{0, 1, s}, 0, {{keys[s], AccessKind::read_write}}));
  auto store = fx::seeded_store(keys);
  LocalEpochOptions opt;
  opt.action_cost = 10;
  opt.workers = 1;
  auto one = run_local_epoch(store, reg, 1, batch, kAllLocal, opt);
  opt.workers = 8;
  auto eight = run_local_epoch(store, reg, 2, batch, kAllLocal, opt);
  EXPECT_EQ(one.span, 640u);
  EXPECT_EQ(eight.span, 80u);
}

TEST(TimeSchedules, CrossWorkerEdgeWaits) {
  DependencyGraph g;
  for (std::uint32_t i = 0; i < 2; ++i) {
    Vertex v;
    v.action.id = ActionId{TxnId{0, 1, i}, 0};
    v.action.target = fx::key("A");
    v.action.kind = AccessKind::read_write;
    v.seq = i;
    g.vertices.push_back(v);
  }
  g.add_edge(0, 1, EdgeKind::temporal);
  g.finalize();
  std::vector<Schedule> s(2);
  s[0].vertices = {1};
  s[1].vertices = {0};
  auto t = time_schedules(g, s, 5, 100);
  EXPECT_EQ(t.timing[0].start, 100u);
  EXPECT_EQ(t.timing[1].start, 105u);
  EXPECT_EQ(t.end, 110u);
  EXPECT_EQ(t.completion_order, (std::vector<std::uint32_t>{0, 1}));
}

TEST(WaveRunner, RemoteCompletionUnlocksDependents) {
  auto reg = fx::script_registry();
  auto rw = AccessKind::read_write, r = AccessKind::read;
  std::vector<Transaction> dist{
      fx::script_txn(reg, TxnId{0, 1, 13}, 0, {{"B", r}, {"C", rw}, {"F", rw}}),
      fx::script_txn(reg, TxnId{0, 1, 14}, 0, {{"D", rw}, {"E", rw}}),
      fx::script_txn(reg, TxnId{0, 1, 15}, 0, {{"A", r}, {"G", rw}}),
  };
  auto owner = fx::letter_owner();
  auto g = build_graph(1, decompose_batch(reg, dist), owner);
  std::vector<TxnMeta> metas;
  for (const auto& t : dist) metas.push_back(TxnMeta{t.id, t.procedure, t.params, t.home, t.id.seq});
  auto parts = partition_graph(g, metas, 0);
  std::vector<NodeId> origins{0, 1};
  std::vector<Subgraph> from0{parts.at(1)};
  auto merged = merge_subgraphs(Subgraph{1, 1, 1, {}, {}, {}, {}, {}}, from0, origins);
  const auto& mg = merged.graph;
  ASSERT_EQ(mg.size(), 3u);

  WaveRunner w(mg);
  EXPECT_TRUE(w.take_wave().empty());  // F, E and G all wait on node 0
  w.remote_done(ActionId{TxnId{0, 1, 13}, 1});
  auto wave = w.take_wave();
  ASSERT_EQ(wave.size(), 1u);
  EXPECT_EQ(mg.vertices[wave[0]].action.target, fx::key("F"));
  w.remote_done(ActionId{TxnId{0, 1, 14}, 0});
  w.remote_done(ActionId{TxnId{0, 1, 15}, 0});
  EXPECT_EQ(w.take_wave().size(), 2u);
  EXPECT_TRUE(w.finished());

  // On node 0 nothing waits on a remote action: one wave runs everything.
  auto local = merge_subgraphs(parts.at(0), std::vector<Subgraph>{Subgraph{1, 0, 1, {}, {}, {}, {}, {}}}, origins);
  WaveRunner w0(local.graph);
  EXPECT_EQ(w0.take_wave().size(), local.graph.size());
  EXPECT_TRUE(w0.finished());
}

TEST(WaveRunner, WavesRespectLocalEdges) {
  auto reg = fx::script_registry();
  std::mt19937_64 rng(21);
  auto keys = fx::key_names(8);
  for (int round = 0; round < 100; ++round) {
    auto batch = fx::random_batch(reg, rng, 1, keys, 20, 3, 0.7);
    auto g = build_graph(1, decompose_batch(reg, batch), kAllLocal);
    WaveRunner w(g);
    auto wave = w.take_wave();
    EXPECT_TRUE(w.finished());
    ASSERT_EQ(wave.size(), g.size());
    EXPECT_TRUE(fx::respects_edges(g, wave));
  }
}
