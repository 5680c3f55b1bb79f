#include <gtest/gtest.h>

#include <random>
#include <set>

#include "depdb/workload.hpp"
#include "fixtures.hpp"

using namespace depdb;

namespace {

std::set<std::pair<RecordRef, AccessKind>> touched_set(const InstrumentedView& v) {
  return {v.touched().begin(), v.touched().end()};
}

// Full-row diff, independent of diff_columns: every column whose value
// differs between the two rows, plus columns only present afterwards.
ColumnImage full_row_diff_after(const Record& before, const Record& after) {
  ColumnImage out;
  for (const auto& [name, value] : after.columns) {
    const Bytes* old = before.get(name);
    if (old == nullptr || *old != value) out.emplace_back(name, value);
  }
  return out;
}

}  // namespace

TEST(Decompose, ReadBUpdateCAndF) {
  auto reg = fx::script_registry();
  auto t13 = fx::script_txn(reg, TxnId{0, 1, 13}, 0,
                            {{"B", AccessKind::read}, {"C", AccessKind::read_write}, {"F", AccessKind::read_write}});
  auto actions = decompose_transaction(reg, t13);
  ASSERT_EQ(actions.size(), 3u);
  EXPECT_EQ(actions[0].target, fx::key("B"));
  EXPECT_EQ(actions[0].kind, AccessKind::read);
  EXPECT_EQ(actions[1].target, fx::key("C"));
  EXPECT_TRUE(is_write(actions[1].kind));
  EXPECT_EQ(actions[2].target, fx::key("F"));
  EXPECT_TRUE(is_write(actions[2].kind));
  for (std::uint16_t i = 0; i < 3; ++i) EXPECT_EQ(actions[i].id.index, i);
}

TEST(Decompose, ReadThenWriteCollapsesToOneAction) {
  auto reg = fx::script_registry();
  auto t = fx::script_txn(reg, TxnId{0, 1, 0}, 0, {{"A", AccessKind::read}, {"A", AccessKind::read_write}});
  auto actions = decompose_transaction(reg, t);
  ASSERT_EQ(actions.size(), 1u);
  EXPECT_EQ(actions[0].kind, AccessKind::read_write);
  EXPECT_EQ(actions[0].ops.size(), 2u);
}

TEST(Decompose, UnknownProcedureAndBadParams) {
  auto reg = fx::script_registry();
  Transaction t{TxnId{0, 1, 0}, "nope", "", 0, {}};
  try {
    decompose_transaction(reg, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::procedure_not_found);
  }
  t.procedure = "script";
  t.params = "\x01garbage";
  try {
    decompose_transaction(reg, t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::malformed_params);
  }
}

TEST(Decompose, YcsbActionsMatchInstrumentedTouchSet) {
  WorkloadConfig cfg;
  cfg.keys = 2000;
  cfg.dist_pct = 30;
  auto w = make_workload(cfg, 4);
  for (NodeId n = 0; n < 4; ++n) {
    Store store;
    for (NodeId m = 0; m < 4; ++m) w->populate(store, m);
    for (const auto& txn : w->generate(n, 3, 50)) {
      auto actions = decompose_transaction(w->registry(), txn);
      DirectView direct(store);
      InstrumentedView view(direct);
      run_procedure(view, w->registry(), txn);
      std::set<std::pair<RecordRef, AccessKind>> from_actions;
      for (const auto& a : actions) from_actions.emplace(a.target, a.kind);
      EXPECT_EQ(from_actions, touched_set(view));
      EXPECT_EQ(actions.size(), view.touched().size());
      EXPECT_EQ(actions.size(), 10u);
    }
  }
}

TEST(ApplyAction, WriteReportsChangedColumnsAndBumpsVersion) {
  Registry reg;
  reg.register_op("set_c", [](StoreView& v, const RecordRef& t, const Args& a, Args&) { v.write(t, "c", a.get("c")); });
  Store store;
  Record rec;
  rec.set("c", "3");
  rec.set("d", "x");
  store.put(fx::key("r"), rec);
  RecordAction action{ActionId{TxnId{0, 1, 0}, 0}, fx::key("r"), AccessKind::write, {OpCall{"set_c", Args{{"c", "5"}}, {}}}};
  TxnContext ctx;
  auto ex = apply_action(store, reg, action, ctx);
  EXPECT_EQ(ex.effect.before, (ColumnImage{{"c", "3"}}));
  EXPECT_EQ(ex.effect.after, (ColumnImage{{"c", "5"}}));
  EXPECT_EQ(ex.effect.version_after, ex.effect.version_before + 1);
  EXPECT_EQ(store.find(fx::key("r"))->version, rec.version + 1);
}

TEST(ApplyAction, PureReadLeavesNoImages) {
  auto reg = fx::script_registry();
  auto store = fx::seeded_store({"A"});
  RecordAction action{ActionId{TxnId{0, 1, 0}, 0}, fx::key("A"), AccessKind::read, {OpCall{"read", {}, {}}}};
  TxnContext ctx;
  auto ex = apply_action(store, reg, action, ctx);
  EXPECT_TRUE(ex.effect.before.empty());
  EXPECT_TRUE(ex.effect.after.empty());
  EXPECT_EQ(ex.effect.version_after, ex.effect.version_before);
  EXPECT_EQ(ctx.get("seen"), "A");
}

TEST(ApplyAction, MissingRecordIsAnError) {
  auto reg = fx::script_registry();
  Store store;
  RecordAction action{ActionId{TxnId{0, 1, 0}, 0}, fx::key("A"), AccessKind::read, {OpCall{"read", {}, {}}}};
  TxnContext ctx;
  try {
    apply_action(store, reg, action, ctx);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::record_not_found);
  }
}

TEST(ApplyAction, PaymentImagesMatchFullRowDiff) {
  WorkloadConfig cfg;
  cfg.kind = WorkloadKind::tpcc;
  cfg.warehouses = 2;
  auto w = make_workload(cfg, 1);
  Store store;
  w->populate(store, 0);
  int payments = 0;
  for (const auto& txn : w->generate(0, 1, 200)) {
    if (txn.procedure != "payment") continue;
    ++payments;
    TxnContext ctx;
    for (const auto& action : decompose_transaction(w->registry(), txn)) {
      Record before = *store.find(action.target);
      auto ex = apply_action(store, w->registry(), action, ctx);
      const Record& after = *store.find(action.target);
      EXPECT_EQ(ex.effect.after, full_row_diff_after(before, after));
      for (const auto& [name, value] : ex.effect.before) EXPECT_EQ(*before.get(name), value);
      if (action.target.table == "warehouse") {
        ASSERT_EQ(ex.effect.after.size(), 1u);
        EXPECT_EQ(ex.effect.after[0].first, "ytd");
      }
    }
  }
  EXPECT_GT(payments, 50);
}

TEST(ApplyAction, UndoIsIdentity) {
  auto reg = fx::script_registry();
  std::mt19937_64 rng(7);
  auto keys = fx::key_names(6);
  auto store = fx::seeded_store(keys);
  const auto original = store;
  for (const auto& txn : fx::random_batch(reg, rng, 1, keys, 30)) {
    auto snapshot = store;
    auto executed = execute_transaction(store, reg, txn);
    for (auto it = executed.rbegin(); it != executed.rend(); ++it) undo_effect(store, it->effect);
    EXPECT_EQ(store, snapshot);
    execute_transaction(store, reg, txn);
  }
  EXPECT_FALSE(store == original);
}

TEST(ApplyAction, ReplayIsDeterministic) {
  WorkloadConfig cfg;
  cfg.kind = WorkloadKind::tpcc;
  cfg.warehouses = 2;
  auto w = make_workload(cfg, 2);
  Store base;
  w->populate(base, 0);
  w->populate(base, 1);
  auto batch = w->generate(0, 1, 100);
  Store a = base, b = base;
  for (const auto& t : batch) {
    auto ea = execute_transaction(a, w->registry(), t);
    auto eb = execute_transaction(b, w->registry(), t);
    ASSERT_EQ(ea.size(), eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) EXPECT_EQ(ea[i].effect, eb[i].effect);
  }
  EXPECT_EQ(a.serialize(), b.serialize());
}

TEST(ApplyAction, FragmentReplayReproducesEffect) {
  auto reg = fx::script_registry();
  std::mt19937_64 rng(11);
  auto keys = fx::key_names(5);
  auto live = fx::seeded_store(keys);
  auto replica = live;
  for (const auto& txn : fx::random_batch(reg, rng, 1, keys, 20)) {
    for (const auto& ex : execute_transaction(live, reg, txn)) {
      auto again = replay_fragment(replica, reg, ex.effect.target, ex.effect.kind, ex.fragment);
      EXPECT_EQ(again.after, ex.effect.after);
    }
  }
  EXPECT_EQ(live, replica);
}

TEST(Registry, DuplicateNamesRejected) {
  auto reg = fx::script_registry();
  try {
    reg.register_procedure("script", [](const Args&) { return std::vector<Step>{}; });
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::duplicate_name);
  }
  EXPECT_THROW(reg.register_op("read", [](StoreView&, const RecordRef&, const Args&, Args&) {}), Error);
}

TEST(Registry, TpccProceduresResolvable) {
  WorkloadConfig cfg;
  cfg.kind = WorkloadKind::tpcc;
  auto w = make_workload(cfg, 1);
  for (const char* name : kTpccProcedures) EXPECT_TRUE(w->registry().has_procedure(name)) << name;
  EXPECT_EQ(w->registry().procedure_count(), 5u);
}

TEST(Args, EncodingRoundTripsAndIsCanonical) {
  Args a;
  a.set("z", "1");
  a.set_u64("a", 42);
  a.set_i64("m", -7);
  Args b;
  b.set_i64("m", -7);
  b.set("z", "1");
  b.set_u64("a", 42);
  EXPECT_EQ(a.encode(), b.encode());
  auto c = Args::decode(a.encode());
  EXPECT_EQ(c, a);
  EXPECT_EQ(c.get_u64("a"), 42u);
  EXPECT_EQ(c.get_i64("m"), -7);
  EXPECT_THROW(Args::decode(a.encode().substr(0, 5)), Error);
}

TEST(Store, SerializeRoundTripAndOrderIndependence) {
  Store a, b;
  for (int i = 0; i < 100; ++i) {
    Record r;
    r.set("v", std::to_string(i));
    r.version = i;
    a.put(fx::key("k" + std::to_string(i)), r);
  }
  for (int i = 99; i >= 0; --i) {
    Record r;
    r.set("v", std::to_string(i));
    r.version = i;
    b.put(fx::key("k" + std::to_string(i)), r);
  }
  EXPECT_EQ(a.serialize(), b.serialize());
  EXPECT_EQ(Store::deserialize(a.serialize()), a);
}
