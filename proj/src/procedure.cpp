#include "depdb/procedure.hpp"

#include "depdb/codec.hpp"

namespace depdb {

Bytes encode_u64(std::uint64_t v) {
  ByteWriter w;
  w.u64(v);
  return w.take();
}

std::uint64_t decode_u64(std::string_view b) {
  if (b.size() != 8) throw Error(ErrorCode::malformed_params, "expected 8-byte integer");
  ByteReader r(b);
  return r.u64();
}

Bytes encode_i64(std::int64_t v) { return encode_u64(static_cast<std::uint64_t>(v)); }
std::int64_t decode_i64(std::string_view b) { return static_cast<std::int64_t>(decode_u64(b)); }

void Args::set_u64(std::string name, std::uint64_t value) { set(std::move(name), encode_u64(value)); }
void Args::set_i64(std::string name, std::int64_t value) { set(std::move(name), encode_i64(value)); }

const Bytes& Args::get(std::string_view name) const {
  auto it = values_.find(std::string(name));
  if (it == values_.end()) throw Error(ErrorCode::malformed_params, "missing parameter '" + std::string(name) + "'");
  return it->second;
}

std::uint64_t Args::get_u64(std::string_view name) const { return decode_u64(get(name)); }
std::int64_t Args::get_i64(std::string_view name) const { return decode_i64(get(name)); }

void Args::merge(const Args& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

Bytes Args::encode() const {
  ByteWriter w;
  w.u16(static_cast<std::uint16_t>(values_.size()));
  for (const auto& [k, v] : values_) {
    w.name(k);
    w.bytes(v);
  }
  return w.take();
}

Args Args::decode(std::string_view data) {
  try {
    Args out;
    ByteReader r(data);
    auto n = r.u16();
    for (std::uint16_t i = 0; i < n; ++i) {
      auto k = r.name();
      out.values_[std::move(k)] = r.bytes();
    }
    r.expect_done();
    return out;
  } catch (const Error& e) {
    throw Error(ErrorCode::malformed_params, e.what());
  }
}

void Registry::register_op(const std::string& name, OpFn fn) {
  if (!ops_.emplace(name, std::move(fn)).second) {
    throw Error(ErrorCode::duplicate_name, "operation '" + name + "'");
  }
}

void Registry::register_procedure(StoredProcedure proc) {
  auto name = proc.name;
  if (!procs_.emplace(name, std::move(proc)).second) {
    throw Error(ErrorCode::duplicate_name, "procedure '" + name + "'");
  }
}

bool Registry::has_procedure(std::string_view name) const { return procs_.count(std::string(name)) > 0; }

const StoredProcedure& Registry::procedure(std::string_view name) const {
  auto it = procs_.find(std::string(name));
  if (it == procs_.end()) throw Error(ErrorCode::procedure_not_found, std::string(name));
  return it->second;
}

const OpFn& Registry::op(std::string_view name) const {
  auto it = ops_.find(std::string(name));
  if (it == ops_.end()) throw Error(ErrorCode::procedure_not_found, "operation '" + std::string(name) + "'");
  return it->second;
}

std::vector<Step> Registry::plan(const Transaction& txn) const {
  const auto& proc = procedure(txn.procedure);
  Args params = Args::decode(txn.params);
  return proc.plan(params);
}

std::vector<Access> Registry::declared_access(std::string_view procedure_name, const Bytes& params) const {
  const auto& proc = procedure(procedure_name);
  std::vector<Access> out;
  for (const auto& step : proc.plan(Args::decode(params))) {
    bool merged = false;
    for (auto& a : out) {
      if (a.target == step.target) {
        a.kind = merge_kinds(a.kind, step.kind);
        merged = true;
        break;
      }
    }
    if (!merged) out.push_back(Access{step.target, step.kind});
  }
  return out;
}

void Registry::resolve(Transaction& txn) const { txn.access_set = declared_access(txn.procedure, txn.params); }

std::vector<RecordAction> decompose_transaction(const Registry& registry, const Transaction& txn) {
  std::vector<RecordAction> actions;
  for (auto& step : registry.plan(txn)) {
    RecordAction* slot = nullptr;
    for (auto& a : actions) {
      if (a.target == step.target) {
        slot = &a;
        break;
      }
    }
    if (slot == nullptr) {
      RecordAction a;
      a.id = ActionId{txn.id, static_cast<std::uint16_t>(actions.size())};
      a.target = std::move(step.target);
      a.kind = step.kind;
      actions.push_back(std::move(a));
      slot = &actions.back();
    } else {
      slot->kind = merge_kinds(slot->kind, step.kind);
    }
    slot->ops.push_back(std::move(step.call));
  }
  return actions;
}

namespace {

ActionEffect run_calls(Store& store, const Registry& registry, const RecordRef& target, AccessKind kind,
                       const std::vector<OpCall>& calls, TxnContext* ctx, std::vector<OpCall>* resolved) {
  ActionEffect effect;
  effect.target = target;
  effect.kind = kind;

  // Existence is the operations' business: strict ones go through
  // StoreView::require, tolerant ones may leave a missing record alone.
  const Record* existing = store.find(target);
  ColumnImage snapshot;
  if (existing != nullptr) {
    snapshot = existing->columns;
    effect.version_before = existing->version;
  }
  effect.created = existing == nullptr;

  DirectView view(store);
  for (const auto& call : calls) {
    Args args = call.args;
    for (const auto& in : call.inputs) {
      if (ctx == nullptr) throw Error(ErrorCode::malformed_params, "unresolved input '" + in + "'");
      args.set(in, ctx->get(in));
    }
    Args out;
    registry.op(call.op)(view, target, args, out);
    if (ctx != nullptr) ctx->merge(out);
    if (resolved != nullptr) resolved->push_back(OpCall{call.op, std::move(args), {}});
  }

  Record* after = store.find(target);
  if (after == nullptr) {
    if (!effect.created) throw Error(ErrorCode::record_not_found, "record vanished at " + to_string(target));
    effect.created = false;
    return effect;
  }
  if (effect.created) {
    effect.after = after->columns;
    after->version = 1;
  } else {
    diff_columns(snapshot, after->columns, effect.before, effect.after);
    if (is_write(kind)) after->version = effect.version_before + 1;
  }
  effect.version_after = after->version;
  return effect;
}

}  // namespace

ExecutedAction apply_action(Store& store, const Registry& registry, const RecordAction& action, TxnContext& ctx) {
  ExecutedAction out;
  out.effect = run_calls(store, registry, action.target, action.kind, action.ops, &ctx, &out.fragment);
  return out;
}

ActionEffect replay_fragment(Store& store, const Registry& registry, const RecordRef& target, AccessKind kind,
                             const std::vector<OpCall>& fragment) {
  return run_calls(store, registry, target, kind, fragment, nullptr, nullptr);
}

std::vector<ExecutedAction> execute_transaction(Store& store, const Registry& registry, const Transaction& txn) {
  TxnContext ctx;
  std::vector<ExecutedAction> out;
  for (const auto& action : decompose_transaction(registry, txn)) {
    out.push_back(apply_action(store, registry, action, ctx));
  }
  return out;
}

void run_procedure(StoreView& view, const Registry& registry, const Transaction& txn) {
  TxnContext ctx;
  for (const auto& step : registry.plan(txn)) {
    Args args = step.call.args;
    for (const auto& in : step.call.inputs) args.set(in, ctx.get(in));
    Args out;
    registry.op(step.call.op)(view, step.target, args, out);
    ctx.merge(out);
  }
}

}  // namespace depdb
