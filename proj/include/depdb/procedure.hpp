#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "depdb/store.hpp"
#include "depdb/types.hpp"

namespace depdb {

/// Named parameter bag. Sorted, so its encoding is canonical.
class Args {
 public:
  Args() = default;
  Args(std::initializer_list<std::pair<const std::string, Bytes>> init) : values_(init) {}

  void set(std::string name, Bytes value) { values_[std::move(name)] = std::move(value); }
  void set_u64(std::string name, std::uint64_t value);
  void set_i64(std::string name, std::int64_t value);

  bool has(std::string_view name) const { return values_.find(std::string(name)) != values_.end(); }
  /// Throws malformed_params when absent.
  const Bytes& get(std::string_view name) const;
  std::uint64_t get_u64(std::string_view name) const;
  std::int64_t get_i64(std::string_view name) const;

  void merge(const Args& other);
  bool empty() const { return values_.empty(); }
  std::size_t size() const { return values_.size(); }
  const std::map<std::string, Bytes>& values() const { return values_; }

  Bytes encode() const;
  /// Throws malformed_params on bad input.
  static Args decode(std::string_view data);

  bool operator==(const Args&) const = default;

 private:
  std::map<std::string, Bytes> values_;
};

Bytes encode_u64(std::uint64_t v);
std::uint64_t decode_u64(std::string_view b);
Bytes encode_i64(std::int64_t v);
std::int64_t decode_i64(std::string_view b);

/// One operation of a procedure on one record. `inputs` name transaction
/// context variables produced by earlier operations; at execution time they
/// are folded into `args`, which makes the executed call self-contained.
struct OpCall {
  std::string op;
  Args args;
  std::vector<std::string> inputs;

  bool operator==(const OpCall&) const = default;
};

struct Step {
  RecordRef target;
  AccessKind kind = AccessKind::read;
  OpCall call;
};

/// Record operation: reads/writes `target` through `view`; may emit context
/// variables into `out` for later operations of the same transaction.
using OpFn = std::function<void(StoreView& view, const RecordRef& target, const Args& args, Args& out)>;

/// Deterministic stored procedure: a program-ordered list of record operations
/// computed from its parameters. The declared access set is read off the plan.
struct StoredProcedure {
  std::string name;
  std::function<std::vector<Step>(const Args& params)> plan;
};

struct Access {
  RecordRef target;
  AccessKind kind = AccessKind::read;
  bool operator==(const Access&) const = default;
};

struct Transaction {
  TxnId id;
  std::string procedure;
  Bytes params;
  NodeId home = 0;
  std::vector<Access> access_set;
};

/// Consecutive operations of one transaction on one record.
struct RecordAction {
  ActionId id;
  RecordRef target;
  AccessKind kind = AccessKind::read;
  std::vector<OpCall> ops;

  bool operator==(const RecordAction&) const = default;
};

/// Transaction-local variables carried between record actions.
using TxnContext = Args;

/// Procedure and operation registry. Filled once at startup, read-only after.
class Registry {
 public:
  void register_op(const std::string& name, OpFn fn);
  void register_procedure(StoredProcedure proc);
  /// Convenience overload.
  void register_procedure(const std::string& name, std::function<std::vector<Step>(const Args&)> plan) {
    register_procedure(StoredProcedure{name, std::move(plan)});
  }

  const StoredProcedure& procedure(std::string_view name) const;
  const OpFn& op(std::string_view name) const;
  bool has_procedure(std::string_view name) const;
  std::size_t procedure_count() const { return procs_.size(); }

  std::vector<Step> plan(const Transaction& txn) const;
  /// Deduplicated access set in first-touch order.
  std::vector<Access> declared_access(std::string_view procedure, const Bytes& params) const;

  /// Fill in `txn.access_set` from the declared access function.
  void resolve(Transaction& txn) const;

 private:
  std::unordered_map<std::string, StoredProcedure> procs_;
  std::unordered_map<std::string, OpFn> ops_;
};

std::vector<RecordAction> decompose_transaction(const Registry& registry, const Transaction& txn);

/// Result of executing one record action.
struct ExecutedAction {
  ActionEffect effect;
  /// The op calls with all inputs resolved: replaying these against the same
  /// pre-state reproduces the effect without the transaction context.
  std::vector<OpCall> fragment;
};

/// Execute one record action against `store`, reading and extending `ctx`.
ExecutedAction apply_action(Store& store, const Registry& registry, const RecordAction& action, TxnContext& ctx);

/// Replay a resolved fragment (no context needed).
ActionEffect replay_fragment(Store& store, const Registry& registry, const RecordRef& target, AccessKind kind,
                             const std::vector<OpCall>& fragment);

/// Run a whole transaction serially; the reference path for oracles and
/// coarse-grained replay.
std::vector<ExecutedAction> execute_transaction(Store& store, const Registry& registry, const Transaction& txn);

/// Run the procedure body through an arbitrary view (for instrumentation).
void run_procedure(StoreView& view, const Registry& registry, const Transaction& txn);

}  // namespace depdb
