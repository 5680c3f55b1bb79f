#pragma once

// Shared helpers: a tiny key-value schema with a scripted procedure, so tests
// can spell out transactions as lists of (key, access) steps.

#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "depdb/depgraph.hpp"
#include "depdb/procedure.hpp"
#include "depdb/store.hpp"

namespace fx {

using namespace depdb;

using Steps = std::vector<std::pair<std::string, AccessKind>>;

inline RecordRef key(const std::string& k) { return RecordRef{"kv", k}; }

/// "script" runs its steps in order: reads record the value into the
/// context, writes append the transaction tag to the value (so the final
/// value spells out the order writers ran in).
inline Registry script_registry() {
  Registry r;
  r.register_op("read", [](StoreView& view, const RecordRef& target, const Args&, Args& out) {
    out.set("seen", *view.require(target).get("v"));
  });
  r.register_op("append", [](StoreView& view, const RecordRef& target, const Args& args, Args&) {
    auto old = *view.require(target).get("v");
    view.write(target, "v", old + "." + args.get("tag"));
  });
  r.register_procedure("script", [](const Args& params) {
    std::vector<Step> steps;
    auto n = params.get_u64("n");
    for (std::uint64_t i = 0; i < n; ++i) {
      auto idx = std::to_string(i);
      auto kind = static_cast<AccessKind>(params.get_u64("a" + idx));
      Step s;
      s.target = key(params.get("k" + idx));
      s.kind = kind;
      s.call.op = is_write(kind) ? "append" : "read";
      if (is_write(kind)) s.call.args.set("tag", params.get("tag"));
      steps.push_back(std::move(s));
    }
    return steps;
  });
  return r;
}

inline Transaction script_txn(const Registry& reg, TxnId id, NodeId home, const Steps& steps) {
  Args p;
  p.set_u64("n", steps.size());
  p.set("tag", to_string(id));
  for (std::size_t i = 0; i < steps.size(); ++i) {
    p.set("k" + std::to_string(i), steps[i].first);
    p.set_u64("a" + std::to_string(i), static_cast<std::uint64_t>(steps[i].second));
  }
  Transaction t{id, "script", p.encode(), home, {}};
  reg.resolve(t);
  return t;
}

/// Keys A-D live on node 0, E-H on node 1; anything else by first character
/// modulo `nodes`.
inline KeyOwnership letter_owner(std::size_t nodes = 2) {
  return [nodes](const RecordRef& ref) -> NodeId {
    char c = ref.key.empty() ? 'A' : ref.key[0];
    if (c >= 'A' && c <= 'D') return 0;
    if (c >= 'E' && c <= 'H') return 1 % nodes;
    return static_cast<NodeId>(static_cast<unsigned char>(c) % nodes);
  };
}

inline Store seeded_store(const std::vector<std::string>& keys) {
  Store s;
  for (const auto& k : keys) {
    Record r;
    r.set("v", k);
    s.put(key(k), r);
  }
  return s;
}

inline std::vector<std::string> key_names(std::size_t n, char first = 'k') {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(1, first) + std::to_string(i));
  return out;
}

/// A random single-epoch batch over `keys` with 1..max_steps distinct keys
/// per transaction.
inline std::vector<Transaction> random_batch(const Registry& reg, std::mt19937_64& rng, EpochId epoch,
                                             const std::vector<std::string>& keys, std::size_t txns,
                                             std::size_t max_steps = 4, double write_p = 0.5, NodeId home = 0) {
  std::vector<Transaction> out;
  for (std::uint32_t s = 0; s < txns; ++s) {
    std::size_t n = 1 + rng() % std::min(max_steps, keys.size());
    std::vector<std::string> pool = keys;
    std::shuffle(pool.begin(), pool.end(), rng);
    Steps steps;
    for (std::size_t i = 0; i < n; ++i) {
      bool w = std::uniform_real_distribution<double>(0, 1)(rng) < write_p;
      steps.emplace_back(pool[i], w ? AccessKind::read_write : AccessKind::read);
    }
    out.push_back(script_txn(reg, TxnId{home, epoch, s}, home, steps));
  }
  return out;
}

/// Independent topological check: every edge goes forward in `order`.
inline bool respects_edges(const DependencyGraph& g, const std::vector<std::uint32_t>& order) {
  std::vector<std::size_t> pos(g.size(), SIZE_MAX);
  for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  for (const auto& e : g.edges()) {
    if (pos[e.from] == SIZE_MAX || pos[e.to] == SIZE_MAX) continue;
    if (pos[e.from] >= pos[e.to]) return false;
  }
  return true;
}

}  // namespace fx
