#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "depdb/procedure.hpp"
#include "depdb/store.hpp"
#include "depdb/types.hpp"

namespace depdb {

/// Zipf over ranks 1..n with P(k) = k^-theta / H(n, theta), sampled by
/// binary search over the cumulative table.
class ZipfSampler {
 public:
  ZipfSampler(double theta, std::uint64_t n);
  std::uint64_t sample(std::mt19937_64& rng) const;
  double pmf(std::uint64_t rank) const;
  std::uint64_t n() const { return cdf_.size(); }

 private:
  double theta_;
  double norm_;
  std::vector<double> cdf_;
};

std::uint64_t zipf_sample(double theta, std::uint64_t n, std::mt19937_64& rng);

enum class WorkloadKind : std::uint8_t { ycsb, tpcc };

struct WorkloadConfig {
  WorkloadKind kind = WorkloadKind::ycsb;
  // ycsb
  double theta = 0.6;
  std::uint64_t keys = 10000;  // whole cluster
  unsigned ops_per_txn = 10;
  double read_ratio = 0.5;
  unsigned columns = 10;
  unsigned value_size = 100;
  // tpcc
  unsigned warehouses = 4;  // whole cluster
  unsigned districts = 10;
  unsigned customers = 30;  // per district
  unsigned items = 1000;
  // both
  std::size_t batch_size = 100;  // per node per epoch
  double dist_pct = 0;
  std::uint64_t seed = 1;
};

/// Records are keyed with an 8-byte partition id first; the owner is that id
/// modulo the node count.
Bytes partition_key(std::uint64_t partition, std::initializer_list<std::uint32_t> rest = {});
KeyOwnership partition_ownership(std::size_t nodes);

class Workload {
 public:
  virtual ~Workload() = default;

  const Registry& registry() const { return registry_; }
  const WorkloadConfig& config() const { return config_; }
  std::size_t nodes() const { return nodes_; }
  const KeyOwnership& ownership() const { return owner_; }

  /// Insert the initial records owned by `node`.
  virtual void populate(Store& store, NodeId node) const = 0;
  /// Pure function of (config, node, epoch, count): the batch a node issues.
  virtual std::vector<Transaction> generate(NodeId node, EpochId epoch, std::size_t count) const = 0;

 protected:
  Workload(const WorkloadConfig& config, std::size_t nodes);
  Transaction make_txn(NodeId node, EpochId epoch, std::uint32_t seq, std::string procedure, const Args& params) const;
  std::mt19937_64 rng_for(NodeId node, EpochId epoch, std::uint64_t salt = 0) const;

  WorkloadConfig config_;
  std::size_t nodes_;
  KeyOwnership owner_;
  Registry registry_;
};

class YcsbWorkload final : public Workload {
 public:
  YcsbWorkload(const WorkloadConfig& config, std::size_t nodes);
  void populate(Store& store, NodeId node) const override;
  std::vector<Transaction> generate(NodeId node, EpochId epoch, std::size_t count) const override;

  std::uint64_t keys_per_node() const { return keys_per_node_; }
  /// Global key id of a node's rank-th hottest key (rank from 1).
  std::uint64_t key_id(NodeId node, std::uint64_t rank) const { return (rank - 1) * nodes_ + node; }
  static RecordRef record(std::uint64_t id);

 private:
  std::uint64_t keys_per_node_;
  ZipfSampler zipf_;
};

inline constexpr const char* kTpccProcedures[] = {"new_order", "payment", "delivery", "order_status", "stock_level"};

class TpccWorkload final : public Workload {
 public:
  TpccWorkload(const WorkloadConfig& config, std::size_t nodes);
  void populate(Store& store, NodeId node) const override;
  std::vector<Transaction> generate(NodeId node, EpochId epoch, std::size_t count) const override;

  /// Warehouses whose records live on `node`.
  std::vector<std::uint32_t> warehouses_of(NodeId node) const;
  /// The shuffled 44/45/4/4/3 mix deck of one block of 100 transactions.
  std::vector<std::uint8_t> mix_block(NodeId node, std::uint64_t block) const;

  static RecordRef warehouse(std::uint32_t w);
  static RecordRef district(std::uint32_t w, std::uint32_t d);
  static RecordRef customer(std::uint32_t w, std::uint32_t d, std::uint32_t c);
  static RecordRef stock(std::uint32_t w, std::uint32_t i);
  static RecordRef order(std::uint32_t w, std::uint32_t d, std::uint64_t o);
  static RecordRef order_line(std::uint32_t w, std::uint32_t d, std::uint64_t o, std::uint32_t line);

 private:
  std::vector<Transaction> generate_impl(NodeId node, EpochId epoch, std::size_t count, bool resolve_delivery) const;
};

std::unique_ptr<Workload> make_workload(const WorkloadConfig& config, std::size_t nodes);

}  // namespace depdb
