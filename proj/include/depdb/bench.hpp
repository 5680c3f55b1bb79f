#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "depdb/cluster.hpp"

namespace depdb {

struct ThroughputSample {
  double time_s = 0;
  /// Committed transactions per simulated second within the bucket.
  double throughput = 0;
  /// Commit latency of the bucket's transactions, simulated microseconds.
  double p50_latency = 0;
  double p99_latency = 0;
};

struct Metrics {
  std::string mode;
  double dist_pct = 0;
  std::vector<ThroughputSample> series;
  /// Per committed transaction, submission to first commit report (µs).
  std::vector<Tick> latencies;
  std::vector<RecoveryReport> recoveries;
  std::uint64_t log_bytes = 0;
  MessageCounts messages;
  std::uint64_t committed = 0;
  std::uint64_t submitted = 0;
  double sim_seconds = 0;
  double wall_seconds = 0;
  bool oracle_checked = false;
  bool oracle_ok = true;
  /// Invariant violations found after the run; empty when everything held.
  std::vector<std::string> violations;
};

struct BenchOptions {
  SimConfig config;
  /// Crash at this simulated second; the node is drawn from the seed when
  /// not given.
  std::optional<double> fail_at;
  std::optional<NodeId> fail_node;
  /// Width of a throughput bucket in simulated seconds.
  double bucket_s = 0.01;
  bool check_oracle = true;
  /// Compare every k-th record against the serial oracle (1 = all).
  std::uint64_t oracle_stride = 1;
};

Metrics run_experiment(const BenchOptions& options);

/// Percentile by nearest rank; 0 for an empty sample.
double percentile(std::vector<Tick> values, double p);

inline constexpr const char* kCsvHeader = "time_s,throughput,p50_latency,p99_latency,mode,dist_pct";
std::string metrics_csv(const Metrics& metrics);
std::string recovery_json_lines(const Metrics& metrics);

struct ModeSummary {
  LogMode mode = LogMode::none;
  std::uint64_t log_bytes = 0;
  double throughput = 0;
  std::uint64_t committed = 0;
  /// Full replay of node 0's log on real threads: (workers, replay wall seconds).
  std::vector<std::pair<unsigned, double>> replay_wall;
  /// Simulated replay makespan per worker count.
  std::vector<std::pair<unsigned, std::uint64_t>> replay_sim;
};

/// The same seed and scenario under every logging mode.
std::vector<ModeSummary> compare_modes(const BenchOptions& options, const std::vector<unsigned>& worker_counts = {1, 8});
std::string modes_table(const std::vector<ModeSummary>& rows);

}  // namespace depdb
