#include "depdb/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include <fmt/format.h>

namespace depdb {

double percentile(std::vector<Tick> values, double p) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return static_cast<double>(values[rank - 1]);
}

namespace {

bool oracle_matches(const Store& expected, const Store& actual, std::uint64_t stride, std::string& why) {
  if (expected.size() != actual.size()) {
    why = fmt::format("record count {} != oracle {}", actual.size(), expected.size());
    return false;
  }
  std::uint64_t i = 0;
  bool ok = true;
  expected.for_each_sorted([&](const RecordRef& ref, const Record& rec) {
    if (!ok || i++ % stride != 0) return;
    const auto* got = actual.find(ref);
    if (got == nullptr || !(*got == rec)) {
      why = "record differs from the serial oracle (table " + ref.table + ")";
      ok = false;
    }
  });
  return ok;
}

}  // namespace

Metrics run_experiment(const BenchOptions& options) {
  auto config = options.config;
  config.workload.batch_size = config.batch_size;
  config.workload.seed = config.seed;
  auto wall0 = std::chrono::steady_clock::now();
  std::shared_ptr<const Workload> workload = make_workload(config.workload, config.nodes);
  Cluster cluster(config, workload);

  if (options.fail_at) {
    NodeId node = options.fail_node.value_or(0);
    if (!options.fail_node) {
      std::mt19937_64 rng(config.seed ^ 0x5eedfa11ULL);
      node = static_cast<NodeId>(rng() % config.nodes);
    }
    cluster.schedule_crash(static_cast<Tick>(*options.fail_at * kTicksPerSecond), node);
  }
  cluster.run();

  Metrics m;
  m.mode = std::string(to_string(config.logging));
  m.dist_pct = config.workload.dist_pct;
  m.log_bytes = cluster.log_bytes();
  m.messages = cluster.network().counts();
  m.committed = cluster.transcript().size();
  m.submitted = cluster.submitted();
  Tick end = cluster.loop().now();
  m.sim_seconds = static_cast<double>(end) / kTicksPerSecond;

  auto bucket = std::max<Tick>(1, static_cast<Tick>(options.bucket_s * kTicksPerSecond));
  std::vector<std::vector<Tick>> per_bucket(end / bucket + 1);
  for (const auto& [order, entry] : cluster.transcript().entries()) {
    Tick latency = entry.committed - entry.submitted;
    m.latencies.push_back(latency);
    per_bucket[entry.committed / bucket].push_back(latency);
  }
  for (std::size_t b = 0; b < per_bucket.size(); ++b) {
    ThroughputSample s;
    s.time_s = static_cast<double>(b * bucket) / kTicksPerSecond;
    s.throughput = static_cast<double>(per_bucket[b].size()) / options.bucket_s;
    s.p50_latency = percentile(per_bucket[b], 50);
    s.p99_latency = percentile(per_bucket[b], 99);
    m.series.push_back(s);
  }

  if (m.committed > m.submitted) m.violations.push_back("more transactions committed than submitted");
  const auto ids = cluster.transcript().ids();
  for (const auto& rec : cluster.recoveries()) {
    m.recoveries.push_back(rec.report);
    if (!rec.finished && !rec.interrupted) m.violations.push_back(fmt::format("node {} never finished recovering", rec.node));
    for (const auto& t : rec.replayed) {
      if (!ids.count(t)) {
        m.violations.push_back(fmt::format("node {} replayed an uncommitted transaction", rec.node));
        break;
      }
    }
  }
  // Without a log a crash loses state by design; the oracle does not apply.
  bool lossy = config.logging == LogMode::none && !cluster.recoveries().empty();
  if (options.check_oracle && !lossy) {
    m.oracle_checked = true;
    auto expected = serial_oracle(*workload, cluster.transcript().serial_order());
    std::string why;
    m.oracle_ok = oracle_matches(expected, cluster.combined_store(), std::max<std::uint64_t>(1, options.oracle_stride), why);
    if (!m.oracle_ok) m.violations.push_back("serializability oracle: " + why);
  }
  m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return m;
}

std::string metrics_csv(const Metrics& m) {
  std::string out = kCsvHeader;
  out += '\n';
  for (const auto& s : m.series) {
    out += fmt::format("{:.3f},{:.1f},{:.0f},{:.0f},{},{:g}\n", s.time_s, s.throughput, s.p50_latency, s.p99_latency,
                       m.mode, m.dist_pct);
  }
  return out;
}

std::string recovery_json_lines(const Metrics& m) {
  std::string out;
  for (const auto& r : m.recoveries) out += r.json_lines();
  return out;
}

std::vector<ModeSummary> compare_modes(const BenchOptions& options, const std::vector<unsigned>& worker_counts) {
  std::vector<ModeSummary> rows;
  auto base = options.config.log_dir;
  for (auto mode : {LogMode::none, LogMode::fine, LogMode::coarse, LogMode::aries}) {
    auto opts = options;
    opts.config.logging = mode;
    opts.config.log_dir = base / std::string(to_string(mode));
    auto m = run_experiment(opts);
    ModeSummary row;
    row.mode = mode;
    row.log_bytes = m.log_bytes;
    row.committed = m.committed;
    row.throughput = m.sim_seconds > 0 ? static_cast<double>(m.committed) / m.sim_seconds : 0;
    if (mode != LogMode::none) {
      auto cfg = opts.config;
      cfg.workload.batch_size = cfg.batch_size;
      cfg.workload.seed = cfg.seed;
      auto workload = make_workload(cfg.workload, cfg.nodes);
      for (auto w : worker_counts) {
        RecoveryOptions ro;
        ro.mode = mode;
        ro.workers = w;
        ro.threaded = true;
        ro.costs = cfg.recovery;
        auto res = recover_node(opts.config.log_dir, 0, workload->registry(), workload->ownership(), ro);
        const auto& replay = res.report.phases.back();
        row.replay_wall.emplace_back(w, replay.wall_s);
        row.replay_sim.emplace_back(w, replay.sim);
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string modes_table(const std::vector<ModeSummary>& rows) {
  std::ostringstream out;
  out << fmt::format("{:<8} {:>12} {:>12} {:>10}", "mode", "log_bytes", "txn/s", "committed");
  if (!rows.empty()) {
    for (const auto& row : rows) {
      if (row.replay_wall.empty()) continue;
      for (const auto& [w, t] : row.replay_wall) out << fmt::format(" {:>14}", fmt::format("replay_w{}_s", w));
      for (const auto& [w, t] : row.replay_sim) out << fmt::format(" {:>14}", fmt::format("replay_w{}_sim", w));
      break;
    }
  }
  out << '\n';
  for (const auto& row : rows) {
    out << fmt::format("{:<8} {:>12} {:>12.0f} {:>10}", to_string(row.mode), row.log_bytes, row.throughput,
                       row.committed);
    for (const auto& [w, t] : row.replay_wall) out << fmt::format(" {:>14.4f}", t);
    for (const auto& [w, t] : row.replay_sim) out << fmt::format(" {:>14}", t);
    out << '\n';
  }
  return out.str();
}

}  // namespace depdb
