// depdb_bench: run a simulated-cluster experiment and write the throughput CSV.
//
// Exit codes: 0 all invariants held, 1 invariant violation, 2 usage or
// configuration error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "depdb/bench.hpp"

using namespace depdb;

namespace {

struct FailAt {
  double seconds = 0;
  std::optional<NodeId> node;
};

FailAt parse_fail_at(const std::string& text) {
  FailAt f;
  auto comma = text.find(',');
  try {
    std::size_t used = 0;
    f.seconds = std::stod(text.substr(0, comma), &used);
    if (used != text.substr(0, comma).size() || f.seconds < 0) throw std::invalid_argument(text);
    if (comma != std::string::npos) {
      auto node = text.substr(comma + 1);
      auto n = std::stoul(node, &used);
      if (used != node.size()) throw std::invalid_argument(text);
      f.node = static_cast<NodeId>(n);
    }
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_config, "--fail-at expects <seconds>[,<node>], got '" + text + "'");
  }
  return f;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorCode::storage_failure, "cannot write " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated dependency-graph transaction cluster benchmark"};
  std::string config_path, out_path, recovery_out, fail_at, logging, workload;
  std::optional<std::size_t> nodes, batch_size;
  std::optional<unsigned> workers;
  std::optional<double> theta, dist_pct, duration;
  std::optional<std::uint64_t> seed, max_epochs;
  double bucket = 0.01;
  bool compare = false, no_oracle = false;
  app.add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--nodes", nodes, "simulated nodes");
  app.add_option("--workers", workers, "execution workers per node");
  app.add_option("--batch-size", batch_size, "transactions per node per epoch");
  app.add_option("--logging", logging, "none | fine | coarse | aries");
  app.add_option("--workload", workload, "ycsb | tpcc");
  app.add_option("--theta", theta, "YCSB Zipf skew");
  app.add_option("--dist-pct", dist_pct, "percentage of distributed transactions");
  app.add_option("--fail-at", fail_at, "crash at <sim seconds>[,<node>]; random node when omitted");
  app.add_option("--seed", seed, "deterministic seed");
  app.add_option("--duration", duration, "simulated seconds of issuing new epochs");
  app.add_option("--max-epochs", max_epochs, "stop after this many epochs (0: no limit)");
  app.add_option("--bucket", bucket, "throughput bucket width in simulated seconds")->check(CLI::PositiveNumber);
  app.add_option("--out", out_path, "CSV output (stdout when omitted)");
  app.add_option("--recovery-out", recovery_out, "recovery phase timings as JSON lines");
  app.add_flag("--compare-modes", compare, "run every logging mode and print a summary table");
  app.add_flag("--no-oracle", no_oracle, "skip the serializability oracle");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  BenchOptions opts;
  try {
    SimConfig cfg;
    if (const char* dir = std::getenv("DEPDB_LOG_DIR")) cfg.log_dir = dir;
    if (!config_path.empty()) cfg = load_sim_config(config_path, cfg);
    if (const char* dir = std::getenv("DEPDB_LOG_DIR")) cfg.log_dir = dir;
    auto set = [&](const char* key, const std::string& value) { apply_config_line(cfg, key, value); };
    if (nodes) set("nodes", std::to_string(*nodes));
    if (workers) set("workers", std::to_string(*workers));
    if (batch_size) set("batch_size", std::to_string(*batch_size));
    if (!logging.empty()) set("logging", logging);
    if (!workload.empty()) set("workload", workload);
    if (theta) cfg.workload.theta = *theta;
    if (dist_pct) cfg.workload.dist_pct = *dist_pct;
    if (seed) set("seed", std::to_string(*seed));
    if (duration) cfg.duration_s = *duration;
    if (max_epochs) cfg.max_epochs = *max_epochs;
    validate(cfg);
    opts.config = cfg;
    opts.bucket_s = bucket;
    opts.check_oracle = !no_oracle;
    if (!fail_at.empty()) {
      auto f = parse_fail_at(fail_at);
      if (f.node && *f.node >= cfg.nodes) throw Error(ErrorCode::invalid_config, "--fail-at node out of range");
      opts.fail_at = f.seconds;
      opts.fail_node = f.node;
    }
  } catch (const Error& e) {
    std::cerr << "depdb_bench: " << e.what() << "\n";
    return 2;
  }

  try {
    if (compare) {
      std::cout << modes_table(compare_modes(opts));
      return 0;
    }
    auto m = run_experiment(opts);
    auto csv = metrics_csv(m);
    if (out_path.empty()) {
      std::cout << csv;
    } else {
      write_text(out_path, csv);
    }
    if (!recovery_out.empty()) write_text(recovery_out, recovery_json_lines(m));
    std::cerr << "committed " << m.committed << "/" << m.submitted << " txns in " << m.sim_seconds
              << " sim s (" << m.wall_seconds << " wall s), log bytes " << m.log_bytes << ", messages "
              << m.messages.sent << (m.oracle_checked ? (m.oracle_ok ? ", oracle ok" : ", oracle FAILED") : "")
              << "\n";
    for (const auto& v : m.violations) std::cerr << "invariant violated: " << v << "\n";
    return m.violations.empty() ? 0 : 1;
  } catch (const Error& e) {
    std::cerr << "depdb_bench: " << e.what() << "\n";
    return e.code() == ErrorCode::invalid_config ? 2 : 1;
  }
}
