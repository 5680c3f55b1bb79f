#include "depdb/simnet.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace depdb {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw Error(ErrorCode::invalid_config, std::string(key) + ": not an unsigned integer: " + std::string(v));
  }
  return out;
}

double parse_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    std::string s(v);
    double d = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::invalid_config, std::string(key) + ": not a number: " + std::string(v));
  }
}

}  // namespace

void apply_config_line(SimConfig& c, std::string_view key, std::string_view value) {
  auto u = [&] { return parse_uint(key, value); };
  auto d = [&] { return parse_double(key, value); };
  auto& w = c.workload;
  if (key == "nodes") c.nodes = u();
  else if (key == "rtt") c.rtt = u();
  else if (key == "message_overhead") c.message_overhead = u();
  else if (key == "seed") c.seed = w.seed = u();
  else if (key == "workers") c.workers = static_cast<unsigned>(u());
  else if (key == "constructors") c.constructors = static_cast<unsigned>(u());
  else if (key == "batch_size") c.batch_size = w.batch_size = u();
  else if (key == "logging") c.logging = parse_log_mode(value);
  else if (key == "action_cost") c.action_cost = u();
  else if (key == "resolve_cost") c.resolve_cost = u();
  else if (key == "flush_cost") c.flush_cost = u();
  else if (key == "replay_cost") c.recovery.replay_vertex = u();
  else if (key == "aries_replay_cost") c.recovery.aries_record = u();
  else if (key == "snapshot_load_cost") c.recovery.snapshot_record = u();
  else if (key == "log_load_cost") c.recovery.log_record = u();
  else if (key == "restart_delay") c.restart_delay = u();
  else if (key == "checkpoint_every") c.checkpoint_every = u();
  else if (key == "log_dir") c.log_dir = std::string(value);
  else if (key == "duration") c.duration_s = d();
  else if (key == "max_epochs") c.max_epochs = u();
  else if (key == "workload") {
    if (value == "ycsb") w.kind = WorkloadKind::ycsb;
    else if (value == "tpcc") w.kind = WorkloadKind::tpcc;
    else throw Error(ErrorCode::invalid_config, "unknown workload: " + std::string(value));
  }
  else if (key == "theta") w.theta = d();
  else if (key == "keys") w.keys = u();
  else if (key == "ops_per_txn") w.ops_per_txn = static_cast<unsigned>(u());
  else if (key == "read_ratio") w.read_ratio = d();
  else if (key == "columns") w.columns = static_cast<unsigned>(u());
  else if (key == "value_size") w.value_size = static_cast<unsigned>(u());
  else if (key == "warehouses") w.warehouses = static_cast<unsigned>(u());
  else if (key == "districts") w.districts = static_cast<unsigned>(u());
  else if (key == "customers") w.customers = static_cast<unsigned>(u());
  else if (key == "items") w.items = static_cast<unsigned>(u());
  else if (key == "dist_pct") w.dist_pct = d();
  else throw Error(ErrorCode::invalid_config, "unknown config key: " + std::string(key));
}

SimConfig parse_sim_config(std::string_view text, SimConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto hash = s.find('#'); hash != std::string_view::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorCode::invalid_config, "line " + std::to_string(lineno) + ": expected key=value");
    }
    apply_config_line(base, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  return base;
}

SimConfig load_sim_config(const std::filesystem::path& path, SimConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::invalid_config, "cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_sim_config(ss.str(), std::move(base));
}

void validate(const SimConfig& c) {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::invalid_config, m); };
  if (c.nodes < 1) fail("nodes must be >= 1");
  if (c.nodes > 4096) fail("nodes must be <= 4096");
  if (c.workers < 1) fail("workers must be >= 1");
  if (c.constructors < 1) fail("constructors must be >= 1");
  if (c.batch_size < 1 || c.batch_size >= (1u << 20)) fail("batch_size must be in [1, 2^20)");
  if (c.duration_s < 0) fail("duration must be >= 0");
  if (c.duration_s == 0 && c.max_epochs == 0) fail("need a duration or max_epochs");
  if (c.workload.theta < 0) fail("theta must be >= 0");
  if (c.workload.dist_pct < 0 || c.workload.dist_pct > 100) fail("dist_pct must be in [0, 100]");
  if (c.workload.read_ratio < 0 || c.workload.read_ratio > 1) fail("read_ratio must be in [0, 1]");
}

void EventLoop::at(Tick time, std::string label, Fn fn) {
  if (time < now_) time = now_;
  queue_.push(Event{time, seq_++, std::move(label), std::move(fn)});
}

bool EventLoop::step() {
  if (queue_.empty()) return false;
  auto ev = queue_.top();
  queue_.pop();
  now_ = ev.time;
  auto mix = [&](std::uint64_t x) {
    trace_ ^= x;
    trace_ *= 0x100000001b3ULL;
  };
  mix(ev.time);
  mix(ev.seq);
  for (unsigned char ch : ev.label) mix(ch);
  ++executed_;
  ev.fn();
  return true;
}

void EventLoop::run_until(Tick limit) {
  while (!queue_.empty() && queue_.top().time <= limit) step();
}

void EventLoop::run() {
  while (step()) {
  }
}

Network::Network(EventLoop& loop, std::size_t nodes, Tick rtt, Tick overhead)
    : loop_(loop), rtt_(rtt), overhead_(overhead), alive_(nodes, 1), generation_(nodes, 0) {}

void Network::send(NodeId origin, NodeId dest, const Message& msg) {
  if (origin >= alive_.size() || dest >= alive_.size()) throw Error(ErrorCode::invalid_config, "no such node");
  if (!alive_[origin]) return;
  auto wire = encode_message(msg);
  ++counts_.sent;
  counts_.bytes += wire.size();
  ++counts_.by_type[msg.type];
  if (msg.type == MessageType::subgraph) ++counts_.subgraphs[{msg.epoch, origin}];
  if (!alive_[dest]) {
    ++counts_.dropped;
    if (on_drop_) loop_.after(rtt_, "net.timeout", [this, origin, dest, msg] { on_drop_(origin, dest, msg); });
    return;
  }
  auto g_origin = generation_[origin], g_dest = generation_[dest];
  loop_.after(one_way(), "net.deliver", [this, origin, dest, g_origin, g_dest, wire = std::move(wire)] {
    if (!alive_[dest] || generation_[dest] != g_dest || generation_[origin] != g_origin) {
      ++counts_.dropped;
      return;
    }
    ++counts_.delivered;
    if (handler_) handler_(dest, decode_message(wire));
  });
}

void Network::crash(NodeId node) {
  if (!alive_[node]) return;
  alive_[node] = 0;
  ++generation_[node];
}

void Network::restart(NodeId node) {
  if (alive_[node]) return;
  alive_[node] = 1;
  ++generation_[node];
}

}  // namespace depdb
