#include "depdb/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "depdb/codec.hpp"

namespace depdb {

ZipfSampler::ZipfSampler(double theta, std::uint64_t n) : theta_(theta) {
  if (n == 0) throw Error(ErrorCode::invalid_config, "zipf needs at least one rank");
  if (theta < 0) throw Error(ErrorCode::invalid_config, "zipf theta must be non-negative");
  cdf_.resize(n);
  double sum = 0;
  for (std::uint64_t k = 1; k <= n; ++k) {
    sum += std::pow(static_cast<double>(k), -theta);
    cdf_[k - 1] = sum;
  }
  norm_ = sum;
  for (auto& c : cdf_) c /= sum;
  cdf_.back() = 1.0;
}

std::uint64_t ZipfSampler::sample(std::mt19937_64& rng) const {
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  if (it == cdf_.end()) --it;
  return static_cast<std::uint64_t>(it - cdf_.begin()) + 1;
}

double ZipfSampler::pmf(std::uint64_t rank) const {
  if (rank < 1 || rank > cdf_.size()) return 0;
  return std::pow(static_cast<double>(rank), -theta_) / norm_;
}

std::uint64_t zipf_sample(double theta, std::uint64_t n, std::mt19937_64& rng) {
  return ZipfSampler(theta, n).sample(rng);
}

Bytes partition_key(std::uint64_t partition, std::initializer_list<std::uint32_t> rest) {
  ByteWriter w;
  w.u64(partition);
  for (auto part : rest) w.u32(part);
  return w.take();
}

KeyOwnership partition_ownership(std::size_t nodes) {
  return [nodes](const RecordRef& ref) -> NodeId {
    if (ref.key.size() < 8 || nodes == 0) return static_cast<NodeId>(nodes);  // no owner
    ByteReader r(std::string_view(ref.key).substr(0, 8));
    return static_cast<NodeId>(r.u64() % nodes);
  };
}

Workload::Workload(const WorkloadConfig& config, std::size_t nodes)
    : config_(config), nodes_(nodes), owner_(partition_ownership(nodes)) {
  if (nodes == 0) throw Error(ErrorCode::invalid_config, "node count must be positive");
  if (config.dist_pct < 0 || config.dist_pct > 100) throw Error(ErrorCode::invalid_config, "dist-pct out of range");
}

Transaction Workload::make_txn(NodeId node, EpochId epoch, std::uint32_t seq, std::string procedure,
                               const Args& params) const {
  Transaction t;
  t.id = TxnId{node, epoch, seq};
  t.procedure = std::move(procedure);
  t.params = params.encode();
  t.home = node;
  registry_.resolve(t);
  return t;
}

std::mt19937_64 Workload::rng_for(NodeId node, EpochId epoch, std::uint64_t salt) const {
  std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                    static_cast<std::uint32_t>(node), static_cast<std::uint32_t>(epoch),
                    static_cast<std::uint32_t>(epoch >> 32), static_cast<std::uint32_t>(salt),
                    static_cast<std::uint32_t>(salt >> 32)};
  return std::mt19937_64(seq);
}

namespace {

std::uint64_t splitmix(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Bytes fill_bytes(std::uint64_t state, std::size_t size) {
  Bytes out(size, '\0');
  for (std::size_t pos = 0; pos < size; pos += 8) {
    auto word = splitmix(state);
    for (std::size_t i = 0; i < 8 && pos + i < size; ++i) out[pos + i] = static_cast<char>('a' + ((word >> (8 * i)) & 0xff) % 26);
  }
  return out;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string column_name(std::uint64_t i) { return "f" + std::to_string(i); }

std::uint64_t u64_col(const Record& rec, std::string_view name) {
  const Bytes* v = rec.get(name);
  if (v == nullptr) throw Error(ErrorCode::record_not_found, "missing column " + std::string(name));
  return decode_u64(*v);
}

std::int64_t i64_col(const Record& rec, std::string_view name) { return static_cast<std::int64_t>(u64_col(rec, name)); }

void read_row(StoreView& view, const RecordRef& target, const Args&, Args&) { view.require(target); }

}  // namespace

// ---- YCSB ---------------------------------------------------------------

RecordRef YcsbWorkload::record(std::uint64_t id) { return RecordRef{"usertable", partition_key(id)}; }

YcsbWorkload::YcsbWorkload(const WorkloadConfig& config, std::size_t nodes)
    : Workload(config, nodes),
      keys_per_node_(std::max<std::uint64_t>(1, config.keys / nodes)),
      zipf_(config.theta, keys_per_node_) {
  if (config.ops_per_txn == 0 || config.columns == 0) throw Error(ErrorCode::invalid_config, "empty ycsb txn");
  if (config.ops_per_txn > keys_per_node_) throw Error(ErrorCode::invalid_config, "more ops than keys per node");

  registry_.register_op("ycsb_read", read_row);
  registry_.register_op("ycsb_update", [](StoreView& view, const RecordRef& target, const Args& args, Args&) {
    const auto& rec = view.require(target);
    auto col = column_name(args.get_u64("col"));
    const Bytes* old = rec.get(col);
    if (old == nullptr) throw Error(ErrorCode::record_not_found, "missing column " + col);
    auto size = old->size();
    view.write(target, col, fill_bytes(fnv1a(*old) ^ args.get_u64("seed"), size));
  });
  registry_.register_procedure("ycsb_txn", [](const Args& params) {
    std::vector<Step> steps;
    auto n = params.get_u64("n");
    for (std::uint64_t i = 0; i < n; ++i) {
      auto idx = std::to_string(i);
      bool write = params.get_u64("w" + idx) != 0;
      Step s;
      s.target = record(params.get_u64("k" + idx));
      s.kind = write ? AccessKind::read_write : AccessKind::read;
      s.call.op = write ? "ycsb_update" : "ycsb_read";
      if (write) {
        s.call.args.set("col", params.get("c" + idx));
        s.call.args.set("seed", params.get("s" + idx));
      }
      steps.push_back(std::move(s));
    }
    return steps;
  });
}

void YcsbWorkload::populate(Store& store, NodeId node) const {
  for (std::uint64_t rank = 1; rank <= keys_per_node_; ++rank) {
    auto id = key_id(node, rank);
    Record rec;
    for (unsigned c = 0; c < config_.columns; ++c) {
      rec.columns.emplace_back(column_name(c), fill_bytes(id * 1315423911ULL + c, config_.value_size));
    }
    store.put(record(id), std::move(rec));
  }
}

std::vector<Transaction> YcsbWorkload::generate(NodeId node, EpochId epoch, std::size_t count) const {
  auto rng = rng_for(node, epoch);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::vector<Transaction> out;
  out.reserve(count);
  const unsigned ops = config_.ops_per_txn;
  for (std::uint32_t seq = 0; seq < count; ++seq) {
    bool distributed = nodes_ > 1 && coin(rng) * 100.0 < config_.dist_pct;
    NodeId remote = node;
    std::vector<std::uint8_t> redirected(ops, 0);
    if (distributed) {
      remote = static_cast<NodeId>((node + 1 + rng() % (nodes_ - 1)) % nodes_);
      // A fixed two keys (one when the txn has a single op) go remote.
      unsigned moved = std::min(2u, ops);
      std::vector<unsigned> pos(ops);
      std::iota(pos.begin(), pos.end(), 0u);
      std::shuffle(pos.begin(), pos.end(), rng);
      for (unsigned i = 0; i < moved; ++i) redirected[pos[i]] = 1;
      if (moved == ops && ops > 1) redirected[pos.back()] = 0;  // keep one home key
    }
    Args params;
    params.set_u64("n", ops);
    std::vector<std::uint64_t> chosen;
    for (unsigned i = 0; i < ops; ++i) {
      NodeId owner = redirected[i] ? remote : node;
      std::uint64_t id = 0;
      for (int attempt = 0;; ++attempt) {
        auto rank = attempt < 64 ? zipf_.sample(rng) : 1 + (rng() % keys_per_node_);
        id = key_id(owner, rank);
        if (std::find(chosen.begin(), chosen.end(), id) == chosen.end()) break;
      }
      chosen.push_back(id);
      auto idx = std::to_string(i);
      params.set_u64("k" + idx, id);
      params.set_u64("w" + idx, coin(rng) < config_.read_ratio ? 0 : 1);
      params.set_u64("s" + idx, rng());
      params.set_u64("c" + idx, rng() % config_.columns);
    }
    out.push_back(make_txn(node, epoch, seq, "ycsb_txn", params));
  }
  return out;
}

// ---- reduced TPC-C ------------------------------------------------------

RecordRef TpccWorkload::warehouse(std::uint32_t w) { return RecordRef{"warehouse", partition_key(w)}; }
RecordRef TpccWorkload::district(std::uint32_t w, std::uint32_t d) { return RecordRef{"district", partition_key(w, {d})}; }
RecordRef TpccWorkload::customer(std::uint32_t w, std::uint32_t d, std::uint32_t c) {
  return RecordRef{"customer", partition_key(w, {d, c})};
}
RecordRef TpccWorkload::stock(std::uint32_t w, std::uint32_t i) { return RecordRef{"stock", partition_key(w, {i})}; }
RecordRef TpccWorkload::order(std::uint32_t w, std::uint32_t d, std::uint64_t o) {
  return RecordRef{"orders", partition_key(w, {d, static_cast<std::uint32_t>(o >> 32), static_cast<std::uint32_t>(o)})};
}
RecordRef TpccWorkload::order_line(std::uint32_t w, std::uint32_t d, std::uint64_t o, std::uint32_t line) {
  return RecordRef{"order_line",
                   partition_key(w, {d, static_cast<std::uint32_t>(o >> 32), static_cast<std::uint32_t>(o), line})};
}

namespace {

enum TpccType : std::uint8_t { kNewOrder = 0, kPayment = 1, kDelivery = 2, kOrderStatus = 3, kStockLevel = 4 };

void add_u64(StoreView& view, const RecordRef& target, const Record& rec, std::string_view col, std::int64_t delta) {
  view.write(target, col, encode_i64(i64_col(rec, col) + delta));
}

std::uint32_t arg32(const Args& a, std::string_view name) { return static_cast<std::uint32_t>(a.get_u64(name)); }

Step make_step(RecordRef target, AccessKind kind, std::string op, Args args = {}, std::vector<std::string> inputs = {}) {
  Step s;
  s.target = std::move(target);
  s.kind = kind;
  s.call = OpCall{std::move(op), std::move(args), std::move(inputs)};
  return s;
}

}  // namespace

TpccWorkload::TpccWorkload(const WorkloadConfig& config, std::size_t nodes) : Workload(config, nodes) {
  if (config.warehouses < nodes) throw Error(ErrorCode::invalid_config, "need at least one warehouse per node");
  if (config.districts == 0 || config.customers == 0 || config.items < 15) {
    throw Error(ErrorCode::invalid_config, "tpcc schema too small");
  }
  auto& r = registry_;
  r.register_op("read_row", read_row);
  r.register_op("no_warehouse", [](StoreView& v, const RecordRef& t, const Args&, Args& out) {
    const auto& rec = v.require(t);
    out.set("w_tax", *rec.get("tax"));
    add_u64(v, t, rec, "order_cnt", 1);
  });
  r.register_op("no_district", [](StoreView& v, const RecordRef& t, const Args&, Args&) {
    add_u64(v, t, v.require(t), "order_cnt", 1);
  });
  r.register_op("no_stock", [](StoreView& v, const RecordRef& t, const Args& a, Args& out) {
    const auto& rec = v.require(t);
    auto qty = static_cast<std::int64_t>(a.get_u64("qty"));
    auto have = i64_col(rec, "quantity");
    auto price = *rec.get("price");
    v.write(t, "quantity", encode_i64(have >= qty + 10 ? have - qty : have - qty + 91));
    add_u64(v, t, v.require(t), "ytd", qty);
    add_u64(v, t, v.require(t), "order_cnt", 1);
    if (a.get_u64("remote") != 0) add_u64(v, t, v.require(t), "remote_cnt", 1);
    out.set("price_" + std::to_string(a.get_u64("line")), price);
  });
  r.register_op("no_order", [](StoreView& v, const RecordRef& t, const Args& a, Args&) {
    v.insert(t, {{"c_id", a.get("c")}, {"ol_cnt", a.get("ol_cnt")}, {"carrier", encode_u64(0)}});
  });
  r.register_op("no_order_line", [](StoreView& v, const RecordRef& t, const Args& a, Args&) {
    auto line = std::to_string(a.get_u64("line"));
    auto amount = a.get_u64("price_" + line) * a.get_u64("qty");
    v.insert(t, {{"i_id", a.get("i")},
                 {"supply_w", a.get("supply_w")},
                 {"qty", a.get("qty")},
                 {"amount", encode_u64(amount)},
                 {"delivered", encode_u64(0)}});
  });
  r.register_op("pay_warehouse", [](StoreView& v, const RecordRef& t, const Args& a, Args&) {
    add_u64(v, t, v.require(t), "ytd", static_cast<std::int64_t>(a.get_u64("amount")));
  });
  r.register_op("pay_district", [](StoreView& v, const RecordRef& t, const Args& a, Args&) {
    add_u64(v, t, v.require(t), "ytd", static_cast<std::int64_t>(a.get_u64("amount")));
  });
  r.register_op("pay_customer", [](StoreView& v, const RecordRef& t, const Args& a, Args&) {
    auto amount = static_cast<std::int64_t>(a.get_u64("amount"));
    add_u64(v, t, v.require(t), "balance", -amount);
    add_u64(v, t, v.require(t), "ytd_payment", amount);
    add_u64(v, t, v.require(t), "payment_cnt", 1);
  });
  // Delivery tolerates an order that never committed (its epoch may have
  // been discarded by a failure): nothing is changed and the amount is 0.
  r.register_op("dl_order", [](StoreView& v, const RecordRef& t, const Args& a, Args&) {
    const Record* rec = v.read(t);
    if (rec != nullptr && u64_col(*rec, "carrier") == 0) v.write(t, "carrier", a.get("carrier"));
  });
  r.register_op("dl_order_line", [](StoreView& v, const RecordRef& t, const Args& a, Args& out) {
    const Record* rec = v.read(t);
    std::uint64_t amount = 0;
    if (rec != nullptr && u64_col(*rec, "delivered") == 0) {
      amount = u64_col(*rec, "amount");
      v.write(t, "delivered", encode_u64(1));
    }
    out.set_u64("amount_" + std::to_string(a.get_u64("line")), amount);
  });
  r.register_op("dl_customer", [](StoreView& v, const RecordRef& t, const Args& a, Args&) {
    std::int64_t sum = 0;
    auto lines = a.get_u64("ol_cnt");
    for (std::uint64_t l = 0; l < lines; ++l) sum += static_cast<std::int64_t>(a.get_u64("amount_" + std::to_string(l)));
    if (sum == 0) return;
    add_u64(v, t, v.require(t), "balance", sum);
    add_u64(v, t, v.require(t), "delivery_cnt", 1);
  });
  r.register_op("dl_district", [](StoreView& v, const RecordRef& t, const Args&, Args&) {
    add_u64(v, t, v.require(t), "delivered", 1);
  });

  r.register_procedure("new_order", [](const Args& p) {
    auto w = arg32(p, "w"), d = arg32(p, "d"), c = arg32(p, "c");
    auto o = p.get_u64("o");
    auto lines = p.get_u64("ol_cnt");
    std::vector<Step> steps;
    steps.push_back(make_step(warehouse(w), AccessKind::read_write, "no_warehouse"));
    steps.push_back(make_step(district(w, d), AccessKind::read_write, "no_district"));
    steps.push_back(make_step(customer(w, d, c), AccessKind::read, "read_row"));
    for (std::uint64_t l = 0; l < lines; ++l) {
      auto ls = std::to_string(l);
      auto supply = arg32(p, "sw" + ls);
      Args a;
      a.set_u64("qty", p.get_u64("q" + ls));
      a.set_u64("line", l);
      a.set_u64("remote", supply != w ? 1 : 0);
      steps.push_back(make_step(stock(supply, arg32(p, "i" + ls)), AccessKind::read_write, "no_stock", a));
    }
    Args oa;
    oa.set("c", p.get("c"));
    oa.set("ol_cnt", p.get("ol_cnt"));
    steps.push_back(make_step(order(w, d, o), AccessKind::insert, "no_order", oa));
    for (std::uint64_t l = 0; l < lines; ++l) {
      auto ls = std::to_string(l);
      Args a;
      a.set_u64("line", l);
      a.set("i", p.get("i" + ls));
      a.set("supply_w", p.get("sw" + ls));
      a.set("qty", p.get("q" + ls));
      steps.push_back(make_step(order_line(w, d, o, static_cast<std::uint32_t>(l)), AccessKind::insert,
                                "no_order_line", a, {"price_" + ls}));
    }
    return steps;
  });
  r.register_procedure("payment", [](const Args& p) {
    auto w = arg32(p, "w"), d = arg32(p, "d");
    Args a;
    a.set("amount", p.get("amount"));
    return std::vector<Step>{
        make_step(warehouse(w), AccessKind::read_write, "pay_warehouse", a),
        make_step(district(w, d), AccessKind::read_write, "pay_district", a),
        make_step(customer(arg32(p, "cw"), arg32(p, "cd"), arg32(p, "c")), AccessKind::read_write, "pay_customer", a)};
  });
  r.register_procedure("delivery", [](const Args& p) {
    auto w = arg32(p, "w"), d = arg32(p, "d");
    std::vector<Step> steps;
    if (p.has("o")) {
      auto o = p.get_u64("o");
      auto lines = p.get_u64("ol_cnt");
      Args oa;
      oa.set("carrier", p.get("carrier"));
      steps.push_back(make_step(order(w, d, o), AccessKind::read_write, "dl_order", oa));
      std::vector<std::string> amounts;
      for (std::uint64_t l = 0; l < lines; ++l) {
        Args a;
        a.set_u64("line", l);
        steps.push_back(
            make_step(order_line(w, d, o, static_cast<std::uint32_t>(l)), AccessKind::read_write, "dl_order_line", a));
        amounts.push_back("amount_" + std::to_string(l));
      }
      Args ca;
      ca.set("ol_cnt", p.get("ol_cnt"));
      steps.push_back(make_step(customer(w, d, arg32(p, "c")), AccessKind::read_write, "dl_customer", ca, amounts));
    }
    steps.push_back(make_step(district(w, d), AccessKind::read_write, "dl_district"));
    return steps;
  });
  r.register_procedure("order_status", [](const Args& p) {
    auto w = arg32(p, "w"), d = arg32(p, "d");
    return std::vector<Step>{make_step(customer(w, d, arg32(p, "c")), AccessKind::read, "read_row"),
                             make_step(district(w, d), AccessKind::read, "read_row")};
  });
  r.register_procedure("stock_level", [](const Args& p) {
    auto w = arg32(p, "w"), d = arg32(p, "d");
    std::vector<Step> steps{make_step(district(w, d), AccessKind::read, "read_row")};
    auto n = p.get_u64("n");
    for (std::uint64_t k = 0; k < n; ++k) {
      steps.push_back(make_step(stock(w, arg32(p, "i" + std::to_string(k))), AccessKind::read, "read_row"));
    }
    return steps;
  });
}

std::vector<std::uint32_t> TpccWorkload::warehouses_of(NodeId node) const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t w = node; w < config_.warehouses; w += static_cast<std::uint32_t>(nodes_)) out.push_back(w);
  return out;
}

void TpccWorkload::populate(Store& store, NodeId node) const {
  auto z = encode_u64(0);
  for (auto w : warehouses_of(node)) {
    store.put(warehouse(w), Record{{{"ytd", z}, {"order_cnt", z}, {"tax", encode_u64(5 + w % 10)}}, 0});
    for (std::uint32_t d = 0; d < config_.districts; ++d) {
      store.put(district(w, d), Record{{{"ytd", z}, {"order_cnt", z}, {"delivered", z}}, 0});
      for (std::uint32_t c = 0; c < config_.customers; ++c) {
        store.put(customer(w, d, c),
                  Record{{{"balance", z}, {"ytd_payment", z}, {"payment_cnt", z}, {"delivery_cnt", z}}, 0});
      }
    }
    for (std::uint32_t i = 0; i < config_.items; ++i) {
      store.put(stock(w, i), Record{{{"quantity", encode_u64(100)},
                                     {"ytd", z},
                                     {"order_cnt", z},
                                     {"remote_cnt", z},
                                     {"price", encode_u64(1 + i % 100)}},
                                    0});
    }
  }
}

std::vector<std::uint8_t> TpccWorkload::mix_block(NodeId node, std::uint64_t block) const {
  std::vector<std::uint8_t> deck;
  deck.insert(deck.end(), 44, kNewOrder);
  deck.insert(deck.end(), 45, kPayment);
  deck.insert(deck.end(), 4, kDelivery);
  deck.insert(deck.end(), 4, kOrderStatus);
  deck.insert(deck.end(), 3, kStockLevel);
  auto rng = rng_for(node, 0, block + 1);
  std::shuffle(deck.begin(), deck.end(), rng);
  return deck;
}

std::vector<Transaction> TpccWorkload::generate(NodeId node, EpochId epoch, std::size_t count) const {
  return generate_impl(node, epoch, count, true);
}

std::vector<Transaction> TpccWorkload::generate_impl(NodeId node, EpochId epoch, std::size_t count,
                                                     bool resolve_delivery) const {
  auto rng = rng_for(node, epoch);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  const auto home = warehouses_of(node);
  std::vector<std::uint32_t> foreign;
  for (std::uint32_t w = 0; w < config_.warehouses; ++w) {
    if (w % nodes_ != node) foreign.push_back(w);
  }
  auto pick = [&](const std::vector<std::uint32_t>& from) { return from[rng() % from.size()]; };

  // Deliveries work through the orders this node placed two epochs ago.
  std::vector<Args> old_orders;
  if (resolve_delivery && epoch > 2) {
    for (const auto& t : generate_impl(node, epoch - 2, config_.batch_size, false)) {
      if (t.procedure == "new_order") old_orders.push_back(Args::decode(t.params));
    }
  }
  std::size_t deliveries = 0;

  const std::uint64_t base = epoch * config_.batch_size;
  std::vector<std::uint8_t> deck;
  std::uint64_t deck_block = ~0ULL;

  std::vector<Transaction> out;
  out.reserve(count);
  for (std::uint32_t seq = 0; seq < count; ++seq) {
    auto g = base + seq;
    if (g / 100 != deck_block) {
      deck_block = g / 100;
      deck = mix_block(node, deck_block);
    }
    auto type = deck[g % 100];
    bool distributed = !foreign.empty() && coin(rng) * 100.0 < config_.dist_pct;
    auto w = pick(home);
    auto d = static_cast<std::uint32_t>(rng() % config_.districts);
    auto c = static_cast<std::uint32_t>(rng() % config_.customers);
    Args p;
    p.set_u64("w", w);
    p.set_u64("d", d);
    std::string proc;
    switch (type) {
      case kNewOrder: {
        proc = "new_order";
        p.set_u64("c", c);
        p.set_u64("o", (epoch << 32) | (static_cast<std::uint64_t>(node) << 20) | seq);
        auto lines = 5 + rng() % 6;
        p.set_u64("ol_cnt", lines);
        std::vector<std::uint32_t> items;
        while (items.size() < lines) {
          auto i = static_cast<std::uint32_t>(rng() % config_.items);
          if (std::find(items.begin(), items.end(), i) == items.end()) items.push_back(i);
        }
        auto remote_line = distributed ? rng() % lines : lines;
        for (std::uint64_t l = 0; l < lines; ++l) {
          auto ls = std::to_string(l);
          p.set_u64("i" + ls, items[l]);
          p.set_u64("sw" + ls, l == remote_line ? pick(foreign) : w);
          p.set_u64("q" + ls, 1 + rng() % 10);
        }
        break;
      }
      case kPayment: {
        proc = "payment";
        p.set_u64("amount", 1 + rng() % 5000);
        p.set_u64("cw", distributed ? pick(foreign) : w);
        p.set_u64("cd", rng() % config_.districts);
        p.set_u64("c", c);
        break;
      }
      case kDelivery: {
        proc = "delivery";
        // drawn unconditionally so the stream matches the regenerated batch
        auto carrier = 1 + rng() % 10;
        if (deliveries < old_orders.size()) {
          const auto& o = old_orders[deliveries];
          p.set("w", o.get("w"));
          p.set("d", o.get("d"));
          p.set("c", o.get("c"));
          p.set("o", o.get("o"));
          p.set("ol_cnt", o.get("ol_cnt"));
          p.set_u64("carrier", carrier);
        }
        ++deliveries;
        break;
      }
      case kOrderStatus:
        proc = "order_status";
        p.set_u64("c", c);
        break;
      default: {
        proc = "stock_level";
        p.set_u64("n", 10);
        for (int k = 0; k < 10; ++k) p.set_u64("i" + std::to_string(k), rng() % config_.items);
        break;
      }
    }
    out.push_back(make_txn(node, epoch, seq, proc, p));
  }
  return out;
}

std::unique_ptr<Workload> make_workload(const WorkloadConfig& config, std::size_t nodes) {
  if (config.kind == WorkloadKind::tpcc) return std::make_unique<TpccWorkload>(config, nodes);
  return std::make_unique<YcsbWorkload>(config, nodes);
}

}  // namespace depdb
