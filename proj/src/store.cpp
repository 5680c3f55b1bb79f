#include "depdb/store.hpp"

#include <algorithm>
#include <mutex>

#include "depdb/codec.hpp"

namespace depdb {

const Bytes* find_column(const ColumnImage& image, std::string_view name) {
  for (const auto& [col, value] : image) {
    if (col == name) return &value;
  }
  return nullptr;
}

void set_column(ColumnImage& image, std::string_view name, Bytes value) {
  for (auto& [col, v] : image) {
    if (col == name) {
      v = std::move(value);
      return;
    }
  }
  image.emplace_back(std::string(name), std::move(value));
}

Store::Store() : shards_(std::make_unique<std::array<Shard, kShards>>()) {}

Store::Store(const Store& other) : Store() { *this = other; }

Store& Store::operator=(const Store& other) {
  if (this == &other) return *this;
  if (!shards_) shards_ = std::make_unique<std::array<Shard, kShards>>();
  for (std::size_t i = 0; i < kShards; ++i) {
    std::shared_lock lk((*other.shards_)[i].mu);
    (*shards_)[i].rows = (*other.shards_)[i].rows;
  }
  return *this;
}

Store::Shard& Store::shard_for(const RecordRef& ref) const {
  return (*shards_)[RecordRefHash{}(ref) % kShards];
}

Record* Store::find(const RecordRef& ref) {
  auto& sh = shard_for(ref);
  std::shared_lock lk(sh.mu);
  auto it = sh.rows.find(ref);
  return it == sh.rows.end() ? nullptr : &it->second;
}

const Record* Store::find(const RecordRef& ref) const {
  auto& sh = shard_for(ref);
  std::shared_lock lk(sh.mu);
  auto it = sh.rows.find(ref);
  return it == sh.rows.end() ? nullptr : &it->second;
}

Record& Store::put(const RecordRef& ref, Record record) {
  auto& sh = shard_for(ref);
  std::unique_lock lk(sh.mu);
  auto& slot = sh.rows[ref];
  slot = std::move(record);
  return slot;
}

bool Store::erase(const RecordRef& ref) {
  auto& sh = shard_for(ref);
  std::unique_lock lk(sh.mu);
  return sh.rows.erase(ref) > 0;
}

void Store::clear() {
  for (auto& sh : *shards_) {
    std::unique_lock lk(sh.mu);
    sh.rows.clear();
  }
}

std::size_t Store::size() const {
  std::size_t n = 0;
  for (auto& sh : *shards_) {
    std::shared_lock lk(sh.mu);
    n += sh.rows.size();
  }
  return n;
}

void Store::for_each_sorted(const std::function<void(const RecordRef&, const Record&)>& fn) const {
  std::vector<std::pair<const RecordRef*, const Record*>> all;
  all.reserve(size());
  for (auto& sh : *shards_) {
    for (const auto& [ref, rec] : sh.rows) all.emplace_back(&ref, &rec);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return *a.first < *b.first; });
  for (const auto& [ref, rec] : all) fn(*ref, *rec);
}

Bytes Store::serialize() const {
  ByteWriter w;
  w.u64(size());
  for_each_sorted([&](const RecordRef& ref, const Record& rec) {
    w.record_ref(ref);
    w.u64(rec.version);
    w.u16(static_cast<std::uint16_t>(rec.columns.size()));
    for (const auto& [name, value] : rec.columns) {
      w.name(name);
      w.bytes(value);
    }
  });
  return w.take();
}

Store Store::deserialize(std::string_view data) {
  Store store;
  ByteReader r(data);
  auto n = r.u64();
  for (std::uint64_t i = 0; i < n; ++i) {
    RecordRef ref = r.record_ref();
    Record rec;
    rec.version = r.u64();
    auto cols = r.u16();
    rec.columns.reserve(cols);
    for (std::uint16_t c = 0; c < cols; ++c) {
      auto name = r.name();
      rec.columns.emplace_back(std::move(name), r.bytes());
    }
    store.put(ref, std::move(rec));
  }
  r.expect_done();
  return store;
}

Store Store::filtered(const std::function<bool(const RecordRef&)>& owns) const {
  Store out;
  for (auto& sh : *shards_) {
    std::shared_lock lk(sh.mu);
    for (const auto& [ref, rec] : sh.rows) {
      if (owns(ref)) out.put(ref, rec);
    }
  }
  return out;
}

void diff_columns(const ColumnImage& before, const ColumnImage& after, ColumnImage& before_out,
                  ColumnImage& after_out) {
  for (const auto& [name, value] : after) {
    const Bytes* old = find_column(before, name);
    if (old == nullptr) {
      after_out.emplace_back(name, value);
    } else if (*old != value) {
      before_out.emplace_back(name, *old);
      after_out.emplace_back(name, value);
    }
  }
}

void redo_effect(Store& store, const RecordRef& target, AccessKind kind, const ColumnImage& after) {
  if (!is_write(kind)) return;
  Record* rec = store.find(target);
  if (rec == nullptr) {
    if (after.empty()) return;  // the write found nothing to change
    if (kind != AccessKind::insert) throw Error(ErrorCode::record_not_found, "redo of " + to_string(target));
    Record fresh;
    fresh.columns = after;
    fresh.version = 1;
    store.put(target, std::move(fresh));
    return;
  }
  for (const auto& [name, value] : after) rec->set(name, value);
  ++rec->version;
}

void undo_effect(Store& store, const ActionEffect& effect) {
  if (!is_write(effect.kind)) return;
  if (effect.created) {
    store.erase(effect.target);
    return;
  }
  Record* rec = store.find(effect.target);
  if (rec == nullptr) throw Error(ErrorCode::record_not_found, "undo of " + to_string(effect.target));
  for (const auto& [name, value] : effect.before) rec->set(name, value);
  // Columns added by the write (present in after, absent in before) are dropped.
  for (const auto& [name, value] : effect.after) {
    if (find_column(effect.before, name) == nullptr) {
      std::erase_if(rec->columns, [&](const Column& c) { return c.first == name; });
    }
  }
  rec->version = effect.version_before;
}

const Record& StoreView::require(const RecordRef& ref) {
  const Record* rec = read(ref);
  if (rec == nullptr) throw Error(ErrorCode::record_not_found, to_string(ref));
  return *rec;
}

const Record* DirectView::read(const RecordRef& ref) { return store_.find(ref); }

void DirectView::write(const RecordRef& ref, std::string_view column, Bytes value) {
  Record* rec = store_.find(ref);
  if (rec == nullptr) throw Error(ErrorCode::record_not_found, to_string(ref));
  rec->set(column, std::move(value));
}

void DirectView::insert(const RecordRef& ref, ColumnImage columns) {
  Record rec;
  rec.columns = std::move(columns);
  store_.put(ref, std::move(rec));
}

void InstrumentedView::note(const RecordRef& ref, AccessKind kind) {
  for (auto& [r, k] : touched_) {
    if (r == ref) {
      k = merge_kinds(k, kind);
      return;
    }
  }
  touched_.emplace_back(ref, kind);
}

const Record* InstrumentedView::read(const RecordRef& ref) {
  note(ref, AccessKind::read);
  return inner_.read(ref);
}

void InstrumentedView::write(const RecordRef& ref, std::string_view column, Bytes value) {
  note(ref, AccessKind::write);
  inner_.write(ref, column, std::move(value));
}

void InstrumentedView::insert(const RecordRef& ref, ColumnImage columns) {
  note(ref, AccessKind::insert);
  inner_.insert(ref, std::move(columns));
}

}  // namespace depdb
