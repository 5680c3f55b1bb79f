#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "depdb/types.hpp"

namespace depdb {

using Column = std::pair<std::string, Bytes>;
/// Ordered (column-name, value) list. Names are unique.
using ColumnImage = std::vector<Column>;

const Bytes* find_column(const ColumnImage& image, std::string_view name);
void set_column(ColumnImage& image, std::string_view name, Bytes value);

struct Record {
  ColumnImage columns;
  /// Incremented by every write applied to the record.
  std::uint64_t version = 0;

  const Bytes* get(std::string_view column) const { return find_column(columns, column); }
  void set(std::string_view column, Bytes value) { set_column(columns, column, std::move(value)); }

  bool operator==(const Record&) const = default;
};

/// Single-version in-memory record store.
///
/// Lookups and inserts may run concurrently from several workers. Mutation of
/// one record by two workers at once is not allowed; the dependency graph is
/// what rules it out. Record addresses are stable until the record is erased.
class Store {
 public:
  Store();
  Store(const Store& other);
  Store& operator=(const Store& other);
  Store(Store&&) noexcept = default;
  Store& operator=(Store&&) noexcept = default;

  Record* find(const RecordRef& ref);
  const Record* find(const RecordRef& ref) const;

  /// Insert or replace; returns the stored record.
  Record& put(const RecordRef& ref, Record record);
  bool erase(const RecordRef& ref);
  void clear();

  std::size_t size() const;

  /// Visit every record in (table, key) order.
  void for_each_sorted(const std::function<void(const RecordRef&, const Record&)>& fn) const;

  /// Canonical byte image of the whole store: sorted, so two stores holding
  /// the same records serialize identically.
  Bytes serialize() const;
  static Store deserialize(std::string_view data);

  /// Records whose owner (per `owns`) matches are copied into a new store.
  Store filtered(const std::function<bool(const RecordRef&)>& owns) const;

  bool operator==(const Store& other) const { return serialize() == other.serialize(); }

 private:
  static constexpr std::size_t kShards = 64;
  struct Shard {
    mutable std::shared_mutex mu;
    std::unordered_map<RecordRef, Record, RecordRefHash> rows;
  };
  Shard& shard_for(const RecordRef& ref) const;

  std::unique_ptr<std::array<Shard, kShards>> shards_;
};

/// Write-side of one record access. Returned by `apply_action` and consumed by
/// the durability module.
struct ActionEffect {
  RecordRef target;
  AccessKind kind = AccessKind::read;
  /// Changed columns only. For inserts `before` is empty and `after` holds the
  /// whole new row.
  ColumnImage before;
  ColumnImage after;
  std::uint64_t version_before = 0;
  std::uint64_t version_after = 0;
  bool created = false;

  bool operator==(const ActionEffect&) const = default;
};

/// Column-level diff of two rows; only changed or added columns appear.
void diff_columns(const ColumnImage& before, const ColumnImage& after, ColumnImage& before_out,
                  ColumnImage& after_out);

/// Re-apply a recorded effect (installs the after-image).
void redo_effect(Store& store, const RecordRef& target, AccessKind kind, const ColumnImage& after);
/// Revert a live effect (restores the before-image and version).
void undo_effect(Store& store, const ActionEffect& effect);

/// Access interface seen by stored-procedure operations.
class StoreView {
 public:
  virtual ~StoreView() = default;
  /// nullptr when the record does not exist.
  virtual const Record* read(const RecordRef& ref) = 0;
  /// Throws record_not_found when the record does not exist.
  virtual void write(const RecordRef& ref, std::string_view column, Bytes value) = 0;
  virtual void insert(const RecordRef& ref, ColumnImage columns) = 0;

  const Record& require(const RecordRef& ref);
};

/// View that goes straight to a store.
class DirectView final : public StoreView {
 public:
  explicit DirectView(Store& store) : store_(store) {}
  const Record* read(const RecordRef& ref) override;
  void write(const RecordRef& ref, std::string_view column, Bytes value) override;
  void insert(const RecordRef& ref, ColumnImage columns) override;

 private:
  Store& store_;
};

/// View that records every record touched, for checking declared access sets.
class InstrumentedView final : public StoreView {
 public:
  explicit InstrumentedView(StoreView& inner) : inner_(inner) {}
  const Record* read(const RecordRef& ref) override;
  void write(const RecordRef& ref, std::string_view column, Bytes value) override;
  void insert(const RecordRef& ref, ColumnImage columns) override;

  /// Touched records in first-touch order, with the merged access kind.
  const std::vector<std::pair<RecordRef, AccessKind>>& touched() const { return touched_; }

 private:
  void note(const RecordRef& ref, AccessKind kind);
  StoreView& inner_;
  std::vector<std::pair<RecordRef, AccessKind>> touched_;
};

}  // namespace depdb
