#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace depdb {

/// Opaque value bytes. Typed views live at the procedure layer.
using Bytes = std::string;
using NodeId = std::uint32_t;
using EpochId = std::uint64_t;
using Lsn = std::uint64_t;

enum class ErrorCode : std::uint8_t {
  procedure_not_found,
  malformed_params,
  record_not_found,
  duplicate_name,
  invalid_config,
  ownership_gap,
  epoch_incomplete,
  decode_error,
  unrecoverable_log,
  recovery_fault,
  storage_failure,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A row is addressed by (table-name, primary-key).
struct RecordRef {
  std::string table;
  Bytes key;

  auto operator<=>(const RecordRef&) const = default;
  bool operator==(const RecordRef&) const = default;
};

struct RecordRefHash {
  std::size_t operator()(const RecordRef& ref) const noexcept {
    std::size_t h = std::hash<std::string>{}(ref.table);
    return h ^ (std::hash<std::string>{}(ref.key) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  }
};

std::string to_string(const RecordRef& ref);

/// Globally unique transaction id. Ordered lexicographically.
struct TxnId {
  NodeId node = 0;
  EpochId epoch = 0;
  std::uint32_t seq = 0;

  auto operator<=>(const TxnId&) const = default;
  bool operator==(const TxnId&) const = default;
};

struct TxnIdHash {
  std::size_t operator()(const TxnId& id) const noexcept {
    std::uint64_t h = id.epoch * 0x9e3779b97f4a7c15ULL;
    h ^= (static_cast<std::uint64_t>(id.node) << 32) | id.seq;
    return static_cast<std::size_t>(h * 0xff51afd7ed558ccdULL);
  }
};

std::string to_string(const TxnId& id);

struct ActionId {
  TxnId txn;
  std::uint16_t index = 0;

  auto operator<=>(const ActionId&) const = default;
  bool operator==(const ActionId&) const = default;
};

struct ActionIdHash {
  std::size_t operator()(const ActionId& id) const noexcept {
    return TxnIdHash{}(id.txn) * 31 + id.index;
  }
};

std::string to_string(const ActionId& id);

enum class AccessKind : std::uint8_t {
  read = 1,
  write = 2,
  read_write = 3,
  insert = 4,
};

std::string_view to_string(AccessKind kind);

inline bool is_write(AccessKind kind) { return kind != AccessKind::read; }

/// Two accesses on the same record conflict unless both only read.
inline bool conflicts(AccessKind a, AccessKind b) { return is_write(a) || is_write(b); }

/// Combine two accesses of one transaction on one record.
AccessKind merge_kinds(AccessKind first, AccessKind second);

/// Position of a transaction in the equivalent serial order of a cluster run:
/// epoch first, then the local phase before the distributed phase, then the
/// arrival sequence, then the origin node.
struct SerialOrder {
  EpochId epoch = 0;
  std::uint8_t phase = 0;  // 0 local, 1 distributed
  std::uint32_t seq = 0;
  NodeId origin = 0;

  auto operator<=>(const SerialOrder&) const = default;
  bool operator==(const SerialOrder&) const = default;
};

/// Maps every record to the node that owns it.
using KeyOwnership = std::function<NodeId(const RecordRef&)>;

}  // namespace depdb
