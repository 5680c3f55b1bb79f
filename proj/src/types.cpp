#include "depdb/types.hpp"

#include <sstream>

namespace depdb {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::procedure_not_found: return "procedure-not-found";
    case ErrorCode::malformed_params: return "malformed-params";
    case ErrorCode::record_not_found: return "record-not-found";
    case ErrorCode::duplicate_name: return "duplicate-name";
    case ErrorCode::invalid_config: return "invalid-config";
    case ErrorCode::ownership_gap: return "ownership-gap";
    case ErrorCode::epoch_incomplete: return "epoch-incomplete";
    case ErrorCode::decode_error: return "decode-error";
    case ErrorCode::unrecoverable_log: return "unrecoverable-log";
    case ErrorCode::recovery_fault: return "recovery-fault";
    case ErrorCode::storage_failure: return "storage-failure";
  }
  return "unknown";
}

std::string_view to_string(AccessKind kind) {
  switch (kind) {
    case AccessKind::read: return "read";
    case AccessKind::write: return "write";
    case AccessKind::read_write: return "read-write";
    case AccessKind::insert: return "insert";
  }
  return "unknown";
}

AccessKind merge_kinds(AccessKind first, AccessKind second) {
  if (first == AccessKind::insert || second == AccessKind::insert) return AccessKind::insert;
  if (first == second) return first;
  return AccessKind::read_write;
}

std::string to_string(const RecordRef& ref) {
  std::string out = ref.table;
  out += '/';
  for (unsigned char c : ref.key) {
    if (c >= 0x21 && c < 0x7f) {
      out += static_cast<char>(c);
    } else {
      static constexpr char hex[] = "0123456789abcdef";
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 0xf];
    }
  }
  return out;
}

std::string to_string(const TxnId& id) {
  std::ostringstream os;
  os << 't' << id.node << '.' << id.epoch << '.' << id.seq;
  return os.str();
}

std::string to_string(const ActionId& id) {
  return to_string(id.txn) + ':' + std::to_string(id.index);
}

}  // namespace depdb
