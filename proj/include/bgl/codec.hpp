#pragma once

#include "bgl/types.hpp"

namespace bgl {

// Canonical encoding. Every record starts with a 1-byte kind tag, then its
// fields in declared order: integers as big-endian fixed 8 bytes, byte
// strings as 4-byte big-endian length + bytes, lists as 4-byte big-endian
// count + elements. The encoding is frozen by the golden vectors under
// golden/.

inline constexpr std::uint8_t kTagAccount = 0x01;
inline constexpr std::uint8_t kTagTransaction = 0x02;
inline constexpr std::uint8_t kTagNodeRef = 0x03;
inline constexpr std::uint8_t kTagInit = 0x10;
inline constexpr std::uint8_t kTagStart = 0x11;
inline constexpr std::uint8_t kTagUpdate = 0x12;
inline constexpr std::uint8_t kTagClose = 0x13;
inline constexpr std::uint8_t kTagAccept = 0x14;

Bytes encode_transaction(const Transaction& t);
Transaction decode_transaction(ByteSpan data);

/// Bytes a user signs: the transaction encoding without the trailing
/// signature field.
Bytes tx_signing_payload(const Transaction& t);

Bytes encode_node(const Node& n);
Node decode_node(ByteSpan data);

/// Bytes a bank signs: the node encoding without the trailing signature
/// field. Init nodes are unsigned.
Bytes node_signing_payload(const Node& n);

Digest sha256(ByteSpan data);

/// Node identity: SHA-256 of the canonical encoding (signature included).
Digest node_hash(const Node& n);

Digest tx_hash(const Transaction& t);

} // namespace bgl
