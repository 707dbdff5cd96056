#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <vector>

#include "bgl/common.hpp"

namespace bgl {

/// Money is an exact count of minor currency units. All ledger arithmetic is
/// integer arithmetic; derived balances use a signed type because improper
/// graphs can drive an account below zero and that outcome must be
/// representable, not saturated away.
using Money = std::uint64_t;
using SignedMoney = std::int64_t;

/// Upper bound on transaction amounts and on the total supply of an initial
/// distribution. Keeps every reachable sum inside SignedMoney.
inline constexpr Money kMaxAmount = Money{1} << 62;

struct BankId {
    Bytes key; // public key bytes

    auto operator<=>(const BankId&) const = default;
};

struct UserId {
    Bytes key; // public key bytes

    auto operator<=>(const UserId&) const = default;
};

/// An account lives under a specific bank: the pair (bank key, user key).
struct AccountId {
    BankId bank;
    UserId user;

    auto operator<=>(const AccountId&) const = default;
};

struct Transaction {
    AccountId source;
    AccountId dest;
    Money amount = 0;
    std::uint64_t seq = 0; // position in the source account's transfer chain, 1-based
    Bytes sig;             // user signature over (source, dest, amount, seq)

    auto operator<=>(const Transaction&) const = default;
};

enum class PairKind { Identical, Conflicting, Unrelated };

/// Identical: all five fields equal. Conflicting: same source account and
/// sequence number but a different destination or amount. Anything else is
/// unrelated.
PairKind classify_pair(const Transaction& a, const Transaction& b);

/// Same source account and sequence number, different (dest, amount).
bool conflicting(const Transaction& a, const Transaction& b);

struct Digest {
    std::array<std::uint8_t, 32> bytes{};

    auto operator<=>(const Digest&) const = default;
    bool is_zero() const
    {
        for (auto b : bytes)
            if (b) return false;
        return true;
    }
    std::string hex() const { return to_hex(ByteSpan(bytes.data(), bytes.size())); }
    static Digest from_hex_str(const std::string& hex);
};

/// Reference to a node of another bank: its chain position plus its hash.
struct NodeRef {
    BankId bank;
    std::uint64_t seq = 0;
    Digest hash;

    auto operator<=>(const NodeRef&) const = default;
};

enum class NodeKind : std::uint8_t { Init, Start, Update, Close, Accept };

const char* node_kind_name(NodeKind k);

struct InitEntry {
    AccountId account;
    Money amount = 0;

    auto operator<=>(const InitEntry&) const = default;
};

/// One element of the blockgraph. Field usage by kind:
///   Init    — init_payload only; no bank, seq, parent or signature.
///   Start   — txs (ordered; order is part of the node identity).
///   Update  — refs to other banks' nodes.
///   Close   — no payload.
///   Accept  — no payload.
/// parent is the digest of the previous node in the bank's chain, or the
/// init node's digest for the first one.
struct Node {
    NodeKind kind = NodeKind::Init;
    BankId bank;
    std::uint64_t seq = 0;
    Digest parent;
    std::vector<InitEntry> init_payload;
    std::vector<Transaction> txs;
    std::vector<NodeRef> refs;
    Bytes sig;

    auto operator<=>(const Node&) const = default;
};

/// Builds the unique init node for a balance mapping. Entries must be
/// strictly ascending by account and carry strictly positive amounts.
Node make_init_node(std::vector<InitEntry> entries);

Money total_supply(const Node& init);

} // namespace bgl
