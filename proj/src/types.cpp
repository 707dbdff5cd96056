#include "bgl/types.hpp"

#include <algorithm>
#include <stdexcept>

namespace bgl {

PairKind classify_pair(const Transaction& a, const Transaction& b)
{
    if (a == b) return PairKind::Identical;
    if (conflicting(a, b)) return PairKind::Conflicting;
    return PairKind::Unrelated;
}

bool conflicting(const Transaction& a, const Transaction& b)
{
    return a.source == b.source && a.seq == b.seq &&
           (a.dest != b.dest || a.amount != b.amount);
}

const char* node_kind_name(NodeKind k)
{
    switch (k) {
    case NodeKind::Init: return "init";
    case NodeKind::Start: return "start";
    case NodeKind::Update: return "update";
    case NodeKind::Close: return "close";
    case NodeKind::Accept: return "accept";
    }
    return "?";
}

Digest Digest::from_hex_str(const std::string& hex)
{
    Bytes raw = from_hex(hex);
    if (raw.size() != 32) throw CodecError("digest must be 32 bytes");
    Digest d;
    std::copy(raw.begin(), raw.end(), d.bytes.begin());
    return d;
}

Node make_init_node(std::vector<InitEntry> entries)
{
    Money supply = 0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (entries[i].amount == 0 || entries[i].amount > kMaxAmount)
            throw std::invalid_argument("init amounts must be in (0, 2^62]");
        if (i > 0 && !(entries[i - 1].account < entries[i].account))
            throw std::invalid_argument("init accounts must be strictly ascending");
        supply += entries[i].amount;
        if (supply > kMaxAmount) throw std::invalid_argument("total supply exceeds 2^62");
    }
    Node n;
    n.kind = NodeKind::Init;
    n.init_payload = std::move(entries);
    return n;
}

Money total_supply(const Node& init)
{
    Money supply = 0;
    for (const auto& e : init.init_payload) supply += e.amount;
    return supply;
}

} // namespace bgl
