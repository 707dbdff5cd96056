#include "bgl/graph.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "bgl/codec.hpp"

namespace bgl {

Blockgraph::Blockgraph(Node init, const SignatureScheme* scheme) : scheme_(scheme)
{
    if (init.kind != NodeKind::Init) throw std::invalid_argument("genesis must be an init node");
    for (std::size_t i = 0; i < init.init_payload.size(); ++i) {
        const auto& e = init.init_payload[i];
        if (e.amount == 0) throw std::invalid_argument("init amounts must be positive");
        if (i > 0 && !(init.init_payload[i - 1].account < e.account))
            throw std::invalid_argument("init accounts must be strictly ascending");
    }
    supply_ = total_supply(init);
    Entry e;
    e.node = std::move(init);
    e.hash = node_hash(e.node);
    e.index = 0;
    e.reach = Bitset(1);
    e.reach.set(0);
    e.state = ChainState::Idle;
    index_[e.hash] = 0;
    entries_.push_back(std::move(e));
    referenced_.push_back(false);
}

const Node* Blockgraph::find(const Digest& d) const
{
    auto it = index_.find(d);
    return it == index_.end() ? nullptr : &entries_[it->second].node;
}

std::optional<std::size_t> Blockgraph::index_of(const Digest& d) const
{
    auto it = index_.find(d);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

const Blockgraph::Entry* Blockgraph::entry_of(const Digest& d) const
{
    auto it = index_.find(d);
    return it == index_.end() ? nullptr : &entries_[it->second];
}

Blockgraph::InsertResult Blockgraph::check_and_index(const Node& n, std::size_t& parent_idx,
                                                     std::vector<std::size_t>& ref_indices) const
{
    InsertResult res;
    auto reject = [&res](std::string why) {
        res.status = InsertResult::Status::Rejected;
        res.reason = std::move(why);
        return res;
    };

    if (entries_.empty()) return reject("graph has no init node");
    if (n.kind == NodeKind::Init) return reject("second init node");
    if (n.seq == 0) return reject("sequence numbers start at 1");
    if (n.bank.key.empty()) return reject("node without owner bank");
    if (scheme_ && !verify_node(*scheme_, n)) return reject("bad bank signature");
    if (n.kind == NodeKind::Start) {
        for (const auto& t : n.txs)
            if (scheme_ && !verify_transaction(*scheme_, t))
                return reject("start carries a transaction with a bad signature");
    }

    // Resolve the parent and (for updates) every reference. Unresolved
    // references are a sync condition, not a structural error.
    auto pit = index_.find(n.parent);
    if (pit == index_.end()) {
        res.missing.push_back(n.parent);
    } else {
        parent_idx = pit->second;
    }
    ref_indices.clear();
    if (n.kind == NodeKind::Update) {
        if (n.refs.empty()) return reject("update with no references");
        for (const auto& r : n.refs) {
            auto it = index_.find(r.hash);
            if (it == index_.end()) {
                res.missing.push_back(r.hash);
            } else {
                ref_indices.push_back(it->second);
            }
        }
    }
    if (!res.missing.empty()) {
        res.status = InsertResult::Status::MissingAncestors;
        return res;
    }

    // Reference ids must agree with the resolved nodes ("a reference
    // resolves to at most one node").
    if (n.kind == NodeKind::Update) {
        for (std::size_t i = 0; i < n.refs.size(); ++i) {
            const Entry& target = entries_[ref_indices[i]];
            if (target.node.kind == NodeKind::Init) {
                if (!n.refs[i].bank.key.empty() || n.refs[i].seq != 0)
                    return reject("reference id does not match the init node");
            } else if (target.node.bank != n.refs[i].bank || target.node.seq != n.refs[i].seq) {
                return reject("reference id does not match the referenced node");
            }
        }
    }

    // Chain grammar against the parent.
    const Entry& parent = entries_[parent_idx];
    if (n.seq == 1) {
        if (parent.node.kind != NodeKind::Init)
            return reject("first chain node must hang off the init node");
    } else {
        if (parent.node.kind == NodeKind::Init)
            return reject("non-first node with init parent");
        if (parent.node.bank != n.bank) return reject("parent belongs to another bank");
        if (parent.node.seq + 1 != n.seq) return reject("parent is not the previous chain node");
    }
    ChainState st = parent.node.kind == NodeKind::Init ? ChainState::Idle : parent.state;
    switch (n.kind) {
    case NodeKind::Start:
        if (st != ChainState::Idle) return reject("start before the previous block accepted");
        break;
    case NodeKind::Close:
        if (st != ChainState::Open) return reject("close without an open start");
        break;
    case NodeKind::Accept:
        if (st != ChainState::Closed) return reject("accept without a preceding close");
        break;
    case NodeKind::Update:
        break;
    default:
        return reject("bad node kind");
    }
    return res;
}

Blockgraph::InsertResult Blockgraph::insert(const Node& n)
{
    Digest h = node_hash(n);
    if (index_.count(h)) {
        InsertResult res;
        res.status = InsertResult::Status::AlreadyPresent;
        return res;
    }
    std::size_t parent_idx = 0;
    std::vector<std::size_t> ref_indices;
    InsertResult res = check_and_index(n, parent_idx, ref_indices);
    if (res.status != InsertResult::Status::Inserted) return res;

    Entry e;
    e.node = n;
    e.hash = h;
    e.index = entries_.size();
    e.parent_index = parent_idx;

    e.reach = entries_[parent_idx].reach;
    for (std::size_t ri : ref_indices) e.reach |= entries_[ri].reach;
    e.reach.set(e.index);

    ChainState pst = entries_[parent_idx].node.kind == NodeKind::Init
                         ? ChainState::Idle
                         : entries_[parent_idx].state;
    switch (n.kind) {
    case NodeKind::Start:
        e.state = ChainState::Open;
        break;
    case NodeKind::Close:
        e.state = ChainState::Closed;
        break;
    case NodeKind::Accept:
        e.state = ChainState::Idle;
        break;
    default:
        e.state = pst;
        break;
    }

    // Cache the enclosing block's start/close for close and accept nodes.
    if (n.kind == NodeKind::Close || n.kind == NodeKind::Accept) {
        std::size_t walk = parent_idx;
        std::size_t close_idx = kNone;
        while (true) {
            const Entry& w = entries_[walk];
            if (w.node.kind == NodeKind::Start) {
                e.matching_start = walk;
                break;
            }
            if (w.node.kind == NodeKind::Close && close_idx == kNone) close_idx = walk;
            walk = w.parent_index;
        }
        if (n.kind == NodeKind::Accept) e.matching_close = close_idx;
    }

    std::size_t idx = e.index;
    index_[h] = idx;
    referenced_.push_back(false);
    referenced_[parent_idx] = true;
    for (std::size_t ri : ref_indices) referenced_[ri] = true;

    auto& chain = chains_[n.bank];
    auto pos = std::lower_bound(chain.begin(), chain.end(), idx,
                                [this, &n, &h](std::size_t lhs, std::size_t) {
                                    const Entry& le = entries_[lhs];
                                    if (le.node.seq != n.seq) return le.node.seq < n.seq;
                                    return le.hash < h;
                                });
    chain.insert(pos, idx);
    by_bank_seq_[{n.bank, n.seq}].push_back(idx);

    if (n.kind == NodeKind::Start) {
        starts_.push_back(idx);
        for (const auto& t : n.txs) {
            auto& bucket = tx_index_[{t.source, t.seq}];
            auto found = std::find_if(bucket.begin(), bucket.end(),
                                      [&t](const TxOccurrence& o) { return o.tx == t; });
            if (found == bucket.end()) {
                bucket.push_back(TxOccurrence{t, {idx}});
            } else {
                found->start_indices.push_back(idx);
            }
        }
    } else if (n.kind == NodeKind::Close) {
        closes_.push_back(idx);
    } else if (n.kind == NodeKind::Accept) {
        accepts_.push_back(idx);
    }

    entries_.push_back(std::move(e));
    return res;
}

bool Blockgraph::acknowledges(const Digest& v, const Digest& w) const
{
    auto vi = index_of(v);
    auto wi = index_of(w);
    if (!vi || !wi) throw UnresolvedRef("acknowledges: unresolved node reference");
    return entries_[*vi].reach.test(*wi);
}

bool Blockgraph::acknowledges(const NodeRef& v, const NodeRef& w) const
{
    return acknowledges(v.hash, w.hash);
}

Bitset Blockgraph::subgraph_mask(const Digest& v) const
{
    auto vi = index_of(v);
    if (!vi) throw UnresolvedRef("subgraph: unresolved node reference");
    Bitset mask = entries_[*vi].reach;
    mask.clear(*vi);
    return mask;
}

Blockgraph Blockgraph::subgraph(const Digest& v) const
{
    Bitset mask = subgraph_mask(v);
    Blockgraph out;
    if (!mask.test(0)) return out; // subgraph of the init node is empty
    out = Blockgraph(entries_[0].node, scheme_);
    // Insertion index order is ancestry-respecting by construction.
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        if (!mask.test(i)) continue;
        auto res = out.insert(entries_[i].node);
        if (!res.inserted())
            throw std::logic_error("subgraph extraction lost ancestry closure");
    }
    return out;
}

std::vector<Block> Blockgraph::blocks_of(const BankId& bank) const
{
    std::vector<Block> blocks;
    auto cit = chains_.find(bank);
    if (cit == chains_.end()) return blocks;
    std::set<std::pair<Digest, Digest>> seen; // (start, terminal) dedup across branches

    // Walk each branch from its leaf back to the init node; emit the block
    // partition of that branch. Leaves are chain nodes nobody uses as parent.
    std::set<std::size_t> parents_used;
    for (std::size_t idx : cit->second) parents_used.insert(entries_[idx].parent_index);
    for (std::size_t leaf : cit->second) {
        if (parents_used.count(leaf)) continue;
        std::vector<std::size_t> path;
        std::size_t walk = leaf;
        while (true) {
            const Entry& e = entries_[walk];
            if (e.node.kind == NodeKind::Init) break;
            path.push_back(walk);
            if (e.node.seq == 1) break;
            walk = e.parent_index;
        }
        std::reverse(path.begin(), path.end());
        Block current;
        bool open = false;
        auto flush = [&](std::size_t upto_exclusive) {
            (void)upto_exclusive;
            Digest terminal = current.accept ? *current.accept
                              : current.close ? *current.close
                                              : current.members.empty()
                                                  ? current.start
                                                  : current.members.back();
            if (seen.insert({current.start, terminal}).second) blocks.push_back(current);
            current = Block{};
            open = false;
        };
        for (std::size_t idx : path) {
            const Entry& e = entries_[idx];
            switch (e.node.kind) {
            case NodeKind::Start:
                current = Block{};
                current.start = e.hash;
                current.members = {e.hash};
                open = true;
                break;
            case NodeKind::Update:
                if (open) current.members.push_back(e.hash);
                break;
            case NodeKind::Close:
                current.close = e.hash;
                current.members.push_back(e.hash);
                break;
            case NodeKind::Accept:
                current.accept = e.hash;
                current.members.push_back(e.hash);
                flush(idx);
                break;
            default:
                break;
            }
        }
        if (open) flush(path.size());
    }
    std::sort(blocks.begin(), blocks.end(), [this](const Block& a, const Block& b) {
        return *index_of(a.start) < *index_of(b.start);
    });
    return blocks;
}

std::vector<std::pair<Digest, Digest>> Blockgraph::equivocation_evidence(const BankId& bank) const
{
    std::vector<std::pair<Digest, Digest>> out;
    auto cit = chains_.find(bank);
    if (cit == chains_.end()) return out;
    const auto& chain = cit->second;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        for (std::size_t j = i + 1; j < chain.size(); ++j) {
            const Entry& a = entries_[chain[i]];
            const Entry& b = entries_[chain[j]];
            if (a.node.seq != b.node.seq) continue;
            out.emplace_back(a.hash, b.hash);
        }
    }
    return out;
}

bool Blockgraph::malicious_in_view(const BankId& bank, const Bitset& mask) const
{
    auto cit = chains_.find(bank);
    if (cit == chains_.end()) return false;
    const auto& chain = cit->second;
    for (std::size_t i = 0; i < chain.size(); ++i) {
        if (!mask.test(chain[i])) continue;
        for (std::size_t j = i + 1; j < chain.size(); ++j) {
            if (!mask.test(chain[j])) continue;
            if (entries_[chain[i]].node.seq == entries_[chain[j]].node.seq) return true;
        }
    }
    return false;
}

bool Blockgraph::malicious(const BankId& bank) const
{
    auto cit = chains_.find(bank);
    if (cit == chains_.end()) return false;
    const auto& chain = cit->second;
    for (std::size_t i = 0; i + 1 < chain.size(); ++i)
        if (entries_[chain[i]].node.seq == entries_[chain[i + 1]].node.seq) return true;
    return false;
}

std::vector<BankId> Blockgraph::malicious_banks() const
{
    std::vector<BankId> out;
    for (const auto& [bank, chain] : chains_)
        if (malicious(bank)) out.push_back(bank);
    return out;
}

std::vector<BankId> Blockgraph::banks() const
{
    std::vector<BankId> out;
    out.reserve(chains_.size());
    for (const auto& [bank, chain] : chains_) out.push_back(bank);
    return out;
}

const std::vector<std::size_t>& Blockgraph::chain_of(const BankId& bank) const
{
    static const std::vector<std::size_t> empty;
    auto it = chains_.find(bank);
    return it == chains_.end() ? empty : it->second;
}

std::vector<std::size_t> Blockgraph::head_indices() const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (!referenced_[i]) out.push_back(i);
    return out;
}

const std::vector<Blockgraph::TxOccurrence>* Blockgraph::tx_bucket(const AccountId& source,
                                                                   std::uint64_t seq) const
{
    auto it = tx_index_.find({source, seq});
    return it == tx_index_.end() ? nullptr : &it->second;
}

NodeRef Blockgraph::ref_to(std::size_t index) const
{
    const Entry& e = entries_.at(index);
    NodeRef r;
    r.bank = e.node.bank;
    r.seq = e.node.seq;
    r.hash = e.hash;
    return r;
}

std::vector<std::size_t> Blockgraph::canonical_order() const
{
    // Deterministic topological order independent of insertion order: among
    // ready nodes always pick the least (bank, seq, hash).
    std::vector<std::size_t> indegree(entries_.size(), 0);
    std::vector<std::vector<std::size_t>> dependents(entries_.size());
    for (std::size_t i = 1; i < entries_.size(); ++i) {
        const Entry& e = entries_[i];
        std::set<std::size_t> deps;
        deps.insert(e.parent_index);
        for (const auto& r : e.node.refs)
            if (auto ri = index_of(r.hash)) deps.insert(*ri);
        indegree[i] = deps.size();
        for (std::size_t d : deps) dependents[d].push_back(i);
    }
    auto key_less = [this](std::size_t a, std::size_t b) {
        const Entry& ea = entries_[a];
        const Entry& eb = entries_[b];
        if (ea.node.bank != eb.node.bank) return ea.node.bank < eb.node.bank;
        if (ea.node.seq != eb.node.seq) return ea.node.seq < eb.node.seq;
        return ea.hash < eb.hash;
    };
    std::vector<std::size_t> ready;
    for (std::size_t i = 0; i < entries_.size(); ++i)
        if (indegree[i] == 0) ready.push_back(i);
    std::vector<std::size_t> order;
    order.reserve(entries_.size());
    while (!ready.empty()) {
        auto it = std::min_element(ready.begin(), ready.end(), key_less);
        std::size_t n = *it;
        ready.erase(it);
        order.push_back(n);
        for (std::size_t d : dependents[n])
            if (--indegree[d] == 0) ready.push_back(d);
    }
    return order;
}

std::string Blockgraph::dump() const
{
    std::string out;
    for (std::size_t i : canonical_order()) {
        out += to_hex(encode_node(entries_[i].node));
        out += '\n';
    }
    return out;
}

Digest Blockgraph::content_digest() const
{
    std::string text = dump();
    return sha256(ByteSpan(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

Digest Blockgraph::node_set_digest() const
{
    std::vector<Digest> hashes;
    hashes.reserve(entries_.size());
    for (const auto& e : entries_) hashes.push_back(e.hash);
    std::sort(hashes.begin(), hashes.end());
    Bytes acc;
    acc.reserve(hashes.size() * 32);
    for (const auto& h : hashes) acc.insert(acc.end(), h.bytes.begin(), h.bytes.end());
    return sha256(acc);
}

std::string Blockgraph::dot() const
{
    std::ostringstream os;
    os << "digraph blockgraph {\n  rankdir=BT;\n  node [shape=box, fontname=\"monospace\"];\n";
    auto node_id = [this](std::size_t i) { return "n" + entries_[i].hash.hex().substr(0, 12); };

    if (!entries_.empty())
        os << "  " << node_id(0) << " [label=\"init\", style=filled, fillcolor=lightgrey];\n";

    std::size_t cluster = 0;
    for (const auto& [bank, chain] : chains_) {
        os << "  subgraph cluster_bank" << cluster++ << " {\n";
        os << "    label=\"bank " << to_hex(bank.key).substr(0, 8) << "\";\n";
        std::size_t block_no = 0;
        for (const auto& block : blocks_of(bank)) {
            os << "    subgraph cluster_bank" << cluster - 1 << "_block" << block_no++ << " {\n";
            os << "      style=dotted;\n      label=\"\";\n";
            for (const auto& member : block.members) {
                auto mi = *index_of(member);
                const Entry& e = entries_[mi];
                os << "      " << node_id(mi) << " [label=\"" << node_kind_name(e.node.kind)
                   << " #" << e.node.seq << "\"];\n";
            }
            os << "    }\n";
        }
        // Chain nodes outside any block (inter-block updates).
        for (std::size_t idx : chain) {
            bool in_block = false;
            for (const auto& block : blocks_of(bank))
                for (const auto& member : block.members)
                    if (*index_of(member) == idx) in_block = true;
            if (!in_block)
                os << "    " << node_id(idx) << " [label=\""
                   << node_kind_name(entries_[idx].node.kind) << " #" << entries_[idx].node.seq
                   << "\"];\n";
        }
        os << "  }\n";
    }

    for (std::size_t i : canonical_order()) {
        const Entry& e = entries_[i];
        if (e.node.kind == NodeKind::Init) continue;
        os << "  " << node_id(i) << " -> " << node_id(e.parent_index) << ";\n";
        for (const auto& r : e.node.refs)
            os << "  " << node_id(i) << " -> " << node_id(*index_of(r.hash))
               << " [style=dashed, color=grey];\n";
    }
    os << "}\n";
    return os.str();
}

GraphView whole_graph(const Blockgraph& g)
{
    return GraphView{&g, nullptr};
}

} // namespace bgl
