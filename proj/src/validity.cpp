#include "bgl/validity.hpp"

#include <algorithm>

#include "bgl/codec.hpp"

namespace bgl {

const char* cause_name(Cause c)
{
    switch (c) {
    case Cause::None: return "none";
    case Cause::BadSubgraph: return "bad-subgraph";
    case Cause::SeqGap: return "seq-gap";
    case Cause::ConflictingSeq: return "conflicting-seq";
    case Cause::InsufficientBalance: return "insufficient-balance";
    case Cause::ThresholdNotMet: return "threshold-not-met";
    case Cause::SelfMaliceEvident: return "self-malice-evident";
    case Cause::RedundantReference: return "redundant-reference";
    case Cause::Grammar: return "grammar";
    }
    return "?";
}

Verdict validate_start_tx(const GraphView& sub, const BalanceSheet& sheet, const Transaction& t,
                          const BankId& issuing_bank, const BatchContext* batch)
{
    // (a) The applied transactions of the source must cover sequence numbers
    // 1..N exactly and t must continue the chain.
    std::set<std::uint64_t> seqs;
    std::uint64_t max_seq = 0;
    for (const auto& a : sheet.applied) {
        if (a.source != t.source) continue;
        seqs.insert(a.seq);
        max_seq = std::max(max_seq, a.seq);
    }
    if (max_seq != seqs.size())
        return Verdict::fail(Cause::SeqGap, "source account has no contiguous transaction chain");
    if (t.seq != max_seq + 1)
        return Verdict::fail(Cause::SeqGap, "expected sequence number " +
                                                std::to_string(max_seq + 1) + ", got " +
                                                std::to_string(t.seq));

    // (b) No different transaction with the same source and sequence number
    // anywhere in the subgraph; an identical copy is tolerated only inside a
    // start node of another bank.
    if (const auto* bucket = sub.graph->tx_bucket(t.source, t.seq)) {
        for (const auto& occ : *bucket) {
            bool in_view = false;
            bool in_own_start = false;
            for (std::size_t si : occ.start_indices) {
                if (!sub.in_view(si)) continue;
                in_view = true;
                if (sub.graph->entry(si).node.bank == issuing_bank) in_own_start = true;
            }
            if (!in_view) continue;
            if (occ.tx != t)
                return Verdict::fail(Cause::ConflictingSeq,
                                     "a different transaction with this sequence number exists");
            if (in_own_start)
                return Verdict::fail(Cause::ConflictingSeq,
                                     "identical copy already in a start node of this bank");
        }
    }

    // (c) The source can afford the transfer, counting earlier transactions
    // of the same start node.
    SignedMoney balance = sheet.balance_of(t.source);
    if (batch) balance += batch->delta_of(t.source);
    if (balance < static_cast<SignedMoney>(t.amount))
        return Verdict::fail(Cause::InsufficientBalance,
                             "balance " + std::to_string(balance) + " below amount " +
                                 std::to_string(t.amount));
    return Verdict::ok();
}

Verdict validate_start_tx(const GraphView& sub, const Transaction& t, const BankId& issuing_bank)
{
    BalanceSheet sheet = total_balance(sub);
    return validate_start_tx(sub, sheet, t, issuing_bank, nullptr);
}

std::size_t candidate_matching_start(const Blockgraph& g, const Node& v)
{
    auto pi = g.index_of(v.parent);
    if (!pi) return Blockgraph::kNone;
    std::size_t walk = *pi;
    while (true) {
        const auto& e = g.entry(walk);
        if (e.node.kind == NodeKind::Start) return walk;
        if (e.node.kind == NodeKind::Init) return Blockgraph::kNone;
        walk = e.parent_index;
    }
}

std::size_t candidate_matching_close(const Blockgraph& g, const Node& v)
{
    auto pi = g.index_of(v.parent);
    if (!pi) return Blockgraph::kNone;
    std::size_t walk = *pi;
    while (true) {
        const auto& e = g.entry(walk);
        if (e.node.kind == NodeKind::Close) return walk;
        if (e.node.kind == NodeKind::Init || e.node.kind == NodeKind::Start)
            return Blockgraph::kNone;
        walk = e.parent_index;
    }
}

Evaluator::Evaluator(Digest expected_init, const SignatureScheme* scheme, SharedPowerRule rule)
    : expected_init_(expected_init), scheme_(scheme), rule_(rule)
{
}

void Evaluator::remember_verdict(const Digest& d, const Verdict& v)
{
    verdicts_.emplace(d, v);
}

const Verdict* Evaluator::known_verdict(const Digest& d) const
{
    auto it = verdicts_.find(d);
    return it == verdicts_.end() ? nullptr : &it->second;
}

Evaluator::ResolvedRefs Evaluator::resolve(const Blockgraph& g, const Node& v) const
{
    ResolvedRefs out;
    auto look = [&](const Digest& d) -> std::size_t {
        if (auto idx = g.index_of(d)) return *idx;
        auto it = verdicts_.find(d);
        if (it != verdicts_.end() && !it->second.valid) {
            out.invalid_ancestor = &it->second;
        } else {
            out.missing.push_back(d);
        }
        return Blockgraph::kNone;
    };
    out.parent = look(v.parent);
    for (const auto& r : v.refs) out.refs.push_back(look(r.hash));
    return out;
}

const BalanceSheet& Evaluator::representing_balance(const Blockgraph& g, std::size_t index)
{
    const auto& e = g.entry(index);
    auto it = balances_.find(e.hash);
    if (it != balances_.end()) return it->second;
    GraphView view{&g, &e.reach};
    return balances_.emplace(e.hash, total_balance(view)).first->second;
}

const PowerDistribution& Evaluator::representing_power(const Blockgraph& g, std::size_t index)
{
    const auto& e = g.entry(index);
    auto it = powers_.find(e.hash);
    if (it != powers_.end()) return it->second;
    GraphView view{&g, &e.reach};
    return powers_.emplace(e.hash, voting_power(view, rule_)).first->second;
}

void Evaluator::ensure_graph_validated(const Blockgraph& g)
{
    // Bottom-up so every node's ancestors carry verdicts before it is
    // judged; insertion index order respects ancestry.
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto& e = g.entry(i);
        if (verdicts_.count(e.hash)) continue;
        Verdict v = compute(g, e.node, e.hash);
        verdicts_.emplace(e.hash, std::move(v));
    }
}

Verdict Evaluator::validate_node(const Blockgraph& g, const Node& v)
{
    Digest h = node_hash(v);
    if (const auto* known = known_verdict(h)) return *known;
    ensure_graph_validated(g);
    if (const auto* known = known_verdict(h)) return *known; // v was an entry of g
    Verdict out = compute(g, v, h);
    verdicts_.emplace(h, out);
    return out;
}

Verdict Evaluator::compute(const Blockgraph& g, const Node& v, const Digest& hash)
{
    if (v.kind == NodeKind::Init) {
        if (hash == expected_init_) return Verdict::ok();
        return Verdict::fail(Cause::Grammar, "init node does not match the configured distribution");
    }
    if (v.seq == 0 || v.bank.key.empty())
        return Verdict::fail(Cause::Grammar, "malformed chain position");
    if (scheme_ && !verify_node(*scheme_, v))
        return Verdict::fail(Cause::Grammar, "bad bank signature");
    if (v.kind == NodeKind::Start) {
        for (const auto& t : v.txs)
            if (scheme_ && !verify_transaction(*scheme_, t))
                return Verdict::fail(Cause::Grammar, "transaction signature invalid");
    }

    ResolvedRefs refs = resolve(g, v);
    if (refs.invalid_ancestor)
        return Verdict::fail(Cause::BadSubgraph, "references an invalid node");
    if (!refs.missing.empty())
        throw UnresolvedRef("validate_node: representing graph incomplete");

    // The subgraph is valid only if all of its nodes are; the parent and
    // reference verdicts already fold in their own subgraphs.
    for (std::size_t i = 0; i <= refs.refs.size(); ++i) {
        std::size_t idx = i == 0 ? refs.parent : refs.refs[i - 1];
        const auto* verdict = known_verdict(g.entry(idx).hash);
        if (!verdict)
            throw std::logic_error("ancestor missing a verdict"); // ensure_graph_validated ran
        if (!verdict->valid)
            return Verdict::fail(Cause::BadSubgraph, "subgraph contains an invalid node");
    }

    // Grammar placement: chain position and block state.
    {
        const auto& parent = g.entry(refs.parent);
        if (v.seq == 1) {
            if (parent.node.kind != NodeKind::Init)
                return Verdict::fail(Cause::Grammar, "first chain node must follow the init node");
        } else {
            if (parent.node.kind == NodeKind::Init || parent.node.bank != v.bank ||
                parent.node.seq + 1 != v.seq)
                return Verdict::fail(Cause::Grammar, "parent is not the previous chain node");
        }
        ChainState st = parent.node.kind == NodeKind::Init ? ChainState::Idle : parent.state;
        if (v.kind == NodeKind::Start && st != ChainState::Idle)
            return Verdict::fail(Cause::Grammar, "start before the previous block accepted");
        if (v.kind == NodeKind::Close && st != ChainState::Open)
            return Verdict::fail(Cause::Grammar, "close without an open start");
        if (v.kind == NodeKind::Accept && st != ChainState::Closed)
            return Verdict::fail(Cause::Grammar, "accept without a preceding close");
    }

    const auto& parent_entry = g.entry(refs.parent);

    switch (v.kind) {
    case NodeKind::Update: {
        for (std::size_t ri : refs.refs)
            if (parent_entry.reach.test(ri))
                return Verdict::fail(Cause::RedundantReference,
                                     "reference already in the parent's subgraph");
        Bitset sub = parent_entry.reach;
        for (std::size_t ri : refs.refs) sub |= g.entry(ri).reach;
        if (g.malicious_in_view(v.bank, sub))
            return Verdict::fail(Cause::SelfMaliceEvident,
                                 "own equivocation evident from the subgraph");
        return Verdict::ok();
    }
    case NodeKind::Start: {
        GraphView sub{&g, &parent_entry.reach};
        const BalanceSheet& sheet = representing_balance(g, refs.parent);
        BatchContext batch;
        for (const auto& t : v.txs) {
            Verdict tv = validate_start_tx(sub, sheet, t, v.bank, &batch);
            if (!tv.valid) return tv;
            batch.apply(t);
        }
        return Verdict::ok();
    }
    case NodeKind::Close:
    case NodeKind::Accept: {
        std::size_t anchor = v.kind == NodeKind::Close ? candidate_matching_start(g, v)
                                                       : candidate_matching_close(g, v);
        if (anchor == Blockgraph::kNone)
            return Verdict::fail(Cause::Grammar, "no matching block opener");
        // Supporters: banks owning a node the candidate acknowledges that
        // itself acknowledges the anchor. The candidate's acknowledgment set
        // over existing nodes is exactly its parent's representing graph.
        std::set<BankId> supporters;
        parent_entry.reach.for_each([&](std::size_t i) {
            const auto& e = g.entry(i);
            if (e.node.kind == NodeKind::Init) return;
            if (supporters.count(e.node.bank)) return;
            if (e.reach.test(anchor)) supporters.insert(e.node.bank);
        });
        const PowerDistribution& power = representing_power(g, refs.parent);
        if (!threshold_met(power, supporters)) {
            std::string who;
            for (const auto& b : supporters) who += to_hex(b.key).substr(0, 8) + ",";
            return Verdict::fail(Cause::ThresholdNotMet,
                                 "support " + std::to_string(supporting_power(power, supporters)) +
                                     "/" + std::to_string(power.total) + " by {" + who + "}");
        }
        return Verdict::ok();
    }
    default:
        return Verdict::fail(Cause::Grammar, "unexpected node kind");
    }
}

bool Evaluator::is_proper(const Blockgraph& g) const
{
    const auto& closes = g.close_indices();
    for (std::size_t i = 0; i < closes.size(); ++i) {
        for (std::size_t j = i + 1; j < closes.size(); ++j) {
            const auto& a = g.entry(closes[i]);
            const auto& b = g.entry(closes[j]);
            if (!a.reach.test(b.matching_start) && !b.reach.test(a.matching_start)) return false;
        }
    }
    const auto& accepts = g.accept_indices();
    for (std::size_t i = 0; i < accepts.size(); ++i) {
        for (std::size_t j = i + 1; j < accepts.size(); ++j) {
            const auto& a = g.entry(accepts[i]);
            const auto& b = g.entry(accepts[j]);
            if (!a.reach.test(b.matching_close) && !b.reach.test(a.matching_close)) return false;
        }
    }
    return true;
}

bool Evaluator::extension_proper(const Blockgraph& g, const Node& v) const
{
    if (v.kind != NodeKind::Close && v.kind != NodeKind::Accept) return true;
    auto pi = g.index_of(v.parent);
    if (!pi) throw UnresolvedRef("extension_proper: parent not in graph");
    const Bitset& candidate_reach = g.entry(*pi).reach;
    if (v.kind == NodeKind::Close) {
        std::size_t own_start = candidate_matching_start(g, v);
        for (std::size_t ci : g.close_indices()) {
            const auto& other = g.entry(ci);
            if (!candidate_reach.test(other.matching_start) && !other.reach.test(own_start))
                return false;
        }
    } else {
        std::size_t own_close = candidate_matching_close(g, v);
        for (std::size_t ai : g.accept_indices()) {
            const auto& other = g.entry(ai);
            if (!candidate_reach.test(other.matching_close) && !other.reach.test(own_close))
                return false;
        }
    }
    return true;
}

bool Evaluator::admissible_extension(const Blockgraph& g, const Node& v)
{
    if (g.contains(node_hash(v))) return false; // duplicates are not extensions
    Verdict verdict = validate_node(g, v);
    if (!verdict.valid) return false;
    return extension_proper(g, v);
}

Verdict validate_node(const Blockgraph& g, const Node& v, SharedPowerRule rule)
{
    Evaluator ev(g.has_init() ? g.init_hash() : Digest{}, g.scheme(), rule);
    return ev.validate_node(g, v);
}

bool is_proper(const Blockgraph& g)
{
    Evaluator ev(g.has_init() ? g.init_hash() : Digest{}, g.scheme(), SharedPowerRule::MaxAmount);
    return ev.is_proper(g);
}

bool admissible_extension(const Blockgraph& g, const Node& v, SharedPowerRule rule)
{
    Evaluator ev(g.has_init() ? g.init_hash() : Digest{}, g.scheme(), rule);
    if (!ev.admissible_extension(g, v)) return false;
    return ev.is_proper(g); // a proper base is part of the one-shot contract
}

} // namespace bgl
