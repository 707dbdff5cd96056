#include "bgl/bank.hpp"

#include <algorithm>

#include "bgl/codec.hpp"

namespace bgl {

const char* message_kind_name(Message::Kind k)
{
    switch (k) {
    case Message::Kind::NewNode: return "new-node";
    case Message::Kind::RequestNodes: return "request-nodes";
    case Message::Kind::NodesResponse: return "nodes-response";
    case Message::Kind::UserTx: return "user-tx";
    }
    return "?";
}

nlohmann::json tx_json(const Transaction& t)
{
    return {{"tx", tx_hash(t).hex()},
            {"src", to_hex(t.source.user.key).substr(0, 8)},
            {"seq", t.seq},
            {"amount", t.amount}};
}

Bank::Bank(std::string name, KeyPair keys, Node init, BankConfig cfg,
           const SignatureScheme* scheme, std::shared_ptr<Evaluator> eval)
    : name_(std::move(name)),
      id_{keys.pub},
      keys_(std::move(keys)),
      cfg_(cfg),
      scheme_(scheme),
      eval_(std::move(eval)),
      graph_(std::move(init), scheme)
{
    own_head_ = graph_.init_hash();
}

bool Bank::has_undecided() const
{
    for (const auto& [t, d] : decisions_)
        if (d.kind == DecisionKind::Pending) return true;
    return false;
}

std::size_t Bank::head_index() const
{
    return *graph_.index_of(own_head_);
}

void Bank::on_user_transaction(const Transaction& t, const TraceSink& trace)
{
    if (!verify_transaction(*scheme_, t)) {
        trace(event::kNodeDiscarded,
              {{"bank", name_}, {"what", "user-tx"}, {"reason", "bad-signature"}});
        return;
    }
    if (decisions_.count(t)) return; // duplicate submission
    decisions_[t] = Decision{DecisionKind::Pending, Cause::None, 0, graph_.size()};
    mempool_.push_back(t);
}

void Bank::on_message(const Message& m, const TraceSink& trace)
{
    switch (m.kind) {
    case Message::Kind::UserTx:
        if (m.tx) on_user_transaction(*m.tx, trace);
        return;
    case Message::Kind::NewNode:
    case Message::Kind::NodesResponse: {
        for (const auto& n : m.nodes) try_admit(n, m.from, trace);
        drain_quarantine(trace);
        return;
    }
    case Message::Kind::RequestNodes: {
        // Pull-based sync: answer with the requested nodes plus their whole
        // representing graphs, oldest first, so one response resolves the
        // requester's frontier.
        std::set<std::size_t> include;
        for (const auto& d : m.requests) {
            auto idx = graph_.index_of(d);
            if (!idx) continue;
            graph_.reach(*idx).for_each([&](std::size_t i) {
                if (i != 0) include.insert(i); // everyone has the init node
            });
        }
        if (include.empty()) return;
        Message resp;
        resp.kind = Message::Kind::NodesResponse;
        resp.from = name_;
        resp.to = m.from;
        for (std::size_t i : include) resp.nodes.push_back(graph_.entry(i).node);
        outbox_.push_back(std::move(resp));
        return;
    }
    }
}

bool Bank::try_admit(const Node& n, const std::string& from, const TraceSink& trace)
{
    Digest h = node_hash(n);
    if (graph_.contains(h) || improper_.count(h) || quarantine_.count(h)) return false;
    if (const auto* known = eval_->known_verdict(h); known && !known->valid) return false;

    // Missing ancestry is a sync condition: hold the node and ask the sender.
    std::vector<Digest> needed;
    bool improper_ancestor = false;
    auto probe = [&](const Digest& d) {
        if (graph_.contains(d)) return;
        if (improper_.count(d)) {
            improper_ancestor = true;
            return;
        }
        if (const auto* known = eval_->known_verdict(d); known && !known->valid) return;
        needed.push_back(d);
    };
    if (n.kind != NodeKind::Init) {
        probe(n.parent);
        for (const auto& r : n.refs) probe(r.hash);
    }
    if (improper_ancestor) {
        improper_[h] = n;
        trace(event::kNodeQuarantined, {{"bank", name_},
                                        {"node", h.hex()},
                                        {"reason", "ancestor-held-as-improper"}});
        return false;
    }
    if (!needed.empty()) {
        quarantine_[h] = n;
        trace(event::kNodeQuarantined,
              {{"bank", name_}, {"node", h.hex()}, {"reason", "missing-ancestors"}});
        std::vector<Digest> ask;
        for (const auto& d : needed)
            if (requested_.insert({d, from}).second) ask.push_back(d);
        if (!ask.empty() && from != name_) {
            Message req;
            req.kind = Message::Kind::RequestNodes;
            req.from = name_;
            req.to = from;
            req.requests = std::move(ask);
            outbox_.push_back(std::move(req));
        }
        return false;
    }

    Verdict verdict = eval_->validate_node(graph_, n);
    if (!verdict.valid) {
        trace(event::kNodeDiscarded, {{"bank", name_},
                                      {"node", h.hex()},
                                      {"kind", node_kind_name(n.kind)},
                                      {"cause", cause_name(verdict.cause)},
                                      {"detail", verdict.detail}});
        return false;
    }
    if (!eval_->extension_proper(graph_, n)) {
        improper_[h] = n;
        trace(event::kNodeQuarantined, {{"bank", name_},
                                        {"node", h.hex()},
                                        {"kind", node_kind_name(n.kind)},
                                        {"reason", "would-make-graph-improper"}});
        return false;
    }
    auto res = graph_.insert(n);
    if (!res.inserted()) {
        trace(event::kNodeDiscarded, {{"bank", name_},
                                      {"node", h.hex()},
                                      {"cause", "grammar"},
                                      {"detail", res.reason}});
        return false;
    }
    trace(event::kNodeInserted,
          {{"bank", name_}, {"node", h.hex()}, {"kind", node_kind_name(n.kind)}});
    return true;
}

void Bank::drain_quarantine(const TraceSink& trace)
{
    bool progressed = true;
    while (progressed) {
        progressed = false;
        for (auto it = quarantine_.begin(); it != quarantine_.end();) {
            const Node& n = it->second;
            bool ready = true;
            auto have = [&](const Digest& d) {
                return graph_.contains(d) || improper_.count(d) ||
                       (eval_->known_verdict(d) && !eval_->known_verdict(d)->valid);
            };
            if (!have(n.parent)) ready = false;
            for (const auto& r : n.refs)
                if (!have(r.hash)) ready = false;
            if (!ready) {
                ++it;
                continue;
            }
            Node node = n;
            it = quarantine_.erase(it);
            try_admit(node, name_, trace);
            progressed = true;
        }
    }
}

Node Bank::make_own(NodeKind kind) const
{
    Node n;
    n.kind = kind;
    n.bank = id_;
    n.seq = own_next_seq_;
    n.parent = own_head_;
    return n;
}

std::vector<std::size_t> Bank::unacknowledged_heads() const
{
    const Bitset& seen = graph_.reach(head_index());
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < graph_.size(); ++i)
        if (!seen.test(i)) candidates.push_back(i);
    std::vector<std::size_t> heads;
    for (std::size_t i : candidates) {
        bool covered = false;
        for (std::size_t j : candidates)
            if (j != i && graph_.reach(j).test(i)) {
                covered = true;
                break;
            }
        if (!covered) heads.push_back(i);
    }
    return heads;
}

Node Bank::make_own_update(const std::vector<std::size_t>& ref_indices) const
{
    Node n = make_own(NodeKind::Update);
    for (std::size_t i : ref_indices) n.refs.push_back(graph_.ref_to(i));
    // Canonical reference order: node content must not depend on the
    // incidental insertion order of this replica's store.
    std::sort(n.refs.begin(), n.refs.end());
    return n;
}

void Bank::adopt_own(Node n, const TraceSink& trace)
{
    sign(n);
    Verdict verdict = eval_->validate_node(graph_, n);
    if (!verdict.valid || !eval_->extension_proper(graph_, n))
        throw std::logic_error("bank created a node failing its own validation: " +
                               verdict.detail);
    Digest h = node_hash(n);
    auto res = graph_.insert(n);
    if (!res.inserted()) throw std::logic_error("bank created an uninsertable node");

    // Warn (cosmetically) when directly referencing a fresh node of a bank
    // already known malicious; the node stays valid.
    nlohmann::json warnings = nlohmann::json::array();
    if (n.kind == NodeKind::Update) {
        const Bitset& before = graph_.reach(*graph_.index_of(n.parent));
        for (const auto& r : n.refs)
            if (graph_.malicious_in_view(r.bank, before))
                warnings.push_back(to_hex(r.bank.key).substr(0, 8));
    }
    nlohmann::json data = {{"bank", name_},
                           {"node", h.hex()},
                           {"kind", node_kind_name(n.kind)},
                           {"seq", n.seq},
                           {"bytes", to_hex(encode_node(n))}};
    if (!warnings.empty()) data["references-known-malicious"] = warnings;
    trace(event::kNodeCreated, data);

    own_head_ = h;
    own_next_seq_ = n.seq + 1;
    if (n.kind == NodeKind::Start) open_start_ = h;
    if (n.kind == NodeKind::Close) open_close_ = h;
    if (n.kind == NodeKind::Accept) {
        open_start_.reset();
        open_close_.reset();
    }

    Message msg;
    msg.kind = Message::Kind::NewNode;
    msg.from = name_;
    msg.to = "*";
    msg.nodes = {std::move(n)};
    outbox_.push_back(std::move(msg));

    on_own_node_created(trace);
}

bool Bank::open_block_anywhere() const
{
    return !open_start_indices(whole_graph(graph_)).empty();
}

bool Bank::ack_work_pending() const
{
    // A fresh update is useful while an open block's opener (start, or close
    // awaiting its accept) is not yet acknowledged by our head. Once every
    // open opener is covered, further updates add no support anyone can use,
    // and emitting them anyway would echo between banks forever.
    const Bitset& seen = graph_.reach(head_index());
    std::set<std::size_t> closed_starts, accepted_closes;
    for (std::size_t ai : graph_.accept_indices()) {
        closed_starts.insert(graph_.entry(ai).matching_start);
        accepted_closes.insert(graph_.entry(ai).matching_close);
    }
    for (std::size_t si : graph_.start_indices())
        if (!closed_starts.count(si) && !seen.test(si)) return true;
    for (std::size_t ci : graph_.close_indices())
        if (!accepted_closes.count(ci) && !seen.test(ci)) return true;
    return false;
}

std::set<BankId> Bank::supporters_with(const Bitset& mask, std::size_t anchor) const
{
    std::set<BankId> out;
    mask.for_each([&](std::size_t i) {
        const auto& e = graph_.entry(i);
        if (e.node.kind == NodeKind::Init) return;
        if (out.count(e.node.bank)) return;
        if (e.reach.test(anchor)) out.insert(e.node.bank);
    });
    return out;
}

bool Bank::news_grows_support(const std::vector<std::size_t>& heads) const
{
    // Referencing news is progress when it widens the support window of our
    // pending close (over the start) or accept (over the close).
    if (!open_start_) return false;
    std::size_t anchor =
        open_close_ ? *graph_.index_of(*open_close_) : *graph_.index_of(*open_start_);
    const Bitset& before = graph_.reach(head_index());
    Bitset after = before;
    for (std::size_t h : heads) after |= graph_.reach(h);
    return supporters_with(after, anchor).size() > supporters_with(before, anchor).size();
}

bool Bank::news_unlocks_mempool(const TraceSink&) const
{
    // A pending transaction that fails against our chain's view but passes
    // against everything we know needs the fresher view referenced first.
    if (mempool_.empty()) return false;
    std::size_t head = head_index();
    GraphView chain_view{&graph_, &graph_.reach(head)};
    GraphView full_view = whole_graph(graph_);
    BalanceSheet chain_sheet = total_balance(chain_view);
    BalanceSheet full_sheet = total_balance(full_view);
    for (const auto& t : mempool_) {
        auto dit = decisions_.find(t);
        if (dit != decisions_.end() && dit->second.kind != DecisionKind::Pending) continue;
        if (validate_start_tx(chain_view, chain_sheet, t, id_, nullptr).valid) continue;
        if (validate_start_tx(full_view, full_sheet, t, id_, nullptr).valid) return true;
    }
    return false;
}

bool Bank::phase_update(const TraceSink& trace)
{
    // Acknowledge news only when doing so can advance something: an open
    // opener we have not acknowledged yet, support growth for our own
    // pending block, or a stuck transaction that the fresher view unblocks.
    // Echoing unconditionally would never quiesce.
    auto heads = unacknowledged_heads();
    if (heads.empty()) return false;
    if (!ack_work_pending() && !news_grows_support(heads) && !news_unlocks_mempool(trace))
        return false;
    Node u = make_own_update(heads);
    sign(u);
    if (!eval_->validate_node(graph_, u).valid) {
        if (tolerate_invalid_creations_) return false;
        throw std::logic_error("honest update failed self-validation");
    }
    adopt_own(std::move(u), trace);
    return true;
}

bool Bank::phase_start(const TraceSink& trace)
{
    // Open a block when idle and transactions are ready.
    if (open_start_ || mempool_.empty()) return false;
    std::size_t head = head_index();
    GraphView sub{&graph_, &graph_.reach(head)};
    const BalanceSheet& sheet = eval_->representing_balance(graph_, head);
    BatchContext batch;
    std::vector<Transaction> picked;
    std::set<AccountId> sources;
    for (const auto& t : mempool_) {
        if (picked.size() >= cfg_.batch_max) break;
        auto dit = decisions_.find(t);
        if (dit != decisions_.end() && dit->second.kind != DecisionKind::Pending) continue;
        if (sources.count(t.source)) continue; // one per source, seq chain rule
        if (!validate_start_tx(sub, sheet, t, id_, &batch).valid) continue;
        picked.push_back(t);
        sources.insert(t.source);
        batch.apply(t);
    }
    if (picked.empty()) return false;
    for (const auto& t : picked)
        mempool_.erase(std::find(mempool_.begin(), mempool_.end(), t));
    Node s = make_own(NodeKind::Start);
    s.txs = std::move(picked);
    adopt_own(std::move(s), trace);
    return true;
}

bool Bank::phase_close(const TraceSink& trace)
{
    // Close once the open start has gathered enough support.
    if (!open_start_ || open_close_) return false;
    Node c = make_own(NodeKind::Close);
    sign(c);
    if (!eval_->validate_node(graph_, c).valid || !eval_->extension_proper(graph_, c))
        return false;
    adopt_own(std::move(c), trace);
    return true;
}

bool Bank::phase_accept(const TraceSink& trace)
{
    // Accept once the close has gathered enough support.
    if (!open_close_) return false;
    Node a = make_own(NodeKind::Accept);
    sign(a);
    if (!eval_->validate_node(graph_, a).valid || !eval_->extension_proper(graph_, a))
        return false;
    adopt_own(std::move(a), trace);
    return true;
}

bool Bank::step(const TraceSink& trace, bool idle_tick)
{
    bool progressed = false;
    progressed |= phase_update(trace);
    progressed |= phase_start(trace);
    progressed |= phase_close(trace);
    progressed |= phase_accept(trace);
    refresh_decisions(trace, progressed);
    review_mempool(trace, idle_tick, progressed);
    return progressed;
}

void Bank::refresh_decisions(const TraceSink& trace, bool& progressed)
{
    if (graph_.accept_indices().size() == decided_accepts_) return;
    decided_accepts_ = graph_.accept_indices().size();
    auto [applied, rejected] = applied_transactions(graph_);
    applied_cache_ = applied;
    for (const auto& t : applied) {
        auto& d = decisions_[t];
        if (d.kind == DecisionKind::Accepted) continue;
        d.kind = DecisionKind::Accepted; // terminal; may override an earlier rejection
        d.cause = Cause::None;
        trace(event::kTxAccepted, {{"bank", name_}, {"tx", tx_hash(t).hex()}});
        progressed = true;
    }
    for (const auto& t : rejected) {
        auto& d = decisions_[t];
        if (d.kind != DecisionKind::Pending) continue;
        d.kind = DecisionKind::Rejected;
        d.cause = Cause::ConflictingSeq;
        trace(event::kTxRejected,
              {{"bank", name_}, {"tx", tx_hash(t).hex()}, {"cause", "conflict"}});
        progressed = true;
    }
}

void Bank::review_mempool(const TraceSink& trace, bool idle_tick, bool& progressed)
{
    std::size_t head = head_index();
    GraphView sub{&graph_, &graph_.reach(head)};
    const BalanceSheet& sheet = eval_->representing_balance(graph_, head);

    for (auto it = mempool_.begin(); it != mempool_.end();) {
        const Transaction& t = *it;
        auto& d = decisions_[t];
        if (d.kind != DecisionKind::Pending) {
            it = mempool_.erase(it);
            continue;
        }

        // Immediate rejection: a different transaction with this sequence
        // number is already applied here.
        bool conflict_applied = false;
        for (const auto& a : applied_cache_) {
            if (a.source == t.source && a.seq == t.seq && a != t) {
                conflict_applied = true;
                break;
            }
        }
        if (conflict_applied) {
            d.kind = DecisionKind::Rejected;
            d.cause = Cause::ConflictingSeq;
            trace(event::kTxRejected,
                  {{"bank", name_}, {"tx", tx_hash(t).hex()}, {"cause", "conflict"}});
            progressed = true;
            it = mempool_.erase(it);
            continue;
        }

        Verdict v = validate_start_tx(sub, sheet, t, id_, nullptr);
        if (v.valid) {
            ++it;
            continue; // startable; a later step will batch it
        }

        // Stuck: age only while the network is quiet, so in-flight deposits
        // get every chance to land first, and give up after `patience`
        // quiet-round re-evaluations.
        if (idle_tick) {
            d.age += 1;
            d.eval_graph_size = graph_.size();
        }
        if (d.age > cfg_.patience) {
            d.kind = DecisionKind::Rejected;
            d.cause = v.cause;
            trace(event::kTxRejected, {{"bank", name_},
                                       {"tx", tx_hash(t).hex()},
                                       {"cause", cause_name(v.cause)}});
            progressed = true;
            it = mempool_.erase(it);
            continue;
        }
        ++it;
    }
}

std::vector<Message> Bank::take_outbox()
{
    std::vector<Message> out;
    out.swap(outbox_);
    return out;
}

Digest Bank::state_digest() const
{
    Bytes acc;
    auto put = [&acc](const Digest& d) {
        acc.insert(acc.end(), d.bytes.begin(), d.bytes.end());
    };
    auto put_byte = [&acc](std::uint8_t b) { acc.push_back(b); };
    put(graph_.node_set_digest());
    put(own_head_);
    for (const auto& t : mempool_) put(tx_hash(t));
    put_byte(0xfe);
    for (const auto& [t, d] : decisions_) {
        put(tx_hash(t));
        put_byte(static_cast<std::uint8_t>(d.kind));
        put_byte(static_cast<std::uint8_t>(d.cause));
        put_byte(static_cast<std::uint8_t>(d.age));
    }
    put_byte(0xfd);
    for (const auto& [h, n] : quarantine_) put(h);
    put_byte(0xfc);
    for (const auto& [h, n] : improper_) put(h);
    return sha256(acc);
}

} // namespace bgl
