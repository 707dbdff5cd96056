#include "bgl/oracle.hpp"

#include <algorithm>

#include "bgl/codec.hpp"
#include "bgl/crypto.hpp"
#include "bgl/voting.hpp"

namespace bgl {

nlohmann::json CheckReport::to_json() const
{
    nlohmann::json j;
    j["property"] = property;
    j["pass"] = pass;
    j["detail"] = detail;
    j["snapshots"] = snapshots;
    if (fail_event) j["fail_event"] = *fail_event;
    if (!counterexample.is_null()) j["counterexample"] = counterexample;
    if (!info.is_null()) j["info"] = info;
    return j;
}

namespace {

// Minimal graph replay used by the oracle only. Reachability is a fresh
// depth-first walk per node, balances are recomputed from the definition
// with an exhaustive conflict scan. Deliberately naive; shares no
// computation with the engines it audits.
struct OGraph {
    std::vector<Node> nodes;
    std::map<Digest, std::size_t> index;
    std::vector<Digest> hashes;
    std::vector<Bitset> anc; // ancestors including self
    std::vector<std::size_t> parent_of, start_of, close_of;
    std::vector<std::size_t> starts, closes, accepts;
    // Per accept: the block's transactions with their conflict verdict. The
    // close's ancestry never changes after insertion, so this is fixed.
    std::map<std::size_t, std::vector<std::pair<Transaction, bool>>> accept_verdicts;

    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    bool contains(const Digest& d) const { return index.count(d) != 0; }

    std::size_t insert(const Node& n, const Digest& h)
    {
        std::size_t i = nodes.size();
        index[h] = i;
        nodes.push_back(n);
        hashes.push_back(h);

        Bitset a(i + 1);
        std::vector<std::size_t> stack;
        auto push_dep = [&](const Digest& d) {
            auto it = index.find(d);
            if (it == index.end()) throw std::runtime_error("oracle replay: dangling reference");
            stack.push_back(it->second);
        };
        if (n.kind != NodeKind::Init) {
            push_dep(n.parent);
            for (const auto& r : n.refs) push_dep(r.hash);
        }
        a.set(i);
        while (!stack.empty()) {
            std::size_t v = stack.back();
            stack.pop_back();
            if (a.test(v)) continue;
            a.set(v);
            const Node& m = nodes[v];
            if (m.kind == NodeKind::Init) continue;
            stack.push_back(index.at(m.parent));
            for (const auto& r : m.refs) stack.push_back(index.at(r.hash));
        }
        anc.push_back(std::move(a));

        parent_of.push_back(n.kind == NodeKind::Init ? kNone : index.at(n.parent));
        std::size_t st = kNone, cl = kNone;
        if (n.kind == NodeKind::Close || n.kind == NodeKind::Accept) {
            std::size_t walk = parent_of.back();
            while (walk != kNone) {
                if (nodes[walk].kind == NodeKind::Start) {
                    st = walk;
                    break;
                }
                if (nodes[walk].kind == NodeKind::Close && cl == kNone) cl = walk;
                walk = parent_of[walk];
            }
        }
        start_of.push_back(st);
        close_of.push_back(cl);
        if (n.kind == NodeKind::Start) starts.push_back(i);
        if (n.kind == NodeKind::Close) closes.push_back(i);
        if (n.kind == NodeKind::Accept) {
            accepts.push_back(i);
            auto& verdicts = accept_verdicts[i];
            for (const auto& t : nodes[st].txs)
                verdicts.emplace_back(t, !conflict_within(t, anc[cl]));
        }
        return i;
    }

    bool conflict_within(const Transaction& t, const Bitset& view) const
    {
        for (std::size_t s : starts) {
            if (!view.test(s)) continue;
            for (const auto& other : nodes[s].txs)
                if (conflicting(other, t)) return true;
        }
        return false;
    }

    struct Books {
        std::map<AccountId, SignedMoney> balances;
        std::vector<Transaction> applied;
        std::vector<Transaction> rejected;
    };

    Books books() const
    {
        Books b;
        if (!nodes.empty())
            for (const auto& e : nodes[0].init_payload)
                b.balances[e.account] = static_cast<SignedMoney>(e.amount);
        std::vector<Transaction> conflicted;
        for (std::size_t a : accepts) {
            for (const auto& [t, ok] : accept_verdicts.at(a)) {
                if (!ok) {
                    conflicted.push_back(t);
                    continue;
                }
                if (std::find(b.applied.begin(), b.applied.end(), t) != b.applied.end())
                    continue; // identical duplicate: apply once
                b.applied.push_back(t);
            }
        }
        for (const auto& t : b.applied) {
            b.balances[t.source] -= static_cast<SignedMoney>(t.amount);
            b.balances[t.dest] += static_cast<SignedMoney>(t.amount);
        }
        for (const auto& t : conflicted)
            if (std::find(b.applied.begin(), b.applied.end(), t) == b.applied.end() &&
                std::find(b.rejected.begin(), b.rejected.end(), t) == b.rejected.end())
                b.rejected.push_back(t);
        return b;
    }

    std::vector<std::size_t> open_starts() const
    {
        std::vector<std::size_t> closed;
        for (std::size_t a : accepts) closed.push_back(start_of[a]);
        std::vector<std::size_t> open;
        for (std::size_t s : starts)
            if (std::find(closed.begin(), closed.end(), s) == closed.end()) open.push_back(s);
        return open;
    }

    std::set<BankId> malicious_banks() const
    {
        std::set<BankId> out;
        for (std::size_t i = 1; i < nodes.size(); ++i)
            for (std::size_t j = i + 1; j < nodes.size(); ++j) {
                if (nodes[i].kind == NodeKind::Init || nodes[j].kind == NodeKind::Init) continue;
                if (nodes[i].bank == nodes[j].bank && nodes[i].seq == nodes[j].seq)
                    out.insert(nodes[i].bank);
            }
        return out;
    }

    struct Power {
        std::map<BankId, SignedMoney> solo;
        std::map<std::set<BankId>, SignedMoney> shared;
        SignedMoney total = 0;
    };

    /// Voting power of the sub-view `view` (ancestry-closed), from the
    /// definition: balances per bank, then each account's largest in-transit
    /// amount moved to its coalition.
    Power power_of(const Bitset& view, bool tiered) const
    {
        Power p;
        // balance restricted to the view
        std::map<AccountId, SignedMoney> balances;
        if (!nodes.empty())
            for (const auto& e : nodes[0].init_payload) {
                balances[e.account] = static_cast<SignedMoney>(e.amount);
                p.total += static_cast<SignedMoney>(e.amount);
            }
        std::vector<Transaction> applied;
        for (std::size_t a : accepts) {
            if (!view.test(a)) continue;
            for (const auto& [t, ok] : accept_verdicts.at(a)) {
                if (!ok) continue;
                if (std::find(applied.begin(), applied.end(), t) != applied.end()) continue;
                applied.push_back(t);
            }
        }
        for (const auto& t : applied) {
            balances[t.source] -= static_cast<SignedMoney>(t.amount);
            balances[t.dest] += static_cast<SignedMoney>(t.amount);
        }
        for (const auto& [account, value] : balances) p.solo[account.bank] += value;

        // uncertain transactions per the definition
        std::map<AccountId, std::vector<Transaction>> uncertain;
        for (std::size_t s : starts) {
            if (!view.test(s)) continue;
            bool closed = false;
            for (std::size_t a : accepts)
                if (view.test(a) && start_of[a] == s) closed = true;
            if (closed) continue;
            for (const auto& t : nodes[s].txs) {
                if (nodes[s].bank == t.source.bank) continue;
                if (t.source.bank == t.dest.bank) continue;
                bool settled = false;
                for (const auto& a : applied)
                    if (a.source == t.source && a.seq == t.seq) settled = true;
                if (settled) continue;
                auto& list = uncertain[t.source];
                if (std::find(list.begin(), list.end(), t) == list.end()) list.push_back(t);
            }
        }
        for (auto& [account, txs] : uncertain) {
            std::sort(txs.begin(), txs.end(),
                      [](const Transaction& a, const Transaction& b) {
                          if (a.amount != b.amount) return a.amount < b.amount;
                          return a < b;
                      });
            Money top = txs.back().amount;
            p.solo[account.bank] -= static_cast<SignedMoney>(top);
            if (!tiered) {
                std::set<BankId> coalition{account.bank};
                for (const auto& t : txs) coalition.insert(t.dest.bank);
                p.shared[coalition] += static_cast<SignedMoney>(top);
            } else {
                Money prev = 0;
                for (std::size_t i = 0; i < txs.size(); ++i) {
                    Money tier = txs[i].amount - prev;
                    prev = txs[i].amount;
                    if (tier == 0) continue;
                    std::set<BankId> coalition{account.bank};
                    for (std::size_t j = i; j < txs.size(); ++j)
                        coalition.insert(txs[j].dest.bank);
                    p.shared[coalition] += static_cast<SignedMoney>(tier);
                }
            }
        }
        return p;
    }
};

struct Replay {
    const Trace& tr;
    std::map<Digest, Node> registry;       // node digest -> node (from created bytes)
    std::map<std::uint64_t, Transaction> submitted; // send id -> user transaction
    std::map<Digest, Transaction> tx_by_hash;
    std::set<std::string> honest;
    const SignatureScheme* scheme = nullptr;
    bool tiered = false;

    std::map<std::string, OGraph> bank_graphs; // honest banks only
    OGraph union_graph;

    // per-bank decision log: tx digest -> accepted/rejected
    std::map<std::string, std::map<Digest, std::string>> decisions;
    std::map<std::string, std::set<Digest>> accepted_at;
    // user txs delivered to each honest bank: (bank, tx digest)
    std::vector<std::tuple<std::uint64_t, std::string, Digest>> deliveries;
    std::map<std::string, std::set<Digest>> delivered_txs;

    explicit Replay(const Trace& t) : tr(t)
    {
        scheme = &scheme_by_name(tr.header.value("scheme", "test"));
        tiered = tr.header.value("shared_power", "simple") == std::string("tiered");
        for (const auto& b : tr.header.at("banks"))
            if (b.value("behavior", "honest") == std::string("honest"))
                honest.insert(b.at("name").get<std::string>());
        Node init = decode_node(from_hex(tr.header.at("init").get<std::string>()));
        Digest ih = node_hash(init);
        registry[ih] = init;
        for (const auto& name : honest) bank_graphs[name].insert(init, ih);
        union_graph.insert(init, ih);
        index_registry();
    }

    void index_registry()
    {
        for (const auto& e : tr.events) {
            if (e.kind == event::kNodeCreated) {
                Node n = decode_node(from_hex(e.data.at("bytes").get<std::string>()));
                Digest h = node_hash(n);
                registry[h] = n;
                for (const auto& t : n.txs) tx_by_hash[tx_hash(t)] = t;
            } else if (e.kind == event::kUserTxSubmitted) {
                Transaction t =
                    decode_transaction(from_hex(e.data.at("bytes").get<std::string>()));
                submitted[e.data.at("id").get<std::uint64_t>()] = t;
                tx_by_hash[tx_hash(t)] = t;
            }
        }
    }
};

SignedMoney counted_power(const OGraph::Power& p, const std::set<BankId>& malicious)
{
    // power in honest hands: solo of honest banks plus coalitions with no
    // malicious member
    SignedMoney valid = 0;
    for (const auto& [bank, v] : p.solo)
        if (!malicious.count(bank)) valid += v;
    for (const auto& [coalition, v] : p.shared) {
        bool clean = true;
        for (const auto& b : coalition)
            if (malicious.count(b)) clean = false;
        if (clean) valid += v;
    }
    return valid;
}

CheckReport named_report(const char* name)
{
    CheckReport r;
    r.property = name;
    return r;
}

struct AllChecks {
    CheckReport agreement = named_report("agreement");
    CheckReport positive = named_report("positive-balance");
    CheckReport termination = named_report("termination");
    CheckReport rejection = named_report("rejection-restriction");
    CheckReport proper = named_report("proper-always");
    CheckReport delivery = named_report("eventual-delivery");

    std::vector<CheckReport> list() const
    {
        return {agreement, positive, termination, rejection, proper, delivery};
    }
};

nlohmann::json counterexample_json(const Trace& tr, std::uint64_t event_index,
                                   nlohmann::json extra)
{
    nlohmann::json j = extra;
    j["scenario_digest"] = tr.header.value("scenario_digest", "");
    j["seed"] = tr.header.value("seed", 0ull);
    j["event"] = event_index;
    return j;
}

void run_checks_impl(const Trace& tr, AllChecks& out)
{
    Replay rp(tr);

    std::set<std::uint64_t> sent_ids, delivered_ids;

    auto fail_once = [&](CheckReport& r, std::uint64_t ev, const std::string& detail,
                         nlohmann::json extra = {}) {
        if (!r.pass) return;
        r.pass = false;
        r.fail_event = ev;
        r.detail = detail;
        r.counterexample = counterexample_json(tr, ev, std::move(extra));
    };

    auto bank_insert = [&](const std::string& bank, const Digest& h, std::uint64_t ev) {
        auto rit = rp.registry.find(h);
        if (rit == rp.registry.end())
            throw std::runtime_error("trace mentions a node never created: " + h.hex());
        OGraph& g = rp.bank_graphs.at(bank);
        if (g.contains(h)) return;
        g.insert(rit->second, h);

        // positive balance after this bank's graph changed
        auto books = g.books();
        out.positive.snapshots += 1;
        for (const auto& [account, value] : books.balances) {
            if (value < 0) {
                fail_once(out.positive, ev,
                          "negative balance at " + bank + ": " + std::to_string(value),
                          {{"bank", bank}, {"balance", value}});
                break;
            }
        }

        // union graph growth + properness of the new member
        if (!rp.union_graph.contains(h)) {
            std::size_t idx = rp.union_graph.insert(rit->second, h);
            const Node& n = rp.union_graph.nodes[idx];
            out.proper.snapshots += 1;
            if (n.kind == NodeKind::Close) {
                for (std::size_t other : rp.union_graph.closes) {
                    if (other == idx) continue;
                    bool linked =
                        rp.union_graph.anc[idx].test(rp.union_graph.start_of[other]) ||
                        rp.union_graph.anc[other].test(rp.union_graph.start_of[idx]);
                    if (!linked)
                        fail_once(out.proper, ev, "two closes with unlinked starts",
                                  {{"close_a", h.hex()},
                                   {"close_b", rp.union_graph.hashes[other].hex()}});
                }
            }
            if (n.kind == NodeKind::Accept) {
                for (std::size_t other : rp.union_graph.accepts) {
                    if (other == idx) continue;
                    bool linked =
                        rp.union_graph.anc[idx].test(rp.union_graph.close_of[other]) ||
                        rp.union_graph.anc[other].test(rp.union_graph.close_of[idx]);
                    if (!linked)
                        fail_once(out.proper, ev, "two accepts with unlinked closes",
                                  {{"accept_a", h.hex()},
                                   {"accept_b", rp.union_graph.hashes[other].hex()}});
                }
            }
        }
    };

    for (const auto& e : tr.events) {
        if (e.kind == event::kMessageSent || e.kind == event::kUserTxSubmitted) {
            sent_ids.insert(e.data.at("id").get<std::uint64_t>());
        } else if (e.kind == event::kMessageDelivered) {
            delivered_ids.insert(e.data.at("id").get<std::uint64_t>());
            if (e.data.at("kind").get<std::string>() == "user-tx" &&
                !e.data.value("ignored", false)) {
                const std::string to = e.data.at("to").get<std::string>();
                if (rp.honest.count(to)) {
                    auto it = rp.submitted.find(e.data.at("id").get<std::uint64_t>());
                    if (it != rp.submitted.end() &&
                        rp.scheme->verify(it->second.source.user.key,
                                          tx_signing_payload(it->second), it->second.sig)) {
                        Digest th = tx_hash(it->second);
                        rp.deliveries.emplace_back(e.index, to, th);
                        rp.delivered_txs[to].insert(th);
                    }
                }
            }
        } else if (e.kind == event::kNodeCreated) {
            const std::string bank = e.data.at("bank").get<std::string>();
            if (rp.honest.count(bank))
                bank_insert(bank, Digest::from_hex_str(e.data.at("node").get<std::string>()),
                            e.index);
        } else if (e.kind == event::kNodeInserted) {
            const std::string bank = e.data.at("bank").get<std::string>();
            if (rp.honest.count(bank))
                bank_insert(bank, Digest::from_hex_str(e.data.at("node").get<std::string>()),
                            e.index);
        } else if (e.kind == event::kTxAccepted || e.kind == event::kTxRejected) {
            const std::string bank = e.data.at("bank").get<std::string>();
            if (!rp.honest.count(bank)) continue;
            Digest th = Digest::from_hex_str(e.data.at("tx").get<std::string>());
            if (e.kind == event::kTxAccepted) {
                rp.decisions[bank][th] = "accepted";
                rp.accepted_at[bank].insert(th);
                continue;
            }
            if (rp.decisions[bank].count(th) && rp.decisions[bank][th] == "accepted") {
                fail_once(out.agreement, e.index, "rejection after acceptance at " + bank,
                          {{"bank", bank}, {"tx", th.hex()}});
            }
            rp.decisions[bank][th] = "rejected";

            // Rejection restriction: re-derive the license from this bank's
            // replayed graph, never from the trace's own claims.
            auto txit = rp.tx_by_hash.find(th);
            if (txit == rp.tx_by_hash.end()) {
                fail_once(out.rejection, e.index, "rejected an unknown transaction",
                          {{"bank", bank}, {"tx", th.hex()}});
                continue;
            }
            const Transaction& t = txit->second;
            const OGraph& g = rp.bank_graphs.at(bank);
            auto books = g.books();

            bool licensed = false;
            // (1) an earlier sequence slot of the source is unfilled
            {
                std::set<std::uint64_t> have;
                for (const auto& a : books.applied)
                    if (a.source == t.source) have.insert(a.seq);
                for (std::uint64_t i = 1; i < t.seq && !licensed; ++i)
                    if (!have.count(i)) licensed = true;
            }
            // (2) a different transaction with the same source and seq was issued
            if (!licensed) {
                for (std::size_t s : g.starts) {
                    for (const auto& other : g.nodes[s].txs)
                        if (conflicting(other, t)) licensed = true;
                }
                if (!licensed)
                    for (const auto& [id, other] : rp.submitted)
                        if (rp.delivered_txs[bank].count(tx_hash(other)) &&
                            conflicting(other, t))
                            licensed = true;
            }
            // (3) the source cannot afford it
            if (!licensed) {
                SignedMoney balance = 0;
                auto bit = books.balances.find(t.source);
                if (bit != books.balances.end()) balance = bit->second;
                if (balance < static_cast<SignedMoney>(t.amount)) licensed = true;
            }
            if (!licensed)
                fail_once(out.rejection, e.index, "unlicensed rejection at " + bank,
                          {{"bank", bank}, {"tx", th.hex()}});
        }
    }

    // Agreement: accepted sets must coincide across honest banks.
    if (tr.truncated) {
        for (CheckReport* r : {&out.agreement, &out.termination, &out.delivery})
            if (r->pass) {
                r->pass = false;
                r->detail = "trace truncated before quiescence";
            }
    } else {
        std::set<Digest> all_accepted;
        for (const auto& [bank, set] : rp.accepted_at) all_accepted.insert(set.begin(), set.end());
        for (const auto& name : rp.honest) {
            for (const auto& th : all_accepted) {
                if (!rp.accepted_at[name].count(th)) {
                    fail_once(out.agreement, tr.events.empty() ? 0 : tr.events.back().index,
                              "tx accepted elsewhere but not at " + name,
                              {{"bank", name}, {"tx", th.hex()}});
                }
            }
        }

        // Termination: every delivered user tx has a terminal decision.
        for (const auto& [ev, bank, th] : rp.deliveries) {
            if (!rp.decisions[bank].count(th)) {
                fail_once(out.termination, ev, "undecided transaction at " + bank,
                          {{"bank", bank}, {"tx", th.hex()}});
            }
        }

        // Eventual delivery.
        for (std::uint64_t id : sent_ids) {
            if (!delivered_ids.count(id)) {
                fail_once(out.delivery, tr.events.empty() ? 0 : tr.events.back().index,
                          "message never delivered", {{"message_id", id}});
            }
        }
    }
    out.agreement.snapshots = rp.accepted_at.size();
    out.termination.snapshots = rp.deliveries.size();
    out.delivery.snapshots = sent_ids.size();
    out.rejection.snapshots = tr.events.size();

    // Lemma-2 side condition: worst malicious/shared-with-malicious power
    // share over every node's subgraph of the final union graph.
    {
        auto malicious = rp.union_graph.malicious_banks();
        SignedMoney worst_num = 0, worst_den = 1;
        for (std::size_t i = 0; i < rp.union_graph.nodes.size(); ++i) {
            Bitset view = rp.union_graph.anc[i];
            view.clear(i);
            if (view.count() == 0) continue;
            auto p = rp.union_graph.power_of(view, rp.tiered);
            SignedMoney valid = counted_power(p, malicious);
            SignedMoney invalid = p.total - valid;
            if (invalid * worst_den > worst_num * p.total) {
                worst_num = invalid;
                worst_den = p.total == 0 ? 1 : p.total;
            }
        }
        out.proper.info = {{"malicious_banks", malicious.size()},
                           {"worst_invalid_power_num", worst_num},
                           {"worst_invalid_power_den", worst_den},
                           {"side_condition_holds", 3 * worst_num < worst_den}};
    }
}

} // namespace

CheckReport check_agreement(const Trace& tr)
{
    AllChecks all;
    run_checks_impl(tr, all);
    return all.agreement;
}

CheckReport check_positive_balance(const Trace& tr)
{
    AllChecks all;
    run_checks_impl(tr, all);
    return all.positive;
}

CheckReport check_termination(const Trace& tr)
{
    AllChecks all;
    run_checks_impl(tr, all);
    return all.termination;
}

CheckReport check_rejection_restriction(const Trace& tr)
{
    AllChecks all;
    run_checks_impl(tr, all);
    return all.rejection;
}

CheckReport check_proper_always(const Trace& tr)
{
    AllChecks all;
    run_checks_impl(tr, all);
    return all.proper;
}

CheckReport check_eventual_delivery(const Trace& tr)
{
    AllChecks all;
    run_checks_impl(tr, all);
    return all.delivery;
}

std::vector<CheckReport> run_all_checks(const Trace& tr)
{
    AllChecks all;
    run_checks_impl(tr, all);
    return all.list();
}

std::vector<std::string> failed_properties(const Trace& tr)
{
    std::vector<std::string> out;
    for (const auto& r : run_all_checks(tr))
        if (!r.pass) out.push_back(r.property);
    return out;
}

BalanceSheet naive_total_balance(const Blockgraph& g, std::size_t cap)
{
    if (g.size() > cap)
        throw std::invalid_argument("naive_total_balance: graph exceeds the oracle size cap");
    OGraph og;
    for (std::size_t i = 0; i < g.size(); ++i) og.insert(g.entry(i).node, g.entry(i).hash);
    auto books = og.books();
    BalanceSheet sheet;
    sheet.balances = std::move(books.balances);
    for (const auto& t : books.applied) sheet.applied.insert(t);
    for (const auto& t : books.rejected) sheet.rejected_conflicts.insert(t);
    return sheet;
}

std::vector<Node> honest_union_nodes(const Trace& tr)
{
    Replay rp(tr);
    std::vector<Node> out;
    std::set<Digest> seen;
    Node init = decode_node(from_hex(tr.header.at("init").get<std::string>()));
    out.push_back(init);
    seen.insert(node_hash(init));
    for (const auto& e : tr.events) {
        if (e.kind != event::kNodeCreated && e.kind != event::kNodeInserted) continue;
        const std::string bank = e.data.at("bank").get<std::string>();
        if (!rp.honest.count(bank)) continue;
        Digest h = Digest::from_hex_str(e.data.at("node").get<std::string>());
        if (seen.count(h)) continue;
        auto it = rp.registry.find(h);
        if (it == rp.registry.end()) continue;
        seen.insert(h);
        out.push_back(it->second);
    }
    return out;
}

} // namespace bgl
