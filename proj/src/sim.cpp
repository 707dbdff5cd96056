#include "bgl/sim.hpp"

#include <algorithm>

#include "bgl/balance.hpp"
#include "bgl/codec.hpp"

namespace bgl {

namespace {

struct PendingMessage {
    std::uint64_t id = 0;
    std::uint64_t sent_at = 0;
    std::uint64_t deliver_at = 0;
    Message msg;
};

struct UserRuntime {
    UserSpec spec;
    KeyPair keys;
    std::string current_home;
    std::map<AccountId, std::uint64_t> next_seq;
    std::map<AccountId, Money> tracked; // submitted-amount bookkeeping only
    std::size_t next_action = 0;
    std::optional<Transaction> last_tx;
};

struct Submission {
    std::uint64_t at = 0;
    std::string user;
    std::string to_bank;
    Transaction tx;
};

struct SimSetup {
    const SignatureScheme* scheme = nullptr;
    SharedPowerRule rule = SharedPowerRule::MaxAmount;
    std::map<std::string, KeyPair> bank_keys;
    Node init;
    std::map<std::string, Money> initial_power; // per bank, for the adversary
    std::vector<UserRuntime> users;
    std::vector<Submission> submissions; // resolved up front, script order
    std::map<Bytes, std::string> bank_names; // pubkey -> name
    std::map<Bytes, std::string> user_names;
};

std::optional<std::pair<Transaction, std::string>> resolve_action(SimSetup& s, UserRuntime& u,
                                                                  const UserAction& a);

SimSetup make_setup(const Scenario& sc)
{
    SimSetup s;
    s.scheme = &scheme_by_name(sc.scheme);
    s.rule = shared_power_rule_by_name(sc.shared_power);
    for (const auto& b : sc.banks) {
        s.bank_keys[b.name] = s.scheme->keygen(b.seed);
        s.bank_names[s.bank_keys[b.name].pub] = b.name;
        s.initial_power[b.name] = 0;
    }
    std::vector<InitEntry> entries;
    for (const auto& u : sc.users) {
        UserRuntime ur;
        ur.spec = u;
        ur.keys = s.scheme->keygen(u.seed);
        ur.current_home = u.home;
        s.user_names[ur.keys.pub] = u.name;
        AccountId home_account{BankId{s.bank_keys[u.home].pub}, UserId{ur.keys.pub}};
        ur.next_seq[home_account] = 1;
        if (u.balance > 0) {
            entries.push_back({home_account, u.balance});
            ur.tracked[home_account] = u.balance;
            s.initial_power[u.home] += u.balance;
        }
        s.users.push_back(std::move(ur));
    }
    std::sort(entries.begin(), entries.end(),
              [](const InitEntry& a, const InitEntry& b) { return a.account < b.account; });
    s.init = make_init_node(std::move(entries));

    // Resolve every scripted action now, in script order, so sequence
    // numbers and bank switches are deterministic regardless of delivery
    // timing. Submissions then race through the network like any message.
    for (auto& ur : s.users) {
        for (const auto& a : ur.spec.actions) {
            auto resolved = resolve_action(s, ur, a);
            if (!resolved) continue;
            s.submissions.push_back({a.at, ur.spec.name, resolved->second, resolved->first});
        }
    }
    return s;
}

std::string account_label(const SimSetup& s, const AccountId& a)
{
    auto u = s.user_names.find(a.user.key);
    auto b = s.bank_names.find(a.bank.key);
    std::string user = u != s.user_names.end() ? u->second : to_hex(a.user.key).substr(0, 8);
    std::string bank = b != s.bank_names.end() ? b->second : to_hex(a.bank.key).substr(0, 8);
    return user + "@" + bank;
}

/// Resolves the user's next scripted action into a concrete submission.
/// Returns nothing when the script is exhausted or the action degenerates
/// (a switch of an empty account).
std::optional<std::pair<Transaction, std::string>> resolve_action(SimSetup& s, UserRuntime& u,
                                                                  const UserAction& a)
{
    auto bank_id = [&](const std::string& name) -> BankId {
        auto it = s.bank_keys.find(name);
        if (it == s.bank_keys.end())
            throw std::invalid_argument("action references unknown bank: " + name);
        return BankId{it->second.pub};
    };
    auto user_id = [&](const std::string& name) -> UserId {
        for (const auto& other : s.users)
            if (other.spec.name == name) return UserId{other.keys.pub};
        throw std::invalid_argument("action references unknown user: " + name);
    };

    AccountId source{bank_id(u.current_home), UserId{u.keys.pub}};
    switch (a.op) {
    case UserAction::Op::Send: {
        AccountId dest{bank_id(a.to_bank.empty() ? u.current_home : a.to_bank),
                       user_id(a.to_user)};
        std::uint64_t seq = a.seq ? *a.seq : u.next_seq[source];
        if (!a.seq) u.next_seq[source] = seq + 1;
        Money amount = a.amount.value_or(0);
        if (amount == 0) throw std::invalid_argument("send action needs an amount");
        Transaction t = make_transaction(*s.scheme, source, dest, amount, seq, u.keys.sec);
        if (u.tracked[source] >= amount) u.tracked[source] -= amount;
        u.last_tx = t;
        return {{t, a.submit_to.empty() ? u.current_home : a.submit_to}};
    }
    case UserAction::Op::Switch: {
        if (a.to_bank.empty()) throw std::invalid_argument("switch action needs to_bank");
        AccountId dest{bank_id(a.to_bank), UserId{u.keys.pub}};
        Money amount = a.amount.value_or(u.tracked[source]);
        std::string new_home = a.to_bank;
        if (amount == 0) {
            u.current_home = new_home; // nothing to move; just re-home
            u.next_seq.emplace(dest, 1);
            return std::nullopt;
        }
        std::uint64_t seq = a.seq ? *a.seq : u.next_seq[source];
        if (!a.seq) u.next_seq[source] = seq + 1;
        Transaction t = make_transaction(*s.scheme, source, dest, amount, seq, u.keys.sec);
        if (u.tracked[source] >= amount) u.tracked[source] -= amount;
        u.tracked[dest] += amount;
        u.next_seq.emplace(dest, 1);
        u.current_home = new_home;
        u.last_tx = t;
        return {{t, a.submit_to.empty() ? new_home : a.submit_to}};
    }
    case UserAction::Op::Resubmit: {
        if (!u.last_tx) throw std::invalid_argument("resubmit without a previous transaction");
        std::string target = a.submit_to.empty() ? u.current_home : a.submit_to;
        return {{*u.last_tx, target}};
    }
    }
    return std::nullopt;
}

/// The pending pool plus the delivery-order policy. Adversarial selection
/// starves high-power banks first but honors a fairness bound so every
/// message still arrives after finitely many events.
class Network {
public:
    Network(const DelaySpec& spec, std::uint64_t seed, std::map<std::string, Money> power)
        : spec_(spec), rng_(seed ^ 0x6e6574u), power_(std::move(power))
    {
    }

    static constexpr std::uint64_t kFairnessBound = 64;

    bool exhaustive_mode() const { return spec_.policy == DelaySpec::Policy::Exhaustive; }

    std::uint64_t send(Message msg, std::uint64_t now)
    {
        std::uint64_t at = now + delay_for(msg);
        return send_scheduled(std::move(msg), now, at);
    }

    /// Direct hand-off at a fixed logical time (user submissions).
    std::uint64_t send_scheduled(Message msg, std::uint64_t now, std::uint64_t deliver_at)
    {
        PendingMessage p;
        p.id = next_id_++;
        p.sent_at = now;
        p.deliver_at = deliver_at;
        p.msg = std::move(msg);
        pending_.push_back(std::move(p));
        return pending_.back().id;
    }

    std::uint64_t scheduled_delivery(std::uint64_t id) const
    {
        for (const auto& p : pending_)
            if (p.id == id) return p.deliver_at;
        return 0;
    }

    bool empty() const { return pending_.empty(); }
    std::size_t size() const { return pending_.size(); }

    PendingMessage pop_next()
    {
        std::size_t chosen = 0;
        if (spec_.policy == DelaySpec::Policy::Adversarial) {
            std::size_t oldest = 0;
            for (std::size_t i = 1; i < pending_.size(); ++i)
                if (pending_[i].id < pending_[oldest].id) oldest = i;
            if (next_id_ - pending_[oldest].id > kFairnessBound) {
                chosen = oldest;
            } else {
                // Oldest message addressed to the weakest bank first: stall
                // the heavyweights whose acknowledgments quorums need.
                for (std::size_t i = 1; i < pending_.size(); ++i) {
                    Money pi = power_value(pending_[i].msg.to);
                    Money pc = power_value(pending_[chosen].msg.to);
                    if (pi < pc || (pi == pc && pending_[i].id < pending_[chosen].id)) chosen = i;
                }
            }
        } else {
            for (std::size_t i = 1; i < pending_.size(); ++i) {
                const auto& a = pending_[i];
                const auto& b = pending_[chosen];
                if (a.deliver_at < b.deliver_at ||
                    (a.deliver_at == b.deliver_at && a.id < b.id))
                    chosen = i;
            }
        }
        PendingMessage out = std::move(pending_[chosen]);
        pending_.erase(pending_.begin() + static_cast<std::ptrdiff_t>(chosen));
        return out;
    }

private:
    Money power_value(const std::string& bank) const
    {
        auto it = power_.find(bank);
        return it == power_.end() ? 0 : it->second;
    }

    std::uint64_t delay_for(const Message& msg)
    {
        switch (spec_.policy) {
        case DelaySpec::Policy::Uniform: return rng_.range(spec_.lo, spec_.hi);
        case DelaySpec::Policy::Fixed: {
            for (const auto& l : spec_.links)
                if (l.from == msg.from && l.to == msg.to) return l.delay;
            return spec_.default_delay;
        }
        case DelaySpec::Policy::Adversarial:
        case DelaySpec::Policy::Exhaustive: return 1; // order chosen elsewhere
        }
        return 1;
    }

    DelaySpec spec_;
    SplitMix64 rng_;
    std::map<std::string, Money> power_;
    std::vector<PendingMessage> pending_;
    std::uint64_t next_id_ = 0;
};

std::unique_ptr<Bank> make_actor(const BankSpec& spec, const SimSetup& s, const Scenario& sc,
                                 std::shared_ptr<Evaluator> eval)
{
    BankConfig cfg;
    cfg.batch_max = sc.limits.batch_max;
    cfg.patience = sc.limits.patience;
    cfg.rule = shared_power_rule_by_name(sc.shared_power);
    KeyPair keys = s.bank_keys.at(spec.name);
    if (spec.behavior.honest())
        return std::make_unique<Bank>(spec.name, keys, s.init, cfg, s.scheme, eval);
    return std::make_unique<ByzantineBank>(spec.name, keys, s.init, cfg, s.scheme, eval,
                                           spec.behavior);
}

nlohmann::json trace_header(const Scenario& sc, std::uint64_t seed, const SimSetup& s)
{
    nlohmann::json banks = nlohmann::json::array();
    for (const auto& b : sc.banks) {
        nlohmann::json bj = {{"name", b.name}, {"key", to_hex(s.bank_keys.at(b.name).pub)}};
        bj["behavior"] = b.behavior.honest() ? "honest" : "byzantine";
        banks.push_back(bj);
    }
    nlohmann::json users = nlohmann::json::array();
    for (const auto& u : s.users)
        users.push_back({{"name", u.spec.name},
                         {"key", to_hex(u.keys.pub)},
                         {"home", u.spec.home},
                         {"balance", u.spec.balance}});
    return {{"scenario", sc.name},
            {"scenario_digest", sc.digest().hex()},
            {"seed", seed},
            {"scheme", sc.scheme},
            {"shared_power", sc.shared_power},
            {"delay_policy", delay_policy_name(sc.delay.policy)},
            {"supply", total_supply(s.init)},
            {"init", to_hex(encode_node(s.init))},
            {"banks", banks},
            {"users", users}};
}

void emit_final_state(Trace& trace, std::uint64_t clock, const SimSetup& s,
                      const std::vector<std::unique_ptr<Bank>>& actors)
{
    for (const auto& actor : actors) {
        const Blockgraph& g = actor->graph();
        auto sheet = total_balance(g);
        nlohmann::json balances;
        for (const auto& [account, value] : sheet.balances)
            balances[account_label(s, account)] = value;
        std::size_t accepted = 0, rejected = 0, pending = 0;
        for (const auto& [t, d] : actor->decisions()) {
            if (d.kind == DecisionKind::Accepted) ++accepted;
            if (d.kind == DecisionKind::Rejected) ++rejected;
            if (d.kind == DecisionKind::Pending) ++pending;
        }
        trace.add(clock, event::kFinalState,
                  {{"bank", actor->name()},
                   {"graph", g.content_digest().hex()},
                   {"nodes", g.size()},
                   {"balances", balances},
                   {"accepted", accepted},
                   {"rejected", rejected},
                   {"pending", pending},
                   {"quarantine", actor->quarantine_size()}});
    }
}

} // namespace

Trace run_simulation(const Scenario& sc, std::optional<std::uint64_t> seed_override)
{
    std::uint64_t seed = seed_override.value_or(sc.seed);
    SimSetup setup = make_setup(sc);
    auto eval = std::make_shared<Evaluator>(node_hash(setup.init), setup.scheme,
                                            shared_power_rule_by_name(sc.shared_power));

    std::vector<std::unique_ptr<Bank>> actors;
    std::vector<std::string> names;
    for (const auto& b : sc.banks) names.push_back(b.name);
    for (const auto& b : sc.banks) actors.push_back(make_actor(b, setup, sc, eval));
    for (auto& a : actors) a->set_peers(names);
    auto actor_by_name = [&](const std::string& name) -> Bank* {
        for (auto& a : actors)
            if (a->name() == name) return a.get();
        return nullptr;
    };

    Trace trace;
    trace.header = trace_header(sc, seed, setup);
    std::uint64_t clock = 0;
    auto sink = [&](const char* kind, nlohmann::json data) {
        trace.add(clock, kind, std::move(data));
    };

    Network net(sc.delay, seed, setup.initial_power);

    // Broadcast expansion and send bookkeeping.
    auto dispatch = [&](std::vector<Message> msgs) {
        for (auto& m : msgs) {
            std::vector<std::string> targets;
            if (m.to == "*") {
                for (const auto& n : names)
                    if (n != m.from) targets.push_back(n);
            } else {
                targets.push_back(m.to);
            }
            for (const auto& t : targets) {
                Message copy = m;
                copy.to = t;
                std::uint64_t id = net.send(std::move(copy), clock);
                trace.add(clock, event::kMessageSent,
                          {{"id", id},
                           {"from", m.from},
                           {"to", t},
                           {"kind", message_kind_name(m.kind)},
                           {"deliver_at", net.scheduled_delivery(id)}});
            }
        }
    };

    // Every scripted submission enters the pool at its scheduled time; user
    // hand-offs to their bank are direct (no link delay).
    for (const auto& sub : setup.submissions) {
        Message m;
        m.kind = Message::Kind::UserTx;
        m.from = "user:" + sub.user;
        m.to = sub.to_bank;
        m.tx = sub.tx;
        std::uint64_t id = net.send_scheduled(std::move(m), 0, sub.at);
        trace.add(0, event::kUserTxSubmitted,
                  {{"id", id},
                   {"user", sub.user},
                   {"bank", sub.to_bank},
                   {"tx", tx_hash(sub.tx).hex()},
                   {"bytes", to_hex(encode_transaction(sub.tx))},
                   {"at", sub.at}});
    }

    auto run_actor_steps = [&](Bank* bank, bool idle) {
        bool progressed = false;
        bool first = true;
        while (bank->active() && bank->step(sink, first && idle)) {
            progressed = true;
            first = false;
        }
        dispatch(bank->take_outbox());
        return progressed;
    };

    bool budget_hit = false;
    while (true) {
        if (trace.events.size() >= sc.limits.max_events) {
            budget_hit = true;
            break;
        }
        if (net.empty()) {
            // Idle rounds: let banks re-evaluate, possibly creating new
            // traffic; quiesce when a full silent round changes nothing.
            bool progressed = false;
            for (auto& a : actors) progressed |= run_actor_steps(a.get(), true);
            if (net.empty() && !progressed) break;
            continue;
        }
        PendingMessage p = net.pop_next();
        clock = std::max(clock + 1, p.deliver_at);
        Bank* target = actor_by_name(p.msg.to);
        bool ignored = target == nullptr || !target->active();
        trace.add(clock, event::kMessageDelivered,
                  {{"id", p.id},
                   {"from", p.msg.from},
                   {"to", p.msg.to},
                   {"kind", message_kind_name(p.msg.kind)},
                   {"ignored", ignored}});
        if (!ignored) {
            target->on_message(p.msg, sink);
            dispatch(target->take_outbox());
            run_actor_steps(target, false);
        }
    }

    trace.truncated = budget_hit;
    emit_final_state(trace, clock, setup, actors);
    return trace;
}

// ---------------------------------------------------------------------------
// Exhaustive schedule enumeration (honest scenarios, toy scale).

namespace {

// Bank and pool state of one enumeration branch. The trace itself lives in
// the enumerator as an append/rewind stack; copying it per branch would
// dominate the runtime.
struct XState {
    std::vector<Bank> banks;
    std::vector<PendingMessage> pending;
    std::uint64_t clock = 0;
    std::uint64_t next_id = 0;
};

class Exhauster {
public:
    Exhauster(const Scenario& sc, const TraceJudge& judge, std::uint64_t cap)
        : sc_(sc), judge_(judge), cap_(cap), setup_(make_setup(sc))
    {
        eval_ = std::make_shared<Evaluator>(node_hash(setup_.init), setup_.scheme,
                                            shared_power_rule_by_name(sc.shared_power));
    }

    ExhaustiveResult run()
    {
        XState root;
        BankConfig cfg;
        cfg.batch_max = sc_.limits.batch_max;
        cfg.patience = sc_.limits.patience;
        cfg.rule = shared_power_rule_by_name(sc_.shared_power);
        std::vector<std::string> names;
        for (const auto& b : sc_.banks) names.push_back(b.name);
        for (const auto& b : sc_.banks) {
            if (!b.behavior.honest())
                throw std::invalid_argument("exhaustive mode supports honest banks only");
            root.banks.emplace_back(b.name, setup_.bank_keys.at(b.name), setup_.init, cfg,
                                    setup_.scheme, eval_);
            root.banks.back().set_peers(names);
        }
        trace_.header = trace_header(sc_, sc_.seed, setup_);
        for (const auto& sub : setup_.submissions) {
            PendingMessage p;
            p.id = root.next_id++;
            p.sent_at = 0;
            p.deliver_at = sub.at;
            p.msg.kind = Message::Kind::UserTx;
            p.msg.from = "user:" + sub.user;
            p.msg.to = sub.to_bank;
            p.msg.tx = sub.tx;
            trace_.add(0, event::kUserTxSubmitted,
                       {{"id", p.id},
                        {"user", sub.user},
                        {"bank", sub.to_bank},
                        {"tx", tx_hash(sub.tx).hex()},
                        {"bytes", to_hex(encode_transaction(sub.tx))},
                        {"at", sub.at}});
            root.pending.push_back(std::move(p));
        }
        visit(root);
        return std::move(result_);
    }

private:
    void dispatch(XState& st, std::vector<Message> msgs)
    {
        for (auto& m : msgs) {
            std::vector<std::string> targets;
            if (m.to == "*") {
                for (const auto& b : st.banks)
                    if (b.name() != m.from) targets.push_back(b.name());
            } else {
                targets.push_back(m.to);
            }
            for (const auto& t : targets) {
                PendingMessage p;
                p.id = st.next_id++;
                p.sent_at = st.clock;
                p.deliver_at = st.clock;
                p.msg = m;
                p.msg.to = t;
                trace_.add(st.clock, event::kMessageSent,
                           {{"id", p.id},
                            {"from", m.from},
                            {"to", t},
                            {"kind", message_kind_name(m.kind)},
                            {"deliver_at", p.deliver_at}});
                st.pending.push_back(std::move(p));
            }
        }
    }

    Bank* bank_of(XState& st, const std::string& name)
    {
        for (auto& b : st.banks)
            if (b.name() == name) return &b;
        return nullptr;
    }

    void step_bank(XState& st, Bank& b, bool idle)
    {
        auto sink = [&](const char* kind, nlohmann::json data) {
            trace_.add(st.clock, kind, std::move(data));
        };
        bool first = true;
        while (b.step(sink, first && idle)) first = false;
        dispatch(st, b.take_outbox());
    }

    void finalize(XState st)
    {
        // Quiescence: idle rounds may still create traffic; recurse if so.
        std::size_t mark = trace_.events.size();
        while (true) {
            bool progressed = false;
            for (auto& b : st.banks) {
                auto sink = [&](const char* kind, nlohmann::json data) {
                    trace_.add(st.clock, kind, std::move(data));
                };
                bool first = true;
                while (b.step(sink, first)) {
                    progressed = true;
                    first = false;
                }
                dispatch(st, b.take_outbox());
            }
            if (!st.pending.empty()) {
                visit(st);
                trace_.events.resize(mark);
                return;
            }
            if (!progressed) break;
        }
        result_.schedules += 1;
        std::vector<std::unique_ptr<Bank>> finals;
        for (auto& b : st.banks) finals.push_back(std::make_unique<Bank>(b));
        emit_final_state(trace_, st.clock, setup_, finals);
        auto failures = judge_(trace_);
        if (!failures.empty()) {
            result_.failures += 1;
            for (const auto& f : failures)
                if (std::find(result_.failed_properties.begin(), result_.failed_properties.end(),
                              f) == result_.failed_properties.end())
                    result_.failed_properties.push_back(f);
            if (!result_.first_failure) result_.first_failure = trace_;
        }
        trace_.events.resize(mark);
    }

    Digest state_key(const XState& st) const
    {
        Bytes acc;
        for (const auto& b : st.banks) {
            Digest d = b.state_digest();
            acc.insert(acc.end(), d.bytes.begin(), d.bytes.end());
        }
        // Pending pool as a multiset of message contents; delivery times are
        // cosmetic here since the enumeration tries every order anyway.
        std::vector<Bytes> msgs;
        for (const auto& p : st.pending) {
            Bytes m;
            m.push_back(static_cast<std::uint8_t>(p.msg.kind));
            m.insert(m.end(), p.msg.from.begin(), p.msg.from.end());
            m.push_back(0);
            m.insert(m.end(), p.msg.to.begin(), p.msg.to.end());
            m.push_back(0);
            for (const auto& n : p.msg.nodes) {
                Digest h = node_hash(n);
                m.insert(m.end(), h.bytes.begin(), h.bytes.end());
            }
            for (const auto& r : p.msg.requests) m.insert(m.end(), r.bytes.begin(), r.bytes.end());
            if (p.msg.tx) {
                Digest h = tx_hash(*p.msg.tx);
                m.insert(m.end(), h.bytes.begin(), h.bytes.end());
            }
            msgs.push_back(std::move(m));
        }
        std::sort(msgs.begin(), msgs.end());
        for (const auto& m : msgs) acc.insert(acc.end(), m.begin(), m.end());
        return sha256(acc);
    }

    void visit(const XState& st)
    {
        if (result_.capped || result_.schedules >= cap_) {
            result_.capped = true;
            return;
        }
        if (st.pending.empty()) {
            finalize(st);
            return;
        }
        // Identical bank states plus an identical pending pool evolve
        // identically; every schedule through this configuration has already
        // been verified the first time it was reached.
        if (!visited_.insert(state_key(st)).second) {
            result_.pruned += 1;
            return;
        }
        // Deterministic branch order: ascending message id.
        std::vector<std::size_t> order(st.pending.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return st.pending[a].id < st.pending[b].id;
        });
        for (std::size_t pick : order) {
            if (result_.capped) return;
            XState next = st;
            std::size_t mark = trace_.events.size();
            PendingMessage p = next.pending[pick];
            next.pending.erase(next.pending.begin() + static_cast<std::ptrdiff_t>(pick));
            next.clock = std::max(next.clock + 1, p.deliver_at);
            trace_.add(next.clock, event::kMessageDelivered,
                       {{"id", p.id},
                        {"from", p.msg.from},
                        {"to", p.msg.to},
                        {"kind", message_kind_name(p.msg.kind)},
                        {"ignored", false}});
            Bank* target = bank_of(next, p.msg.to);
            if (target) {
                auto sink = [&](const char* kind, nlohmann::json data) {
                    trace_.add(next.clock, kind, std::move(data));
                };
                target->on_message(p.msg, sink);
                dispatch(next, target->take_outbox());
                step_bank(next, *target, false);
            }
            visit(next);
            trace_.events.resize(mark);
        }
    }

    const Scenario& sc_;
    const TraceJudge& judge_;
    std::uint64_t cap_;
    SimSetup setup_;
    std::shared_ptr<Evaluator> eval_;
    ExhaustiveResult result_;
    std::set<Digest> visited_;
    Trace trace_; // shared append/rewind stack across the search
};

} // namespace

ExhaustiveResult run_exhaustive(const Scenario& sc, const TraceJudge& judge,
                                std::uint64_t max_schedules)
{
    Exhauster ex(sc, judge, max_schedules);
    return ex.run();
}

// ---------------------------------------------------------------------------
// Byzantine actor.

ByzantineBank::ByzantineBank(std::string name, KeyPair keys, Node init, BankConfig cfg,
                             const SignatureScheme* scheme, std::shared_ptr<Evaluator> eval,
                             ByzBehavior behavior)
    : Bank(std::move(name), std::move(keys), std::move(init), cfg, scheme, std::move(eval)),
      behavior_(std::move(behavior))
{
    tolerate_invalid_creations_ = true;
}

void ByzantineBank::on_user_transaction(const Transaction& t, const TraceSink& trace)
{
    if (stopped_) return;
    Bank::on_user_transaction(t, trace);
}

void ByzantineBank::on_message(const Message& m, const TraceSink& trace)
{
    if (stopped_) return;
    Bank::on_message(m, trace);
}

void ByzantineBank::on_own_node_created(const TraceSink& trace)
{
    ++own_nodes_created_;
    if (behavior_.stop_after_own_nodes && own_nodes_created_ >= *behavior_.stop_after_own_nodes &&
        !stopped_) {
        stopped_ = true;
        trace(event::kBankStopped, {{"bank", name_}, {"after_own_nodes", own_nodes_created_}});
    }
}

std::vector<Message> ByzantineBank::take_outbox()
{
    auto msgs = Bank::take_outbox();
    if (behavior_.mode != ByzBehavior::Mode::Withhold || behavior_.withhold_targets.empty())
        return msgs;
    // Withholding: expand broadcasts ourselves, skipping the targets. The
    // network cannot tell deliberate silence from delay.
    std::vector<Message> out;
    for (auto& m : msgs) {
        if (m.to != "*") {
            bool withheld = false;
            for (const auto& t : behavior_.withhold_targets)
                if (t == m.to) withheld = true;
            if (!withheld) out.push_back(std::move(m));
            continue;
        }
        for (const auto& peer : peers_) {
            if (peer == name_) continue;
            bool withheld = false;
            for (const auto& t : behavior_.withhold_targets)
                if (t == peer) withheld = true;
            if (withheld) continue;
            Message copy = m;
            copy.to = peer;
            out.push_back(std::move(copy));
        }
    }
    return out;
}

void ByzantineBank::send_to(const std::vector<std::string>& recipients, const Node& n)
{
    std::vector<std::string> targets = recipients;
    if (targets.empty()) {
        for (const auto& p : peers_)
            if (p != name_) targets.push_back(p);
    }
    for (const auto& r : targets) {
        if (r == name_) continue;
        Message m;
        m.kind = Message::Kind::NewNode;
        m.from = name_;
        m.to = r;
        m.nodes = {n};
        outbox_.push_back(std::move(m));
    }
}

Digest ByzantineBank::adopt_branch(Node n, Branch& br, const TraceSink& trace)
{
    Digest h = node_hash(n);
    auto res = graph_.insert(n);
    if (!res.inserted()) throw std::logic_error("byzantine branch node failed insertion");
    trace(event::kNodeCreated, {{"bank", name_},
                                {"node", h.hex()},
                                {"kind", node_kind_name(n.kind)},
                                {"seq", n.seq},
                                {"bytes", to_hex(encode_node(n))},
                                {"rival", true}});
    br.head = h;
    br.next_seq = n.seq + 1;
    br.own_nodes.push_back(*graph_.index_of(h));
    send_to(br.recipients, n);
    ++own_nodes_created_;
    return h;
}

bool ByzantineBank::split_starts(const TraceSink& trace)
{
    if (mempool_.size() < 2) return false;
    // Alternating split of the mempool into the two rival transaction sets.
    std::vector<Transaction> txs_a, txs_b;
    std::size_t i = 0;
    for (const auto& t : mempool_) {
        if (i % 2 == 0)
            txs_a.push_back(t);
        else
            txs_b.push_back(t);
        ++i;
    }
    mempool_.clear();

    Node sa = make_own(NodeKind::Start);
    sa.txs = txs_a;
    sign(sa);
    Node sb = make_own(NodeKind::Start);
    sb.txs = txs_b;
    sign(sb);

    branches_[0].recipients = behavior_.partition_a;
    branches_[1].recipients = behavior_.partition_b;
    Digest ha = adopt_branch(std::move(sa), branches_[0], trace);
    Digest hb = adopt_branch(std::move(sb), branches_[1], trace);
    branches_[0].open_start = ha;
    branches_[1].open_start = hb;
    split_ = true;
    return true;
}

bool ByzantineBank::branch_step(Branch& mine, const Branch& other, const TraceSink& trace)
{
    if (mine.done) return false;
    bool progressed = false;

    // Acknowledge foreign news that has not seen the rival branch; pulling
    // in anything that did would prove our own equivocation and void the
    // node.
    std::size_t head_idx = *graph_.index_of(mine.head);
    const Bitset& seen = graph_.reach(head_idx);
    std::vector<std::size_t> candidates;
    for (std::size_t n = 0; n < graph_.size(); ++n) {
        if (seen.test(n)) continue;
        if (graph_.entry(n).node.bank == id_) continue;
        bool contaminated = false;
        for (std::size_t own : other.own_nodes)
            if (graph_.reach(n).test(own)) {
                contaminated = true;
                break;
            }
        if (!contaminated) candidates.push_back(n);
    }
    std::vector<std::size_t> tops;
    for (std::size_t c : candidates) {
        bool covered = false;
        for (std::size_t d : candidates)
            if (d != c && graph_.reach(d).test(c)) covered = true;
        if (!covered) tops.push_back(c);
    }
    if (!tops.empty()) {
        Node u;
        u.kind = NodeKind::Update;
        u.bank = id_;
        u.seq = mine.next_seq;
        u.parent = mine.head;
        for (std::size_t t : tops) u.refs.push_back(graph_.ref_to(t));
        sign(u);
        if (eval_->validate_node(graph_, u).valid) {
            adopt_branch(std::move(u), mine, trace);
            progressed = true;
        }
    }

    if (mine.open_start && !mine.open_close) {
        Node c;
        c.kind = NodeKind::Close;
        c.bank = id_;
        c.seq = mine.next_seq;
        c.parent = mine.head;
        sign(c);
        if (eval_->validate_node(graph_, c).valid) {
            mine.open_close = adopt_branch(std::move(c), mine, trace);
            progressed = true;
        }
    }
    if (mine.open_close) {
        Node a;
        a.kind = NodeKind::Accept;
        a.bank = id_;
        a.seq = mine.next_seq;
        a.parent = mine.head;
        sign(a);
        if (eval_->validate_node(graph_, a).valid) {
            adopt_branch(std::move(a), mine, trace);
            mine.done = true;
            progressed = true;
        }
    }
    return progressed;
}

bool ByzantineBank::force_update(const TraceSink& trace)
{
    // Reference whatever is new regardless of usefulness: the extra chain
    // link is what lets a rival branch one node below the head.
    auto heads = unacknowledged_heads();
    if (heads.empty()) return false;
    Node u = make_own_update(heads);
    sign(u);
    if (!eval_->validate_node(graph_, u).valid) return false;
    adopt_own(std::move(u), trace);
    return true;
}

bool ByzantineBank::phase_update(const TraceSink& trace)
{
    if (fired_ || (behavior_.mode != ByzBehavior::Mode::EquivClose &&
                   behavior_.mode != ByzBehavior::Mode::EquivAccept))
        return Bank::phase_update(trace);

    // The rival pair needs the quorum threshold met at two consecutive own
    // chain links, so the attacker keeps one unreferenced node parked as
    // fuel for the second link: pre-quorum it parks a support-irrelevant
    // head, and at the pivotal bundle it references only what the threshold
    // needs.
    auto heads = unacknowledged_heads();
    if (heads.empty()) return false;

    // Track the support window of the current stage; for the accept attack
    // the parking starts while the block is still open so fuel survives
    // into the post-close stage.
    std::size_t anchor = Blockgraph::kNone;
    if (open_close_)
        anchor = *graph_.index_of(*open_close_);
    else if (open_start_)
        anchor = *graph_.index_of(*open_start_);
    if (anchor == Blockgraph::kNone) return Bank::phase_update(trace);
    if (behavior_.mode == ByzBehavior::Mode::EquivClose && open_close_)
        return Bank::phase_update(trace); // the close pair already fired or failed

    auto threshold_with = [&](const Bitset& mask) {
        GraphView view{&graph_, &mask};
        return threshold_met(voting_power(view, cfg_.rule), supporters_with(mask, anchor));
    };
    const Bitset& base = graph_.reach(head_index());
    if (threshold_with(base)) return false; // ready to fire; keep fuel parked

    Bitset full = base;
    for (std::size_t h : heads) full |= graph_.reach(h);

    std::vector<std::size_t> kept;
    if (threshold_with(full)) {
        // pivotal bundle: shortest prefix that crosses the line
        Bitset trial = base;
        for (std::size_t h : heads) {
            if (threshold_with(trial)) break;
            trial |= graph_.reach(h);
            kept.push_back(h);
        }
    } else {
        // park one head the support window does not need
        kept = heads;
        if (heads.size() >= 2) {
            auto support_full = supporters_with(full, anchor);
            for (std::size_t skip = heads.size(); skip-- > 0;) {
                Bitset trial = base;
                std::vector<std::size_t> rest;
                for (std::size_t i = 0; i < heads.size(); ++i) {
                    if (i == skip) continue;
                    trial |= graph_.reach(heads[i]);
                    rest.push_back(heads[i]);
                }
                if (supporters_with(trial, anchor) == support_full) {
                    kept = rest;
                    break;
                }
            }
        }
    }
    if (kept.empty()) return Bank::phase_update(trace);
    Node u = make_own_update(kept);
    sign(u);
    if (!eval_->validate_node(graph_, u).valid) return Bank::phase_update(trace);
    adopt_own(std::move(u), trace);
    return true;
}

bool ByzantineBank::try_fire_pair(NodeKind kind, const TraceSink& trace)
{
    Node main = make_own(kind);
    sign(main);
    if (!eval_->validate_node(graph_, main).valid) {
        wait_for_surplus_ = false;
        return false;
    }
    // The rival hangs one link below: same kind, the head's sequence number,
    // the head's parent. Valid only if support was already sufficient there.
    const auto& head_entry = *graph_.entry_of(own_head_);
    Node alt;
    alt.kind = kind;
    alt.bank = id_;
    alt.seq = head_entry.node.seq;
    alt.parent = head_entry.node.parent;
    sign(alt);
    if (!eval_->validate_node(graph_, alt).valid) {
        // Support completed exactly at the head; one surplus update will
        // open the gap the rival needs.
        wait_for_surplus_ = true;
        return false;
    }
    Digest h = node_hash(alt);
    trace(event::kNodeCreated, {{"bank", name_},
                                {"node", h.hex()},
                                {"kind", node_kind_name(alt.kind)},
                                {"seq", alt.seq},
                                {"bytes", to_hex(encode_node(alt))},
                                {"rival", true}});
    send_to(behavior_.alt_recipients, alt);
    ++own_nodes_created_;
    fired_ = true;
    wait_for_surplus_ = false;
    return true;
}

bool ByzantineBank::phase_close(const TraceSink& trace)
{
    if (behavior_.mode != ByzBehavior::Mode::EquivClose || fired_)
        return Bank::phase_close(trace);
    if (!open_start_ || open_close_) return false;
    if (!try_fire_pair(NodeKind::Close, trace)) return false;
    return Bank::phase_close(trace);
}

bool ByzantineBank::phase_accept(const TraceSink& trace)
{
    if (behavior_.mode != ByzBehavior::Mode::EquivAccept || fired_)
        return Bank::phase_accept(trace);
    if (!open_close_) return false;
    if (!try_fire_pair(NodeKind::Accept, trace)) return false;
    return Bank::phase_accept(trace);
}

bool ByzantineBank::step(const TraceSink& trace, bool idle_tick)
{
    if (stopped_) return false;
    if (behavior_.mode != ByzBehavior::Mode::EquivStart) {
        bool progressed = false;
        if (wait_for_surplus_) progressed |= force_update(trace);
        progressed |= Bank::step(trace, idle_tick);
        return progressed;
    }

    // Dual-chain operation: a rival start per partition, then each branch
    // driven independently with partition-pure acknowledgments.
    bool progressed = false;
    if (!split_) {
        progressed |= phase_update(trace);
        progressed |= split_starts(trace);
    } else {
        progressed |= branch_step(branches_[0], branches_[1], trace);
        progressed |= branch_step(branches_[1], branches_[0], trace);
    }
    return progressed;
}

} // namespace bgl
