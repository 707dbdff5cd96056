#include "bgl/voting.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace bgl {

SharedPowerRule shared_power_rule_by_name(const std::string& name)
{
    if (name == "simple") return SharedPowerRule::MaxAmount;
    if (name == "tiered") return SharedPowerRule::Tiered;
    throw std::invalid_argument("unknown shared-power rule: " + name);
}

const char* shared_power_rule_name(SharedPowerRule rule)
{
    return rule == SharedPowerRule::MaxAmount ? "simple" : "tiered";
}

std::vector<Transaction> uncertain_transactions(const GraphView& view)
{
    const Blockgraph& g = *view.graph;
    auto sheet = total_balance(view);

    TxSet seen;
    std::vector<Transaction> out;
    for (std::size_t si : open_start_indices(view)) {
        const auto& start = g.entry(si);
        const BankId& carrier = start.node.bank;
        for (const auto& t : start.node.txs) {
            if (carrier == t.source.bank) continue; // carried by the source bank itself
            if (t.source.bank == t.dest.bank) continue;
            bool settled = false;
            for (const auto& a : sheet.applied) {
                if (a.source == t.source && a.seq == t.seq) {
                    settled = true;
                    break;
                }
            }
            if (settled) continue;
            if (seen.insert(t).second) out.push_back(t);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<Transaction> uncertain_transactions(const Blockgraph& g)
{
    return uncertain_transactions(whole_graph(g));
}

PowerDistribution voting_power(const GraphView& view, SharedPowerRule rule)
{
    PowerDistribution dist;
    dist.total = view.graph->supply();
    auto sheet = total_balance(view);
    for (const auto& [account, balance] : sheet.balances) dist.solo[account.bank] += balance;

    // Group uncertain transactions per source account.
    std::map<AccountId, std::vector<Transaction>> per_user;
    for (const auto& t : uncertain_transactions(view)) per_user[t.source].push_back(t);

    for (auto& [account, txs] : per_user) {
        for (const auto& t : txs)
            if (t.seq != txs.front().seq)
                throw std::logic_error(
                    "uncertain transactions of one account carry different sequence numbers");

        std::sort(txs.begin(), txs.end(), [](const Transaction& a, const Transaction& b) {
            if (a.amount != b.amount) return a.amount < b.amount;
            return a < b;
        });
        Money largest = txs.back().amount;
        dist.solo[account.bank] -= static_cast<SignedMoney>(largest);

        if (rule == SharedPowerRule::MaxAmount) {
            std::set<BankId> coalition{account.bank};
            for (const auto& t : txs) coalition.insert(t.dest.bank);
            dist.shared[coalition] += static_cast<SignedMoney>(largest);
        } else {
            // Tiered: ascending by amount; the slab between consecutive
            // amounts is shared only with the destinations still able to
            // receive at least that much.
            Money prev = 0;
            for (std::size_t i = 0; i < txs.size(); ++i) {
                Money tier = txs[i].amount - prev;
                prev = txs[i].amount;
                if (tier == 0) continue;
                std::set<BankId> coalition{account.bank};
                for (std::size_t j = i; j < txs.size(); ++j) coalition.insert(txs[j].dest.bank);
                dist.shared[coalition] += static_cast<SignedMoney>(tier);
            }
        }
    }

    // Drop zero entries so reports and comparisons stay canonical.
    for (auto it = dist.shared.begin(); it != dist.shared.end();)
        it = it->second == 0 ? dist.shared.erase(it) : std::next(it);
    return dist;
}

PowerDistribution voting_power(const Blockgraph& g, SharedPowerRule rule)
{
    return voting_power(whole_graph(g), rule);
}

std::set<BankId> support_set(const Blockgraph& g, const Digest& terminal)
{
    auto ti = g.index_of(terminal);
    if (!ti) throw UnresolvedRef("support_set: unresolved terminal node");
    const auto& term = g.entry(*ti);
    std::size_t anchor;
    if (term.node.kind == NodeKind::Close) {
        anchor = term.matching_start;
    } else if (term.node.kind == NodeKind::Accept) {
        anchor = term.matching_close;
    } else {
        throw std::invalid_argument("support_set: terminal must be a close or accept node");
    }
    if (anchor == Blockgraph::kNone)
        throw std::invalid_argument("support_set: terminal has no matching block opener");

    std::set<BankId> supporters;
    term.reach.for_each([&](std::size_t i) {
        const auto& e = g.entry(i);
        if (e.node.kind == NodeKind::Init) return;
        if (supporters.count(e.node.bank)) return;
        if (e.reach.test(anchor)) supporters.insert(e.node.bank);
    });
    return supporters;
}

SignedMoney supporting_power(const PowerDistribution& dist, const std::set<BankId>& supporters)
{
    SignedMoney power = 0;
    for (const auto& b : supporters) power += dist.solo_of(b);
    for (const auto& [coalition, amount] : dist.shared) {
        bool inside = true;
        for (const auto& b : coalition)
            if (!supporters.count(b)) {
                inside = false;
                break;
            }
        if (inside) power += amount;
    }
    return power;
}

bool threshold_met(const PowerDistribution& dist, const std::set<BankId>& supporters)
{
    // Strict: exactly two thirds is not enough.
    return 3 * supporting_power(dist, supporters) > 2 * static_cast<SignedMoney>(dist.total);
}

std::string power_report(const PowerDistribution& dist)
{
    std::ostringstream os;
    os << "total " << dist.total << "\n";
    for (const auto& [bank, power] : dist.solo)
        os << "solo " << to_hex(bank.key).substr(0, 8) << " " << power << "\n";
    for (const auto& [coalition, power] : dist.shared) {
        os << "shared {";
        bool first = true;
        for (const auto& b : coalition) {
            if (!first) os << ",";
            os << to_hex(b.key).substr(0, 8);
            first = false;
        }
        os << "} " << power << "\n";
    }
    return os.str();
}

} // namespace bgl
