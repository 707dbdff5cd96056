#include "bgl/balance.hpp"

#include <sstream>

namespace bgl {

bool conflict_in_view(const GraphView& view, const Transaction& t)
{
    const auto* bucket = view.graph->tx_bucket(t.source, t.seq);
    if (!bucket) return false;
    for (const auto& occ : *bucket) {
        if (!conflicting(occ.tx, t)) continue;
        for (std::size_t si : occ.start_indices)
            if (view.in_view(si)) return true;
    }
    return false;
}

std::pair<TxSet, TxSet> applied_transactions(const GraphView& view)
{
    TxSet applied;
    TxSet conflicted;
    const Blockgraph& g = *view.graph;
    for (std::size_t ai : g.accept_indices()) {
        if (!view.in_view(ai)) continue;
        const auto& accept = g.entry(ai);
        const auto& start = g.entry(accept.matching_start);
        const auto& close = g.entry(accept.matching_close);
        GraphView close_subgraph{&g, &close.reach}; // close itself holds no transactions
        for (const auto& t : start.node.txs) {
            if (conflict_in_view(close_subgraph, t)) {
                conflicted.insert(t);
            } else {
                applied.insert(t);
            }
        }
    }
    TxSet rejected;
    for (const auto& t : conflicted)
        if (!applied.count(t)) rejected.insert(t);
    return {std::move(applied), std::move(rejected)};
}

BalanceSheet total_balance(const GraphView& view)
{
    BalanceSheet sheet;
    for (const auto& e : view.graph->init_node().init_payload)
        sheet.balances[e.account] = static_cast<SignedMoney>(e.amount);
    auto [applied, rejected] = applied_transactions(view);
    for (const auto& t : applied) {
        sheet.balances[t.source] -= static_cast<SignedMoney>(t.amount);
        sheet.balances[t.dest] += static_cast<SignedMoney>(t.amount);
    }
    sheet.applied = std::move(applied);
    sheet.rejected_conflicts = std::move(rejected);
    return sheet;
}

std::pair<TxSet, TxSet> applied_transactions(const Blockgraph& g)
{
    return applied_transactions(whole_graph(g));
}

BalanceSheet total_balance(const Blockgraph& g)
{
    return total_balance(whole_graph(g));
}

std::vector<std::size_t> open_start_indices(const GraphView& view)
{
    const Blockgraph& g = *view.graph;
    std::set<std::size_t> closed;
    for (std::size_t ai : g.accept_indices())
        if (view.in_view(ai)) closed.insert(g.entry(ai).matching_start);
    std::vector<std::size_t> open;
    for (std::size_t si : g.start_indices())
        if (view.in_view(si) && !closed.count(si)) open.push_back(si);
    return open;
}

std::string balance_report(const BalanceSheet& sheet)
{
    std::ostringstream os;
    for (const auto& [account, balance] : sheet.balances)
        os << to_hex(account.bank.key).substr(0, 8) << ":" << to_hex(account.user.key).substr(0, 8)
           << " " << balance << "\n";
    return os.str();
}

} // namespace bgl
