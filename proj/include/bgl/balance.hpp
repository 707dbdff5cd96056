#pragma once

#include <map>
#include <set>

#include "bgl/graph.hpp"

namespace bgl {

using TxSet = std::set<Transaction>;

struct BalanceSheet {
    std::map<AccountId, SignedMoney> balances;
    TxSet applied;
    TxSet rejected_conflicts;

    SignedMoney balance_of(const AccountId& a) const
    {
        auto it = balances.find(a);
        return it == balances.end() ? 0 : it->second;
    }
};

/// True iff some transaction conflicting with t appears in a start node
/// inside the masked view (literal containment: the conflicting
/// transaction's own fate does not matter).
bool conflict_in_view(const GraphView& view, const Transaction& t);

/// The transactions applied by the view: a transaction in a closed block is
/// applied unless the subgraph of the block's close node contains a
/// conflicting transaction; identical copies apply once. Also returns the
/// transactions of accepted blocks that lost to a conflict everywhere.
std::pair<TxSet, TxSet> applied_transactions(const GraphView& view);

/// Initial distribution plus every applied transfer. Pure function of the
/// view; iteration order cannot influence the result because acceptance of
/// each transaction is a property of the graph alone.
BalanceSheet total_balance(const GraphView& view);

/// Convenience overloads over whole graphs.
std::pair<TxSet, TxSet> applied_transactions(const Blockgraph& g);
BalanceSheet total_balance(const Blockgraph& g);

/// Start node indices in the view whose block has no accept in the view.
std::vector<std::size_t> open_start_indices(const GraphView& view);

/// Renders account -> balance lines sorted by account id.
std::string balance_report(const BalanceSheet& sheet);

} // namespace bgl
