#pragma once

#include "bgl/balance.hpp"

namespace bgl {

/// How uncertain (in-transit) money turns into shared voting power.
/// MaxAmount: a user's whole largest uncertain amount is shared by the one
/// coalition of all involved banks. Tiered: the refined scheme where each
/// amount tier is shared only by the banks still in the running for it.
enum class SharedPowerRule { MaxAmount, Tiered };

SharedPowerRule shared_power_rule_by_name(const std::string& name);
const char* shared_power_rule_name(SharedPowerRule rule);

struct PowerDistribution {
    std::map<BankId, SignedMoney> solo;
    std::map<std::set<BankId>, SignedMoney> shared;
    Money total = 0;

    SignedMoney solo_of(const BankId& b) const
    {
        auto it = solo.find(b);
        return it == solo.end() ? 0 : it->second;
    }
};

/// Transactions sitting in open start nodes of a bank that is neither the
/// source nor the destination bank of the transfer, and whose sequence slot
/// is not already settled by an applied transaction.
std::vector<Transaction> uncertain_transactions(const GraphView& view);
std::vector<Transaction> uncertain_transactions(const Blockgraph& g);

/// Per-bank voting power for the view: total balance summed per bank, with
/// each user's in-transit money moved from their bank's solo power to the
/// coalition of banks that might end up holding it. Throws std::logic_error
/// if two uncertain transactions of one account carry different sequence
/// numbers, which cannot happen while all start nodes are valid.
PowerDistribution voting_power(const GraphView& view, SharedPowerRule rule);
PowerDistribution voting_power(const Blockgraph& g, SharedPowerRule rule);

/// Banks owning a node sandwiched between the block's opening node and the
/// terminal: for a close over its start, for an accept over its close.
/// `terminal` must be a close or accept node resolvable in the graph.
std::set<BankId> support_set(const Blockgraph& g, const Digest& terminal);

/// Strictly more than two thirds of the total power: solo power of the
/// supporters plus shared power of coalitions entirely inside the supporter
/// set.
bool threshold_met(const PowerDistribution& dist, const std::set<BankId>& supporters);

/// The supporters' countable power (the left side of the threshold test).
SignedMoney supporting_power(const PowerDistribution& dist, const std::set<BankId>& supporters);

std::string power_report(const PowerDistribution& dist);

} // namespace bgl
