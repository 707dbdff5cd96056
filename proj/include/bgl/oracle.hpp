#pragma once

#include "bgl/balance.hpp"
#include "bgl/trace.hpp"

namespace bgl {

struct CheckReport {
    std::string property;
    bool pass = true;
    std::string detail;
    std::optional<std::uint64_t> fail_event; // first offending trace index
    nlohmann::json counterexample;           // replayable: scenario digest, seed, event
    nlohmann::json info;                     // extra measurements (e.g. power shares)
    std::uint64_t snapshots = 0;             // graph states examined

    nlohmann::json to_json() const;
};

// Trace checkers. Each one re-derives its answer from the raw trace with its
// own graph replay; nothing is trusted from the banks' own bookkeeping and
// no balance/reachability/power code is shared with the engines.

/// Every transaction accepted by an honest bank is accepted by all honest
/// banks by the end of a non-truncated trace.
CheckReport check_agreement(const Trace& tr);

/// After every event, every honest bank's books show no negative balance.
CheckReport check_positive_balance(const Trace& tr);

/// Every user transaction delivered to an honest bank carries a terminal
/// decision at that bank by quiescence.
CheckReport check_termination(const Trace& tr);

/// Every rejection at an honest bank is licensed by one of the three
/// permitted conditions, re-evaluated against that bank's graph at decision
/// time.
CheckReport check_rejection_restriction(const Trace& tr);

/// The union of all honest banks' graphs stays proper after every event.
/// `info` reports the worst malicious voting-power share found, so callers
/// can confirm the one-third side condition held (or was deliberately
/// broken).
CheckReport check_proper_always(const Trace& tr);

/// All sent messages are delivered in non-truncated traces.
CheckReport check_eventual_delivery(const Trace& tr);

/// One replay pass running every checker above.
std::vector<CheckReport> run_all_checks(const Trace& tr);

/// Property names violated in a trace; the shape the exhaustive runner needs.
std::vector<std::string> failed_properties(const Trace& tr);

/// Independent recomputation of the ledger balance: explicit per-node
/// ancestry sets and an exhaustive pairwise conflict scan. Must match the
/// balance engine exactly on graphs up to `cap` nodes.
BalanceSheet naive_total_balance(const Blockgraph& g, std::size_t cap = 500);

/// Nodes held by at least one honest bank, in trace order (ancestry-closed).
std::vector<Node> honest_union_nodes(const Trace& tr);

} // namespace bgl
