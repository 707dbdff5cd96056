#pragma once

#include <functional>

#include "bgl/bank.hpp"
#include "bgl/scenario.hpp"

namespace bgl {

/// Runs a scenario to quiescence on a single logical clock. Identical
/// (scenario, seed) pairs produce byte-identical traces. Every sent message
/// is delivered before quiescence is declared; hitting the event budget
/// marks the trace truncated instead.
Trace run_simulation(const Scenario& sc,
                     std::optional<std::uint64_t> seed_override = std::nullopt);

/// Verdict function over one complete schedule's trace: returns the names of
/// violated properties (empty = all good). Wired up by the caller so the
/// simulator stays independent of the property oracle.
using TraceJudge = std::function<std::vector<std::string>(const Trace&)>;

struct ExhaustiveResult {
    std::uint64_t schedules = 0; // complete delivery orders reached
    std::uint64_t pruned = 0;    // subtrees skipped as already-verified states
    std::uint64_t failures = 0;
    std::vector<std::string> failed_properties;
    std::optional<Trace> first_failure;
    bool capped = false; // enumeration stopped at the schedule cap
};

/// Depth-first enumeration of every delivery order of an all-honest
/// scenario. Only sensible at toy scale (a few banks, a handful of
/// transactions).
ExhaustiveResult run_exhaustive(const Scenario& sc, const TraceJudge& judge,
                                std::uint64_t max_schedules = 200000);

/// Scripted byzantine bank: follows the honest protocol except where its
/// behavior says otherwise. Equivocating variants are broadcast to the
/// configured recipient subsets; the actor tracks rival chain branches of
/// its own inside one graph.
class ByzantineBank final : public Bank {
public:
    ByzantineBank(std::string name, KeyPair keys, Node init, BankConfig cfg,
                  const SignatureScheme* scheme, std::shared_ptr<Evaluator> eval,
                  ByzBehavior behavior);

    bool active() const override { return !stopped_; }
    void on_user_transaction(const Transaction& t, const TraceSink& trace) override;
    void on_message(const Message& m, const TraceSink& trace) override;
    bool step(const TraceSink& trace, bool idle_tick = false) override;
    std::vector<Message> take_outbox() override;

protected:
    bool phase_update(const TraceSink& trace) override;
    bool phase_close(const TraceSink& trace) override;
    bool phase_accept(const TraceSink& trace) override;
    void on_own_node_created(const TraceSink& trace) override;

private:
    struct Branch {
        Digest head;
        std::uint64_t next_seq = 1;
        std::optional<Digest> open_start;
        std::optional<Digest> open_close;
        bool done = false;
        std::vector<std::string> recipients;
        std::vector<std::size_t> own_nodes; // this branch's own-node indices
    };

    bool split_starts(const TraceSink& trace);
    bool branch_step(Branch& mine, const Branch& other, const TraceSink& trace);
    Digest adopt_branch(Node n, Branch& br, const TraceSink& trace);
    void send_to(const std::vector<std::string>& recipients, const Node& n);
    bool force_update(const TraceSink& trace);
    /// Emits the pair: the rival (one chain link below the head) goes to the
    /// alt recipients, the main node is adopted normally. Requires the
    /// candidate to be valid at both the head and its parent.
    bool try_fire_pair(NodeKind kind, const TraceSink& trace);

    ByzBehavior behavior_;
    bool stopped_ = false;
    std::uint64_t own_nodes_created_ = 0;
    bool split_ = false;
    Branch branches_[2];
    bool wait_for_surplus_ = false; // valid at head only; one more update needed
    bool fired_ = false;
};

} // namespace bgl
