#pragma once

#include <unordered_map>

#include "bgl/voting.hpp"

namespace bgl {

enum class Cause : std::uint8_t {
    None,
    BadSubgraph,
    SeqGap,
    ConflictingSeq,
    InsufficientBalance,
    ThresholdNotMet,
    SelfMaliceEvident,
    RedundantReference,
    Grammar,
};

const char* cause_name(Cause c);

struct Verdict {
    bool valid = false;
    Cause cause = Cause::None;
    std::string detail;

    static Verdict ok() { return {true, Cause::None, {}}; }
    static Verdict fail(Cause c, std::string detail)
    {
        return {false, c, std::move(detail)};
    }
};

/// Working balance context while validating the transactions of one start
/// node in list order: earlier transactions of the node shift the balances
/// later ones are checked against.
struct BatchContext {
    std::map<AccountId, SignedMoney> deltas;

    SignedMoney delta_of(const AccountId& a) const
    {
        auto it = deltas.find(a);
        return it == deltas.end() ? 0 : it->second;
    }
    void apply(const Transaction& t)
    {
        deltas[t.source] -= static_cast<SignedMoney>(t.amount);
        deltas[t.dest] += static_cast<SignedMoney>(t.amount);
    }
};

/// Validity of one transaction against the subgraph of the start node that
/// would carry it. `sub` must be that subgraph view and `sheet` its total
/// balance.
Verdict validate_start_tx(const GraphView& sub, const BalanceSheet& sheet, const Transaction& t,
                          const BankId& issuing_bank, const BatchContext* batch = nullptr);

/// Convenience form that computes the balance sheet itself.
Verdict validate_start_tx(const GraphView& sub, const Transaction& t, const BankId& issuing_bank);

/// Memoizing judge for node validity. Verdicts, per-node representing-graph
/// balances and power distributions are cached by node digest; validity is a
/// function of a node's representing graph alone, so cached results hold in
/// every graph containing that node. Single-writer.
class Evaluator {
public:
    Evaluator(Digest expected_init, const SignatureScheme* scheme, SharedPowerRule rule);

    SharedPowerRule rule() const { return rule_; }

    /// Full validity judgment of v against g. v may already be inserted or
    /// be a candidate whose parent and references resolve in g. Throws
    /// UnresolvedRef when a reference is neither in g nor known invalid.
    Verdict validate_node(const Blockgraph& g, const Node& v);

    /// Balance / power of the representing graph of an inserted node.
    const BalanceSheet& representing_balance(const Blockgraph& g, std::size_t index);
    const PowerDistribution& representing_power(const Blockgraph& g, std::size_t index);

    /// Pairwise close/start and accept/close connectivity over the whole
    /// graph.
    bool is_proper(const Blockgraph& g) const;

    /// Properness of g extended by candidate v, assuming g itself is proper.
    bool extension_proper(const Blockgraph& g, const Node& v) const;

    /// validate_node(g, v).valid and the extension keeps the graph proper.
    bool admissible_extension(const Blockgraph& g, const Node& v);

    /// Records a node judged invalid so later nodes referencing it resolve
    /// to a bad-subgraph verdict instead of a sync request.
    void remember_verdict(const Digest& d, const Verdict& v);
    const Verdict* known_verdict(const Digest& d) const;

private:
    struct ResolvedRefs {
        std::size_t parent = Blockgraph::kNone;
        std::vector<std::size_t> refs;
        std::vector<Digest> missing;
        const Verdict* invalid_ancestor = nullptr;
    };

    ResolvedRefs resolve(const Blockgraph& g, const Node& v) const;
    Verdict compute(const Blockgraph& g, const Node& v, const Digest& hash);
    void ensure_graph_validated(const Blockgraph& g);

    Digest expected_init_;
    const SignatureScheme* scheme_;
    SharedPowerRule rule_;
    std::map<Digest, Verdict> verdicts_;
    std::map<Digest, BalanceSheet> balances_;
    std::map<Digest, PowerDistribution> powers_;
};

/// One-shot forms for tests and tools; they build a throwaway evaluator.
Verdict validate_node(const Blockgraph& g, const Node& v, SharedPowerRule rule);
bool is_proper(const Blockgraph& g);
bool admissible_extension(const Blockgraph& g, const Node& v, SharedPowerRule rule);

/// The matching start (for close/accept) and close (for accept) of a
/// candidate node not yet inserted, found by walking its parent chain.
std::size_t candidate_matching_start(const Blockgraph& g, const Node& v);
std::size_t candidate_matching_close(const Blockgraph& g, const Node& v);

} // namespace bgl
