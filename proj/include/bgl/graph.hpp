#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bgl/crypto.hpp"
#include "bgl/types.hpp"

namespace bgl {

/// Per-bank chain state after a node, used for the block grammar. A bank's
/// chain alternates Idle -> (Start) Open -> (Close) Closed -> (Accept) Idle,
/// with updates allowed anywhere.
enum class ChainState : std::uint8_t { Idle, Open, Closed };

struct Block {
    Digest start;
    std::optional<Digest> close;
    std::optional<Digest> accept;
    std::vector<Digest> members; // start..accept along the parent chain
};

/// Append-only DAG of signed nodes, one hash-linked chain per bank plus
/// cross-chain update references. Nodes are accepted only when their whole
/// ancestry is already present, so the graph is always closed under
/// ancestry. Structural (grammar) rules are enforced here; economic/voting
/// validity is the validity engine's job.
class Blockgraph {
public:
    struct InsertResult {
        enum class Status { Inserted, MissingAncestors, Rejected, AlreadyPresent };
        Status status = Status::Inserted;
        std::vector<Digest> missing; // unresolved references, for sync
        std::string reason;          // rejection cause

        bool inserted() const { return status == Status::Inserted; }
    };

    /// Storage record for one node.
    struct Entry {
        Node node;
        Digest hash;
        std::size_t index = 0;      // dense insertion index; ancestors precede
        Bitset reach;               // representing graph of this node, self included
        ChainState state = ChainState::Idle;
        std::size_t parent_index = 0;
        std::size_t matching_start = kNone; // for Close/Accept entries
        std::size_t matching_close = kNone; // for Accept entries
    };

    static constexpr std::size_t kNone = static_cast<std::size_t>(-1);

    Blockgraph() = default;
    Blockgraph(Node init, const SignatureScheme* scheme);

    bool empty() const { return entries_.empty(); }
    std::size_t size() const { return entries_.size(); }
    bool has_init() const { return !entries_.empty() && entries_[0].node.kind == NodeKind::Init; }
    const Node& init_node() const { return entries_.at(0).node; }
    Digest init_hash() const { return entries_.at(0).hash; }
    Money supply() const { return supply_; }
    const SignatureScheme* scheme() const { return scheme_; }

    InsertResult insert(const Node& n);

    bool contains(const Digest& d) const { return index_.count(d) != 0; }
    const Node* find(const Digest& d) const;
    std::optional<std::size_t> index_of(const Digest& d) const;
    const Entry& entry(std::size_t index) const { return entries_.at(index); }
    const Entry* entry_of(const Digest& d) const;

    /// True iff w is reachable from v along parent/update edges. Reflexive.
    bool acknowledges(const Digest& v, const Digest& w) const;
    bool acknowledges(const NodeRef& v, const NodeRef& w) const;

    /// Ancestry mask of the node: its representing graph including itself.
    const Bitset& reach(std::size_t index) const { return entries_.at(index).reach; }

    /// Mask for the subgraph of a node: its representing graph minus itself.
    Bitset subgraph_mask(const Digest& v) const;

    /// Materializes the subgraph of v as a standalone graph.
    Blockgraph subgraph(const Digest& v) const;

    /// Blocks of one bank in chain order; forked (equivocating) banks yield
    /// one block per branch, deduplicated.
    std::vector<Block> blocks_of(const BankId& bank) const;

    /// All pairs of distinct nodes of one bank sharing a sequence number.
    std::vector<std::pair<Digest, Digest>> equivocation_evidence(const BankId& bank) const;

    /// Whether the bank has equivocation evidence within the given view mask.
    bool malicious_in_view(const BankId& bank, const Bitset& mask) const;
    bool malicious(const BankId& bank) const;
    std::vector<BankId> malicious_banks() const;

    const std::vector<Entry>& entries() const { return entries_; }
    std::vector<BankId> banks() const;
    const std::vector<std::size_t>& chain_of(const BankId& bank) const;

    /// Nodes no other node points at (maximal elements of the DAG order).
    std::vector<std::size_t> head_indices() const;

    /// Distinct same-(source, seq) transactions and the starts holding them.
    struct TxOccurrence {
        Transaction tx;
        std::vector<std::size_t> start_indices;
    };
    const std::vector<TxOccurrence>* tx_bucket(const AccountId& source, std::uint64_t seq) const;

    /// All start node indices, ascending; accepts likewise.
    const std::vector<std::size_t>& start_indices() const { return starts_; }
    const std::vector<std::size_t>& accept_indices() const { return accepts_; }
    const std::vector<std::size_t>& close_indices() const { return closes_; }

    NodeRef ref_to(std::size_t index) const;

    /// Canonically ordered dump: hex-encoded nodes, one per line, in a
    /// topological order independent of insertion order.
    std::string dump() const;

    /// DOT rendering: one cluster per bank, parent edges solid, update edges
    /// dashed, completed blocks boxed.
    std::string dot() const;

    /// Content digest: hash over the canonical dump.
    Digest content_digest() const;

    /// Order-independent digest of the node set; cheaper than the full dump
    /// and sufficient wherever only membership matters.
    Digest node_set_digest() const;

private:
    InsertResult check_and_index(const Node& n, std::size_t& parent_idx,
                                 std::vector<std::size_t>& ref_indices) const;
    std::vector<std::size_t> canonical_order() const;

    const SignatureScheme* scheme_ = nullptr;
    Money supply_ = 0;
    std::vector<Entry> entries_;
    std::map<Digest, std::size_t> index_;
    std::map<BankId, std::vector<std::size_t>> chains_; // sorted by (seq, digest)
    std::map<std::pair<BankId, std::uint64_t>, std::vector<std::size_t>> by_bank_seq_;
    std::map<std::pair<AccountId, std::uint64_t>, std::vector<TxOccurrence>> tx_index_;
    std::vector<std::size_t> starts_, closes_, accepts_;
    std::vector<bool> referenced_; // true if some node points at this index
};

/// A graph restricted to an ancestry-closed subset of its nodes. The engines
/// evaluate balance, voting power and validity over views so that "the
/// subgraph of v" never needs materializing on hot paths.
struct GraphView {
    const Blockgraph* graph = nullptr;
    const Bitset* mask = nullptr; // nullptr means the whole graph

    bool in_view(std::size_t index) const { return mask == nullptr || mask->test(index); }
    std::size_t graph_size() const { return graph->size(); }
};

GraphView whole_graph(const Blockgraph& g);

} // namespace bgl
