#pragma once

#include <deque>
#include <functional>
#include <memory>

#include "bgl/trace.hpp"
#include "bgl/validity.hpp"

namespace bgl {

struct BankConfig {
    std::size_t batch_max = 16; // transactions per start node
    int patience = 8;           // re-evaluations before rejecting a stuck transaction
    SharedPowerRule rule = SharedPowerRule::MaxAmount;
};

struct Message {
    enum class Kind { NewNode, RequestNodes, NodesResponse, UserTx };
    Kind kind = Kind::NewNode;
    std::string from;
    std::string to; // bank name, or "*" for broadcast (expanded by the network)
    std::vector<Node> nodes;
    std::vector<Digest> requests;
    std::optional<Transaction> tx;
};

const char* message_kind_name(Message::Kind k);

enum class DecisionKind : std::uint8_t { Pending, Accepted, Rejected };

struct Decision {
    DecisionKind kind = DecisionKind::Pending;
    Cause cause = Cause::None;
    int age = 0;                     // re-evaluations while stuck
    std::size_t eval_graph_size = 0; // graph size at the last age tick
};

/// Where a bank reports its transitions. The simulator stamps logical time.
using TraceSink = std::function<void(const char* kind, nlohmann::json data)>;

/// Deterministic reactor for one honest bank: ingests user transactions and
/// remote nodes, drives its own blocks through start -> close -> accept, and
/// emits accept/reject decisions. All cross-bank interaction goes through
/// Messages; state evolution is a pure function of the ordered input events.
class Bank {
public:
    Bank(std::string name, KeyPair keys, Node init, BankConfig cfg,
         const SignatureScheme* scheme, std::shared_ptr<Evaluator> eval);
    virtual ~Bank() = default;
    Bank(const Bank&) = default;
    Bank& operator=(const Bank&) = default;

    const std::string& name() const { return name_; }
    const BankId& id() const { return id_; }
    const Blockgraph& graph() const { return graph_; }
    const std::map<Transaction, Decision>& decisions() const { return decisions_; }
    const std::deque<Transaction>& mempool() const { return mempool_; }
    std::size_t quarantine_size() const { return quarantine_.size() + improper_.size(); }
    bool has_undecided() const;

    /// Digest over everything that determines future behavior: graph
    /// content, chain position, mempool, decisions and held nodes. Two banks
    /// with equal digests evolve identically on equal inputs.
    Digest state_digest() const;

    /// A crashed (byzantine) bank goes dark; delivery to it is a no-op.
    virtual bool active() const { return true; }

    virtual void on_user_transaction(const Transaction& t, const TraceSink& trace);
    virtual void on_message(const Message& m, const TraceSink& trace);

    /// One pass of the creation/decision rules in priority order. Returns
    /// true if any node was created or any decision changed. `idle_tick`
    /// ages stuck transactions even without graph growth (used once message
    /// traffic has drained).
    virtual bool step(const TraceSink& trace, bool idle_tick = false);

    virtual std::vector<Message> take_outbox();

    void set_peers(std::vector<std::string> peers) { peers_ = std::move(peers); }

    // Building blocks shared with scripted (byzantine) actors.
    Node make_own(NodeKind kind) const;
    Node make_own_update(const std::vector<std::size_t>& ref_indices) const;
    void sign(Node& n) const { sign_node(*scheme_, n, keys_.sec); }
    std::vector<std::size_t> unacknowledged_heads() const;
    Evaluator& evaluator() { return *eval_; }
    const KeyPair& keys() const { return keys_; }

protected:
    // Priority phases of step(), exposed so scripted actors can rearrange
    // or deviate from them.
    virtual bool phase_update(const TraceSink& trace);
    bool phase_start(const TraceSink& trace);
    virtual bool phase_close(const TraceSink& trace);
    virtual bool phase_accept(const TraceSink& trace);

    virtual void on_own_node_created(const TraceSink& trace) { (void)trace; }

    void adopt_own(Node n, const TraceSink& trace);
    bool try_admit(const Node& n, const std::string& from, const TraceSink& trace);
    void drain_quarantine(const TraceSink& trace);
    void refresh_decisions(const TraceSink& trace, bool& progressed);
    void review_mempool(const TraceSink& trace, bool idle_tick, bool& progressed);
    bool open_block_anywhere() const;
    bool ack_work_pending() const;
    std::set<BankId> supporters_with(const Bitset& mask, std::size_t anchor) const;
    bool news_grows_support(const std::vector<std::size_t>& heads) const;
    bool news_unlocks_mempool(const TraceSink&) const;
    std::size_t head_index() const;

    // Scripted actors skip creations their own deviations made invalid
    // instead of treating them as internal errors.
    bool tolerate_invalid_creations_ = false;
    std::vector<std::string> peers_;

    std::string name_;
    BankId id_;
    KeyPair keys_;
    BankConfig cfg_;
    const SignatureScheme* scheme_;
    std::shared_ptr<Evaluator> eval_;
    Blockgraph graph_;

    Digest own_head_;
    std::uint64_t own_next_seq_ = 1;
    std::optional<Digest> open_start_;
    std::optional<Digest> open_close_;

    std::deque<Transaction> mempool_;
    std::map<Transaction, Decision> decisions_;
    std::map<Digest, Node> quarantine_;        // awaiting ancestors
    std::map<Digest, Node> improper_;          // valid but would break properness
    std::set<std::pair<Digest, std::string>> requested_;
    std::size_t decided_accepts_ = 0;
    TxSet applied_cache_;
    std::vector<Message> outbox_;
};

nlohmann::json tx_json(const Transaction& t);

} // namespace bgl
