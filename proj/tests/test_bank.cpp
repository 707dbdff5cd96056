#include <doctest.h>

#include "bgl/bank.hpp"
#include "bgl/codec.hpp"
#include "fixtures.hpp"

using namespace bgl;

namespace {

struct BankHarness {
    const SignatureScheme& scheme = test_scheme();
    KeyPair b1 = scheme.keygen(1);
    KeyPair b2 = scheme.keygen(2);
    KeyPair u1 = scheme.keygen(101);
    KeyPair u2 = scheme.keygen(102);
    Node init;
    std::shared_ptr<Evaluator> eval;
    std::vector<nlohmann::json> events;
    TraceSink sink = [this](const char* kind, nlohmann::json data) {
        data["k"] = kind;
        events.push_back(std::move(data));
    };

    BankHarness(Money m1, Money m2)
    {
        std::vector<InitEntry> entries = {{acct(b1, u1), m1}, {acct(b2, u2), m2}};
        std::sort(entries.begin(), entries.end(),
                  [](const InitEntry& a, const InitEntry& b) { return a.account < b.account; });
        init = make_init_node(entries);
        eval = std::make_shared<Evaluator>(node_hash(init), &scheme, SharedPowerRule::MaxAmount);
    }

    static AccountId acct(const KeyPair& bank, const KeyPair& user)
    {
        return {BankId{bank.pub}, UserId{user.pub}};
    }

    Bank make_bank(const std::string& name, const KeyPair& keys)
    {
        Bank b(name, keys, init, BankConfig{}, &scheme, eval);
        b.set_peers({"B1", "B2"});
        return b;
    }

    Transaction tx(const KeyPair& from_user, const KeyPair& from_bank, const KeyPair& to_user,
                   const KeyPair& to_bank, Money amount, std::uint64_t seq)
    {
        return make_transaction(scheme, acct(from_bank, from_user), acct(to_bank, to_user),
                                amount, seq, from_user.sec);
    }

    /// Ferries every pending message between the two banks until quiet.
    void settle(Bank& a, Bank& b)
    {
        for (int round = 0; round < 200; ++round) {
            bool moved = false;
            while (a.step(sink)) moved = true;
            while (b.step(sink)) moved = true;
            for (auto& m : a.take_outbox()) {
                b.on_message(m, sink);
                moved = true;
            }
            for (auto& m : b.take_outbox()) {
                a.on_message(m, sink);
                moved = true;
            }
            if (!moved) return;
        }
        FAIL("banks did not settle");
    }
};

} // namespace

TEST_CASE("mempool intake")
{
    BankHarness h(60, 40);
    Bank b = h.make_bank("B1", h.b1);
    auto t = h.tx(h.u1, h.b1, h.u2, h.b2, 20, 1);

    b.on_user_transaction(t, h.sink);
    CHECK(b.mempool().size() == 1);
    b.on_user_transaction(t, h.sink);
    CHECK(b.mempool().size() == 1); // duplicates ignored

    Transaction forged = t;
    forged.amount = 21;
    b.on_user_transaction(forged, h.sink); // bad signature
    CHECK(b.mempool().size() == 1);

    // a foreign user's transaction is enqueued like any other
    auto foreign = h.tx(h.u2, h.b2, h.u1, h.b1, 5, 1);
    b.on_user_transaction(foreign, h.sink);
    CHECK(b.mempool().size() == 2);
}

TEST_CASE("two banks complete a block end to end")
{
    BankHarness h(60, 40);
    Bank b1 = h.make_bank("B1", h.b1);
    Bank b2 = h.make_bank("B2", h.b2);

    auto t = h.tx(h.u1, h.b1, h.u2, h.b2, 20, 1);
    b1.on_user_transaction(t, h.sink);
    h.settle(b1, b2);

    // both banks hold the full block and have accepted the transfer
    for (Bank* b : {&b1, &b2}) {
        auto it = b->decisions().find(t);
        REQUIRE(it != b->decisions().end());
        CHECK(it->second.kind == DecisionKind::Accepted);
        auto sheet = total_balance(b->graph());
        CHECK(sheet.balance_of(h.acct(h.b1, h.u1)) == 40);
        CHECK(sheet.balance_of(h.acct(h.b2, h.u2)) == 60);
    }
    CHECK(b1.graph().content_digest() == b2.graph().content_digest());
    CHECK(is_proper(b1.graph()));
}

TEST_CASE("a bank below threshold cannot close alone")
{
    BankHarness h(60, 40);
    Bank b1 = h.make_bank("B1", h.b1);
    auto t = h.tx(h.u1, h.b1, h.u2, h.b2, 20, 1);
    b1.on_user_transaction(t, h.sink);
    while (b1.step(h.sink)) {}
    // start created, but 60 of 100 is not above two thirds: no close
    CHECK(b1.graph().start_indices().size() == 1);
    CHECK(b1.graph().close_indices().empty());
    auto it = b1.decisions().find(t);
    REQUIRE(it != b1.decisions().end());
    CHECK(it->second.kind == DecisionKind::Pending);
}

TEST_CASE("missing ancestors are quarantined and requested")
{
    BankHarness h(60, 40);
    Bank b1 = h.make_bank("B1", h.b1);
    Bank b2 = h.make_bank("B2", h.b2);

    // both banks open a block; nothing is cross-delivered yet
    b1.on_user_transaction(h.tx(h.u1, h.b1, h.u2, h.b2, 20, 1), h.sink);
    while (b1.step(h.sink)) {}
    auto msgs = b1.take_outbox();
    REQUIRE(msgs.size() == 1);
    const Node start1 = msgs[0].nodes.at(0);
    b2.on_user_transaction(h.tx(h.u2, h.b2, h.u1, h.b1, 5, 1), h.sink);
    while (b2.step(h.sink)) {}
    auto msgs2 = b2.take_outbox();
    REQUIRE(msgs2.size() == 1);
    const Node start2 = msgs2[0].nodes.at(0);

    // hand-build B1's acknowledgment of B2's start and deliver it to B2
    // before B2 ever saw B1's start: the parent is unknown there
    Node child;
    child.kind = NodeKind::Update;
    child.bank = b1.id();
    child.seq = start1.seq + 1;
    child.parent = node_hash(start1);
    NodeRef r;
    r.bank = b2.id();
    r.seq = start2.seq;
    r.hash = node_hash(start2);
    child.refs = {r};
    sign_node(h.scheme, child, h.b1.sec);

    Message m;
    m.kind = Message::Kind::NewNode;
    m.from = "B1";
    m.to = "B2";
    m.nodes = {child};
    b2.on_message(m, h.sink);
    CHECK(b2.quarantine_size() == 1);
    auto reqs = b2.take_outbox();
    REQUIRE(reqs.size() == 1);
    CHECK(reqs[0].kind == Message::Kind::RequestNodes);
    CHECK(reqs[0].to == "B1");
    REQUIRE(reqs[0].requests.size() == 1);
    CHECK(reqs[0].requests[0] == node_hash(start1));

    // the sender answers with the missing ancestry; the held node then
    // clears quarantine and lands in the graph
    b1.on_message(reqs[0], h.sink);
    auto resp = b1.take_outbox();
    REQUIRE(resp.size() == 1);
    CHECK(resp[0].kind == Message::Kind::NodesResponse);
    b2.on_message(resp[0], h.sink);
    CHECK(b2.quarantine_size() == 0);
    CHECK(b2.graph().contains(node_hash(start1)));
    CHECK(b2.graph().contains(node_hash(child)));
}

TEST_CASE("rejection policy")
{
    BankHarness h(60, 40);

    SUBCASE("immediate rejection once a conflicting transaction is applied")
    {
        Bank b1 = h.make_bank("B1", h.b1);
        Bank b2 = h.make_bank("B2", h.b2);
        auto t_first = h.tx(h.u1, h.b1, h.u2, h.b2, 20, 1);
        b1.on_user_transaction(t_first, h.sink);
        h.settle(b1, b2);

        auto t_rival = h.tx(h.u1, h.b1, h.u2, h.b2, 30, 1);
        b1.on_user_transaction(t_rival, h.sink);
        while (b1.step(h.sink)) {}
        auto it = b1.decisions().find(t_rival);
        REQUIRE(it != b1.decisions().end());
        CHECK(it->second.kind == DecisionKind::Rejected);
        CHECK(it->second.cause == Cause::ConflictingSeq);
    }

    SUBCASE("a sequence gap is rejected only after patience runs out")
    {
        Bank b1 = h.make_bank("B1", h.b1);
        auto t = h.tx(h.u1, h.b1, h.u2, h.b2, 5, 4); // seqs 1..3 never existed
        b1.on_user_transaction(t, h.sink);
        int rounds = 0;
        while (b1.decisions().at(t).kind == DecisionKind::Pending) {
            b1.step(h.sink, true);
            REQUIRE(++rounds < 50);
        }
        CHECK(rounds >= BankConfig{}.patience);
        CHECK(b1.decisions().at(t).kind == DecisionKind::Rejected);
        CHECK(b1.decisions().at(t).cause == Cause::SeqGap);
    }

    SUBCASE("insufficient balance is rejected with its own cause")
    {
        Bank b1 = h.make_bank("B1", h.b1);
        auto t = h.tx(h.u1, h.b1, h.u2, h.b2, 500, 1);
        b1.on_user_transaction(t, h.sink);
        for (int i = 0; i < 20; ++i) b1.step(h.sink, true);
        CHECK(b1.decisions().at(t).kind == DecisionKind::Rejected);
        CHECK(b1.decisions().at(t).cause == Cause::InsufficientBalance);
    }
}

TEST_CASE("deterministic evolution from identical event sequences")
{
    auto run_once = [](std::vector<nlohmann::json>* log) {
        BankHarness h(60, 40);
        Bank b1 = h.make_bank("B1", h.b1);
        Bank b2 = h.make_bank("B2", h.b2);
        if (log) h.sink = [log](const char* kind, nlohmann::json data) {
            data["k"] = kind;
            log->push_back(std::move(data));
        };
        auto t1 = h.tx(h.u1, h.b1, h.u2, h.b2, 20, 1);
        auto t2 = h.tx(h.u2, h.b2, h.u1, h.b1, 10, 1);
        b1.on_user_transaction(t1, h.sink);
        b2.on_user_transaction(t2, h.sink);
        h.settle(b1, b2);
        return b1.graph().dump() + b2.graph().dump();
    };
    std::vector<nlohmann::json> log1, log2;
    CHECK(run_once(&log1) == run_once(&log2));
    CHECK(log1 == log2);
}

TEST_CASE("no self equivocation: an honest bank's chain stays linear")
{
    BankHarness h(60, 40);
    Bank b1 = h.make_bank("B1", h.b1);
    Bank b2 = h.make_bank("B2", h.b2);
    for (std::uint64_t s = 1; s <= 3; ++s)
        b1.on_user_transaction(h.tx(h.u1, h.b1, h.u2, h.b2, 5, s), h.sink);
    h.settle(b1, b2);
    CHECK(b1.graph().equivocation_evidence(b1.id()).empty());
    CHECK(b1.graph().equivocation_evidence(b2.id()).empty());
    // every created node passed self-validation (settle would have thrown)
    CHECK(total_balance(b1.graph()).balance_of(h.acct(h.b2, h.u2)) == 55);
}
