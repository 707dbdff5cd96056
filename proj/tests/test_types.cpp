#include <doctest.h>

#include "fixtures.hpp"

using namespace bgl;

TEST_CASE("pair classification")
{
    fix::World w({{"alice", "B1", 40}});
    auto t = w.tx("alice", "B1", "bob", "B2", 20, 1);

    SUBCASE("a transaction is identical to itself")
    {
        CHECK(classify_pair(t, t) == PairKind::Identical);
    }
    SUBCASE("same source and seq, different destination and amount")
    {
        auto other = w.tx("alice", "B1", "carol", "B3", 30, 1);
        CHECK(classify_pair(t, other) == PairKind::Conflicting);
        CHECK(classify_pair(other, t) == PairKind::Conflicting);
    }
    SUBCASE("same source, different seq")
    {
        auto other = w.tx("alice", "B1", "bob", "B2", 20, 2);
        CHECK(classify_pair(t, other) == PairKind::Unrelated);
    }
    SUBCASE("every pair lands in exactly one category")
    {
        std::vector<Transaction> txs = {
            t,
            w.tx("alice", "B1", "carol", "B3", 30, 1),
            w.tx("alice", "B1", "bob", "B2", 20, 2),
            w.tx("bob", "B2", "alice", "B1", 5, 1),
        };
        for (const auto& a : txs)
            for (const auto& b : txs) {
                auto ab = classify_pair(a, b);
                CHECK(ab == classify_pair(b, a));
                int cats = (ab == PairKind::Identical) + (ab == PairKind::Conflicting) +
                           (ab == PairKind::Unrelated);
                CHECK(cats == 1);
            }
    }
}

TEST_CASE("transaction construction guards")
{
    fix::World w({{"alice", "B1", 40}});
    auto alice = w.acct("alice", "B1");
    auto bob = w.acct("bob", "B2");

    CHECK_THROWS(make_transaction(w.scheme, alice, bob, 0, 1, w.user_key("alice").sec));
    CHECK_THROWS(make_transaction(w.scheme, alice, bob, 20, 0, w.user_key("alice").sec));
    CHECK_THROWS(make_transaction(w.scheme, alice, bob, 20, 1, w.user_key("bob").sec));

    auto t = make_transaction(w.scheme, alice, bob, 20, 1, w.user_key("alice").sec);
    CHECK(verify_transaction(w.scheme, t));
}

TEST_CASE("init node construction")
{
    fix::World w({{"alice", "B1", 40}});
    auto a = w.acct("alice", "B1");
    auto b = w.acct("bob", "B2");

    SUBCASE("accounts must ascend strictly")
    {
        std::vector<InitEntry> entries = {{a, 10}, {a, 10}};
        CHECK_THROWS(make_init_node(entries));
    }
    SUBCASE("amounts must be positive")
    {
        std::vector<InitEntry> entries = {{a, 0}};
        CHECK_THROWS(make_init_node(entries));
    }
    SUBCASE("one mapping, one node")
    {
        std::vector<InitEntry> e1 = {std::min(a, b) < std::max(a, b) ? InitEntry{std::min(a, b), 3}
                                                                     : InitEntry{a, 3},
                                     {std::max(a, b), 7}};
        auto n1 = make_init_node(e1);
        auto n2 = make_init_node(e1);
        CHECK(node_hash(n1) == node_hash(n2));
        CHECK(total_supply(n1) == 10);
    }
}

TEST_CASE("account ordering is lexicographic on bank then user key")
{
    AccountId a{{Bytes{1, 2}}, {Bytes{9}}};
    AccountId b{{Bytes{1, 3}}, {Bytes{0}}};
    AccountId c{{Bytes{1, 2}}, {Bytes{10}}};
    CHECK(a < b);
    CHECK(a < c);
    CHECK(c < b);
}
