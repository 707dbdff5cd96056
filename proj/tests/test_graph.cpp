#include <doctest.h>

#include "fixtures.hpp"

using namespace bgl;
using fix::World;

namespace {

// Random structurally-valid graph: honest chain grammar per bank, random
// cross references, occasional forks. Economic validity is irrelevant here.
World random_world(std::uint64_t seed, std::size_t target_nodes)
{
    SplitMix64 rng(seed);
    std::size_t nbanks = 2 + rng.range(0, 2);
    std::vector<std::string> banks;
    World::Grant grants[4];
    std::vector<World::Grant> grant_list;
    for (std::size_t b = 0; b < nbanks; ++b) {
        banks.push_back("B" + std::to_string(b + 1));
        grant_list.push_back({"u" + std::to_string(b + 1), banks.back(), 50 + rng.range(0, 50)});
    }
    (void)grants;
    World w(grant_list);
    std::map<std::string, std::uint64_t> user_seq;
    for (std::size_t step = 0; w.g.size() < target_nodes && step < target_nodes * 4; ++step) {
        const auto& bank_name = banks[rng.range(0, banks.size() - 1)];
        ChainState st = ChainState::Idle;
        if (w.heads.count(bank_name))
            st = w.g.entry(*w.g.index_of(w.heads[bank_name])).state;

        auto random_targets = [&]() {
            std::vector<Digest> targets;
            std::size_t tries = 1 + rng.range(0, 2);
            auto parent_idx = w.heads.count(bank_name) ? *w.g.index_of(w.heads[bank_name]) : 0;
            const auto& preach = w.g.entry(parent_idx).reach;
            for (std::size_t t = 0; t < tries; ++t) {
                std::size_t idx = rng.range(0, w.g.size() - 1);
                if (preach.test(idx)) continue; // keep updates non-redundant
                bool dup = false;
                for (const auto& d : targets)
                    if (*w.g.index_of(d) == idx) dup = true;
                if (!dup) targets.push_back(w.g.entry(idx).hash);
            }
            return targets;
        };

        switch (st) {
        case ChainState::Idle: {
            if (rng.range(0, 3) == 0) {
                auto targets = random_targets();
                if (!targets.empty()) {
                    w.update(bank_name, targets);
                    break;
                }
            }
            std::string u = "u" + std::to_string(1 + rng.range(0, nbanks - 1));
            std::string ub = banks[rng.range(0, banks.size() - 1)];
            std::string key = u + "@" + ub;
            std::uint64_t seq = ++user_seq[key];
            std::vector<Transaction> txs;
            txs.push_back(w.tx(u, ub, "u1", banks[0], 1 + rng.range(0, 9), seq));
            w.start(bank_name, txs);
            break;
        }
        case ChainState::Open: {
            if (rng.range(0, 2) == 0) {
                w.close(bank_name);
            } else {
                auto targets = random_targets();
                if (!targets.empty()) w.update(bank_name, targets);
            }
            break;
        }
        case ChainState::Closed: {
            if (rng.range(0, 2) == 0) {
                w.accept(bank_name);
            } else {
                auto targets = random_targets();
                if (!targets.empty()) w.update(bank_name, targets);
            }
            break;
        }
        }
    }
    return w;
}

} // namespace

TEST_CASE("insertion grammar")
{
    World w({{"u1", "B1", 40}});

    SUBCASE("start hangs off the init node")
    {
        Node s = w.build("B1", NodeKind::Start);
        sign_node(w.scheme, s, w.bank_key("B1").sec);
        CHECK(w.g.insert(s).inserted());
    }
    SUBCASE("accept straight after a start is rejected")
    {
        w.start("B1", {});
        Node a = w.build("B1", NodeKind::Accept);
        sign_node(w.scheme, a, w.bank_key("B1").sec);
        auto res = w.g.insert(a);
        CHECK(res.status == Blockgraph::InsertResult::Status::Rejected);
    }
    SUBCASE("close without an open start is rejected")
    {
        Node c = w.build("B1", NodeKind::Close);
        sign_node(w.scheme, c, w.bank_key("B1").sec);
        CHECK(w.g.insert(c).status == Blockgraph::InsertResult::Status::Rejected);
    }
    SUBCASE("unknown update reference reports the missing frontier")
    {
        Node u = w.build("B1", NodeKind::Update);
        NodeRef ghost;
        ghost.bank = w.bank("B2");
        ghost.seq = 1;
        ghost.hash.bytes[0] = 0xaa;
        u.refs = {ghost};
        sign_node(w.scheme, u, w.bank_key("B1").sec);
        auto res = w.g.insert(u);
        CHECK(res.status == Blockgraph::InsertResult::Status::MissingAncestors);
        REQUIRE(res.missing.size() == 1);
        CHECK(res.missing[0] == ghost.hash);
    }
    SUBCASE("bad signature is rejected")
    {
        Node s = w.build("B1", NodeKind::Start);
        sign_node(w.scheme, s, w.bank_key("B2").sec);
        CHECK(w.g.insert(s).status == Blockgraph::InsertResult::Status::Rejected);
    }
    SUBCASE("duplicate insert reports already present")
    {
        Node s = w.build("B1", NodeKind::Start);
        sign_node(w.scheme, s, w.bank_key("B1").sec);
        CHECK(w.g.insert(s).inserted());
        CHECK(w.g.insert(s).status == Blockgraph::InsertResult::Status::AlreadyPresent);
    }
    SUBCASE("second init is rejected")
    {
        Node init2 = make_init_node({{w.acct("u9", "B9"), 5}});
        CHECK(w.g.insert(init2).status == Blockgraph::InsertResult::Status::Rejected);
    }
}

TEST_CASE("acknowledgment is reflexive and follows edges")
{
    World w({{"u1", "B1", 40}});
    auto s1 = w.start("B1", {});
    auto s2 = w.start("B2", {});
    auto u1 = w.update("B1", {s2});

    CHECK(w.g.acknowledges(s1, w.g.init_hash()));
    CHECK(w.g.acknowledges(s1, s1));
    CHECK(w.g.acknowledges(u1, s2));
    CHECK(w.g.acknowledges(u1, s1));
    CHECK_FALSE(w.g.acknowledges(s1, s2));
    Digest ghost;
    ghost.bytes[5] = 9;
    CHECK_THROWS_AS(w.g.acknowledges(s1, ghost), UnresolvedRef);
}

TEST_CASE("three-bank graph matches the brute-force closure")
{
    // Shape mirroring the paper's example figure: three chains with cross
    // references, where B1's top accept reaches everything except B3's top
    // two nodes.
    World w({{"u1", "B1", 40}, {"u2", "B2", 30}, {"u3", "B3", 30}});
    auto b1s = w.start("B1", {});
    auto b2s = w.start("B2", {});
    auto b3s = w.start("B3", {});
    auto b2u = w.update("B2", {b1s});
    auto b1u = w.update("B1", {b2u});
    auto b3u = w.update("B3", {b2s});
    auto b1c = w.close("B1");
    auto b1a = w.accept("B1");
    auto b3u2 = w.update("B3", {b2u});

    fix::ClosureOracle oracle(w.g);
    for (std::size_t i = 0; i < w.g.size(); ++i)
        for (std::size_t j = 0; j < w.g.size(); ++j)
            CHECK(w.g.acknowledges(w.g.entry(i).hash, w.g.entry(j).hash) ==
                  oracle.acknowledges(i, j));

    auto ai = *w.g.index_of(b1a);
    CHECK(w.g.acknowledges(b1a, b2u));
    CHECK(w.g.acknowledges(b1a, b2s));
    CHECK_FALSE(w.g.acknowledges(b1a, b3s));
    CHECK_FALSE(w.g.acknowledges(b1a, b3u));
    CHECK_FALSE(w.g.acknowledges(b1a, b3u2));
    CHECK(w.g.entry(ai).reach.count() == 7); // init + B1's four + B2's start/update
    (void)b1u;
    (void)b1c;
}

TEST_CASE("random graphs match the closure oracle")
{
    for (std::uint64_t seed = 1; seed <= 12; ++seed) {
        World w = random_world(seed, 60);
        fix::ClosureOracle oracle(w.g);
        for (std::size_t i = 0; i < w.g.size(); ++i)
            for (std::size_t j = 0; j < w.g.size(); ++j)
                CHECK(w.g.acknowledges(w.g.entry(i).hash, w.g.entry(j).hash) ==
                      oracle.acknowledges(i, j));
    }
}

TEST_CASE("subgraph extraction")
{
    World w({{"u1", "B1", 40}});
    auto s1 = w.start("B1", {});
    auto s2 = w.start("B2", {});
    auto u2 = w.update("B2", {s1});

    SUBCASE("subgraph of a first start holds only the init node")
    {
        auto sub = w.g.subgraph(s1);
        CHECK(sub.size() == 1);
        CHECK(sub.has_init());
    }
    SUBCASE("subgraph of an update holds the referenced chain")
    {
        auto sub = w.g.subgraph(u2);
        CHECK(sub.contains(s1));
        CHECK(sub.contains(s2));
        CHECK_FALSE(sub.contains(u2));
        CHECK(sub.size() == 3);
    }
    SUBCASE("nesting: subgraph of a subgraph member matches the direct one")
    {
        auto sub = w.g.subgraph(u2);
        auto inner = sub.subgraph(s1);
        auto direct = w.g.subgraph(s1);
        CHECK(inner.dump() == direct.dump());
    }
    SUBCASE("subgraph of the init node is empty")
    {
        auto sub = w.g.subgraph(w.g.init_hash());
        CHECK(sub.empty());
    }
}

TEST_CASE("block partitioning")
{
    World w({{"u1", "B1", 40}, {"u2", "B2", 30}});

    SUBCASE("start update close update accept forms one closed block")
    {
        auto s = w.start("B1", {});
        auto s2 = w.start("B2", {});
        w.update("B1", {s2});
        auto c = w.close("B1");
        auto u2b = w.update("B2", {c}); // concurrent B2 activity
        w.update("B1", {u2b});
        auto a = w.accept("B1");
        auto blocks = w.g.blocks_of(w.bank("B1"));
        REQUIRE(blocks.size() == 1);
        CHECK(blocks[0].start == s);
        CHECK(blocks[0].close == c);
        CHECK(blocks[0].accept == a);
        CHECK(blocks[0].members.size() == 5); // S, U, C, U, A
    }
    SUBCASE("open block has no close or accept")
    {
        auto s = w.start("B1", {});
        auto s2 = w.start("B2", {});
        w.update("B1", {s2});
        auto blocks = w.g.blocks_of(w.bank("B1"));
        REQUIRE(blocks.size() == 1);
        CHECK(blocks[0].start == s);
        CHECK_FALSE(blocks[0].close.has_value());
        CHECK_FALSE(blocks[0].accept.has_value());
    }
    SUBCASE("inter-block update belongs to no block")
    {
        w.start("B1", {});
        w.close("B1");
        w.accept("B1");
        auto s2 = w.start("B2", {});
        auto mid = w.update("B1", {s2});
        auto s_next = w.start("B1", {});
        auto blocks = w.g.blocks_of(w.bank("B1"));
        REQUIRE(blocks.size() == 2);
        for (const auto& b : blocks)
            for (const auto& m : b.members) CHECK(m != mid);
        CHECK(blocks[1].start == s_next);
        CHECK_FALSE(blocks[1].close.has_value());
    }
}

TEST_CASE("equivocation evidence")
{
    World w({{"u1", "B1", 40}, {"u2", "B2", 30}});
    w.start("B3", {});
    CHECK(w.g.equivocation_evidence(w.bank("B3")).empty());

    // Fork B3: a second node at seq 1 with different content.
    Node fork = w.build("B3", NodeKind::Start);
    fork.seq = 1;
    fork.parent = w.g.init_hash();
    fork.txs = {w.tx("u1", "B1", "u2", "B2", 5, 1)};
    sign_node(w.scheme, fork, w.bank_key("B3").sec);
    REQUIRE(w.g.insert(fork).inserted());

    auto evidence = w.g.equivocation_evidence(w.bank("B3"));
    REQUIRE(evidence.size() == 1);
    CHECK(w.g.malicious(w.bank("B3")));
    CHECK_FALSE(w.g.malicious(w.bank("B1")));

    // Evidence only grows.
    w.start("B1", {});
    CHECK(w.g.equivocation_evidence(w.bank("B3")).size() == 1);
}

TEST_CASE("insertion order independence")
{
    World w = random_world(42, 50);
    std::vector<Node> nodes;
    for (std::size_t i = 1; i < w.g.size(); ++i) nodes.push_back(w.g.entry(i).node);

    // A different ancestry-respecting order: repeatedly insert whatever fits.
    Blockgraph g2(w.g.init_node(), &w.scheme);
    std::vector<Node> pending = nodes;
    std::reverse(pending.begin(), pending.end());
    while (!pending.empty()) {
        bool progressed = false;
        for (auto it = pending.begin(); it != pending.end();) {
            auto res = g2.insert(*it);
            if (res.inserted()) {
                it = pending.erase(it);
                progressed = true;
            } else {
                ++it;
            }
        }
        REQUIRE(progressed);
    }
    CHECK(g2.dump() == w.g.dump());
    CHECK(g2.content_digest() == w.g.content_digest());
    for (std::size_t i = 0; i < w.g.size(); ++i) {
        const auto& h = w.g.entry(i).hash;
        CHECK(g2.contains(h));
    }
}

TEST_CASE("dot export is deterministic and mentions every node")
{
    World w = random_world(7, 30);
    auto d1 = w.g.dot();
    auto d2 = w.g.dot();
    CHECK(d1 == d2);
    CHECK(d1.find("subgraph cluster_bank0") != std::string::npos);
}
