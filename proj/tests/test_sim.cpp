#include <doctest.h>

#include "bgl/oracle.hpp"
#include "bgl/sim.hpp"

using namespace bgl;

namespace {

Scenario load_scn(const std::string& name)
{
    return Scenario::load(std::string(BGL_SCENARIO_DIR) + "/" + name);
}

nlohmann::json final_state_of(const Trace& tr, const std::string& bank)
{
    for (auto it = tr.events.rbegin(); it != tr.events.rend(); ++it)
        if (it->kind == event::kFinalState && it->data.at("bank") == bank) return it->data;
    return {};
}

bool all_checks_pass(const Trace& tr)
{
    return failed_properties(tr).empty();
}

} // namespace

TEST_CASE("single bank, single user, single transaction")
{
    Scenario sc;
    sc.name = "solo";
    sc.delay = DelaySpec{DelaySpec::Policy::Uniform, 0, 0, {}, 1};
    sc.banks = {{"B1", 1, {}}};
    UserSpec u;
    u.name = "u1";
    u.seed = 101;
    u.home = "B1";
    u.balance = 50;
    UserAction a;
    a.op = UserAction::Op::Send;
    a.to_user = "u1";
    a.to_bank = "B1";
    a.amount = 10;
    u.actions = {a};
    sc.users = {u};

    Trace tr = run_simulation(sc);
    CHECK_FALSE(tr.truncated);
    auto fin = final_state_of(tr, "B1");
    CHECK(fin.at("accepted").get<int>() == 1);
    CHECK(fin.at("pending").get<int>() == 0);
    CHECK(all_checks_pass(tr));

    // replays identically
    Trace tr2 = run_simulation(sc);
    CHECK(tr.to_text() == tr2.to_text());
}

TEST_CASE("two banks scenario reaches agreement under every policy")
{
    Scenario sc = load_scn("two_banks.scn");
    for (auto policy : {DelaySpec::Policy::Uniform, DelaySpec::Policy::Adversarial}) {
        sc.delay.policy = policy;
        Trace tr = run_simulation(sc);
        REQUIRE_FALSE(tr.truncated);
        CHECK(all_checks_pass(tr));
        auto f1 = final_state_of(tr, "B1");
        auto f2 = final_state_of(tr, "B2");
        CHECK(f1.at("balances") == f2.at("balances"));
        CHECK(f1.at("balances").at("u1@B1").get<std::int64_t>() == 45);
        CHECK(f1.at("balances").at("u2@B2").get<std::int64_t>() == 55);
    }
}

TEST_CASE("identical seeds give identical traces, different seeds same outcome")
{
    Scenario sc = load_scn("two_banks.scn");
    Trace a1 = run_simulation(sc, 42);
    Trace a2 = run_simulation(sc, 42);
    CHECK(a1.to_text() == a2.to_text());

    Trace b = run_simulation(sc, 43);
    CHECK(a1.to_text() != b.to_text()); // different interleavings...
    auto fa = final_state_of(a1, "B1");
    auto fb = final_state_of(b, "B1");
    CHECK(fa.at("balances") == fb.at("balances")); // ...same decisions
    CHECK(fa.at("accepted") == fb.at("accepted"));
}

TEST_CASE("trace round-trips through its text form")
{
    Scenario sc = load_scn("two_banks.scn");
    Trace tr = run_simulation(sc);
    Trace back = Trace::from_text(tr.to_text());
    CHECK(back.to_text() == tr.to_text());
    CHECK(back.events.size() == tr.events.size());
}

TEST_CASE("bank switch carries the account across")
{
    Scenario sc = load_scn("bank_switch.scn");
    Trace tr = run_simulation(sc);
    REQUIRE_FALSE(tr.truncated);
    CHECK(all_checks_pass(tr));
    auto fin = final_state_of(tr, "B2");
    // u1 moved the 40 left after the first send; u2's 5 landed on the old
    // account afterwards and stays there
    CHECK(fin.at("balances").at("u1@B1").get<std::int64_t>() == 5);
    CHECK(fin.at("balances").at("u1@B2").get<std::int64_t>() == 25);
    CHECK(fin.at("balances").at("u2@B2").get<std::int64_t>() == 70);
}

TEST_CASE("crash plus identical resubmission applies the transfer once")
{
    Scenario sc = load_scn("resubmit_after_crash.scn");
    Trace tr = run_simulation(sc);
    REQUIRE_FALSE(tr.truncated);
    auto fin = final_state_of(tr, "B2");
    CHECK(fin.at("balances").at("u1@B1").get<std::int64_t>() == 10);
    CHECK(fin.at("balances").at("u2@B2").get<std::int64_t>() == 90);
    // the §3 checks must hold for the surviving honest bank
    for (const auto& r : run_all_checks(tr))
        CHECK_MESSAGE(r.pass, r.property << ": " << r.detail);
    // the crash is visible in the trace
    bool stopped = false;
    for (const auto& e : tr.events)
        if (e.kind == event::kBankStopped) stopped = true;
    CHECK(stopped);
}

TEST_CASE("conflict scenarios resolve exactly as scripted")
{
    SUBCASE("mutual acknowledgment rejects both")
    {
        Trace tr = run_simulation(load_scn("conflict_mutual.scn"));
        REQUIRE_FALSE(tr.truncated);
        CHECK(all_checks_pass(tr));
        for (const auto& bank : {"B1", "B2"}) {
            auto fin = final_state_of(tr, bank);
            CHECK(fin.at("balances").at("alice@B1").get<std::int64_t>() == 40);
            CHECK(fin.at("balances").at("bob@B2").get<std::int64_t>() == 30);
            CHECK(fin.at("balances").at("carol@B2").get<std::int64_t>() == 30);
            CHECK(fin.at("accepted").get<int>() == 0);
        }
    }
    SUBCASE("one-directional acknowledgment applies the earlier transaction")
    {
        Trace tr = run_simulation(load_scn("conflict_oneway.scn"));
        REQUIRE_FALSE(tr.truncated);
        CHECK(all_checks_pass(tr));
        for (const auto& bank : {"B1", "B2"}) {
            auto fin = final_state_of(tr, bank);
            CHECK(fin.at("balances").at("alice@B1").get<std::int64_t>() == 10);
            CHECK(fin.at("balances").at("carol@B2").get<std::int64_t>() == 30);
        }
    }
}

TEST_CASE("equivocation with a power minority keeps the union proper")
{
    for (const auto* name : {"equivocate_start.scn", "equivocate_close.scn",
                             "equivocate_accept.scn"}) {
        Scenario sc = load_scn(name);
        for (std::uint64_t seed = 1; seed <= 5; ++seed) {
            Trace tr = run_simulation(sc, seed);
            REQUIRE_FALSE(tr.truncated);
            auto proper = check_proper_always(tr);
            CHECK_MESSAGE(proper.pass, name << " seed " << seed << ": " << proper.detail);
            auto agreement = check_agreement(tr);
            CHECK_MESSAGE(agreement.pass, name << " seed " << seed << ": " << agreement.detail);
        }
    }
}

TEST_CASE("rival accepts over one close accept the same transactions")
{
    Scenario sc = load_scn("equivocate_accept.scn");
    bool found_rival_pair = false;
    for (std::uint64_t seed = 1; seed <= 10 && !found_rival_pair; ++seed) {
        Trace tr = run_simulation(sc, seed);
        auto nodes = honest_union_nodes(tr);
        Blockgraph g(nodes[0], &test_scheme());
        std::vector<Node> rest(nodes.begin() + 1, nodes.end());
        bool moved = true;
        while (moved) {
            moved = false;
            for (auto it = rest.begin(); it != rest.end();) {
                if (g.insert(*it).status != Blockgraph::InsertResult::Status::MissingAncestors) {
                    it = rest.erase(it);
                    moved = true;
                } else {
                    ++it;
                }
            }
        }
        const auto& accepts = g.accept_indices();
        for (std::size_t i = 0; i < accepts.size(); ++i)
            for (std::size_t j = i + 1; j < accepts.size(); ++j) {
                const auto& a = g.entry(accepts[i]);
                const auto& b = g.entry(accepts[j]);
                if (a.matching_close != b.matching_close) continue;
                found_rival_pair = true;
                CHECK(a.matching_start == b.matching_start);
                // same close, same conflict set: the block's transactions
                // get identical verdicts through either accept
                auto block_fates = [&](const Blockgraph::Entry& accept) {
                    const auto& close = g.entry(accept.matching_close);
                    const auto& start = g.entry(accept.matching_start);
                    GraphView cview{&g, &close.reach};
                    std::vector<bool> fates;
                    for (const auto& t : start.node.txs)
                        fates.push_back(!conflict_in_view(cview, t));
                    return fates;
                };
                CHECK(block_fates(a) == block_fates(b));
            }
    }
    CHECK_MESSAGE(found_rival_pair, "the scripted rival accept never materialized");
}

TEST_CASE("overpowered attacker splits the network and the oracle catches it")
{
    Scenario sc = load_scn("overpower_attack.scn");
    Trace tr = run_simulation(sc);
    REQUIRE_FALSE(tr.truncated);
    auto proper = check_proper_always(tr);
    CHECK_FALSE(proper.pass);
    CHECK(proper.counterexample.contains("event"));
    CHECK_FALSE(proper.info.at("side_condition_holds").get<bool>());
    auto agreement = check_agreement(tr);
    CHECK_FALSE(agreement.pass);

    // the counterexample replays: same seed, same failure point
    Trace again = run_simulation(sc);
    auto proper2 = check_proper_always(again);
    REQUIRE_FALSE(proper2.pass);
    CHECK(*proper2.fail_event == *proper.fail_event);
}

TEST_CASE("exhaustive mode visits every schedule of a toy scenario")
{
    Scenario sc = load_scn("exhaustive_tiny.scn");
    sc.users[0].actions.resize(1); // shrink for unit-test speed
    sc.users[1].actions.clear();
    auto judge = [](const Trace& tr) { return failed_properties(tr); };
    auto result = run_exhaustive(sc, judge, 100000);
    CHECK_FALSE(result.capped);
    CHECK(result.schedules > 1);
    CHECK(result.failures == 0);
}
