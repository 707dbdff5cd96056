// Command-line front door: run scenarios, check traces, export graphs,
// sweep seeds, manage golden vectors.
//
// Exit codes: 0 all checks passed, 1 a check failed, 2 input could not be
// parsed or loaded.

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "bgl/codec.hpp"
#include "bgl/oracle.hpp"
#include "bgl/report.hpp"
#include "bgl/sim.hpp"

namespace fs = std::filesystem;
using namespace bgl;

namespace {

std::string default_out_dir()
{
    if (const char* env = std::getenv("BGL_OUT")) return env;
    return ".";
}

std::uint64_t wall_ms_since(std::chrono::steady_clock::time_point t0)
{
    return static_cast<std::uint64_t>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                          std::chrono::steady_clock::now() - t0)
                                          .count());
}

struct CommonOpts {
    std::string out_dir = default_out_dir();
    std::optional<std::uint64_t> seed;
    std::string scheme;       // override: real|test
    std::string shared_power; // override: simple|tiered
};

Scenario load_scenario_or_exit(const std::string& path, const CommonOpts& opts)
{
    Scenario sc;
    try {
        sc = Scenario::load(path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::exit(2);
    }
    if (opts.seed) sc.seed = *opts.seed;
    if (!opts.scheme.empty()) sc.scheme = opts.scheme;
    if (!opts.shared_power.empty()) sc.shared_power = opts.shared_power;
    try {
        scheme_by_name(sc.scheme);
        shared_power_rule_by_name(sc.shared_power);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        std::exit(2);
    }
    return sc;
}

void print_checks(const std::vector<CheckReport>& checks)
{
    for (const auto& c : checks) {
        std::cout << (c.pass ? "PASS" : "FAIL") << " " << c.property;
        if (!c.pass) {
            std::cout << " - " << c.detail;
            if (c.fail_event) std::cout << " (event " << *c.fail_event << ")";
        }
        std::cout << "\n";
    }
}

int cmd_run(const std::string& scenario_path, const CommonOpts& opts)
{
    auto t0 = std::chrono::steady_clock::now();
    Scenario sc = load_scenario_or_exit(scenario_path, opts);
    fs::create_directories(opts.out_dir);
    std::string stem = sc.name + "-seed" + std::to_string(sc.seed);

    if (sc.delay.policy == DelaySpec::Policy::Exhaustive) {
        auto judge = [](const Trace& tr) { return failed_properties(tr); };
        ExhaustiveResult res = run_exhaustive(sc, judge);
        nlohmann::json summary = {{"schema", "bgl-exhaustive/1"},
                                  {"scenario", sc.name},
                                  {"scenario_digest", sc.digest().hex()},
                                  {"schedules", res.schedules},
                                  {"pruned", res.pruned},
                                  {"failures", res.failures},
                                  {"failed_properties", res.failed_properties},
                                  {"capped", res.capped},
                                  {"wall_time_ms", wall_ms_since(t0)}};
        std::ofstream(opts.out_dir + "/" + stem + ".exhaustive.json")
            << summary.dump(2) << "\n";
        if (res.first_failure) res.first_failure->save(opts.out_dir + "/" + stem + ".fail.trace.jsonl");
        std::cout << "schedules " << res.schedules << " (+" << res.pruned
                  << " pruned as revisited states), failures " << res.failures
                  << (res.capped ? " (capped)" : "") << "\n";
        return res.failures == 0 && !res.capped ? 0 : 1;
    }

    Trace tr = run_simulation(sc);
    auto checks = run_all_checks(tr);
    RunReport report = RunReport::build(tr, checks, wall_ms_since(t0));
    tr.save(opts.out_dir + "/" + stem + ".trace.jsonl");
    report.save(opts.out_dir + "/" + stem + ".report.json");
    print_checks(checks);
    std::cout << (report.all_passed ? "OK" : "CHECKS FAILED") << " - trace and report in "
              << opts.out_dir << "\n";
    return report.all_passed ? 0 : 1;
}

int cmd_check(const std::string& trace_path, const CommonOpts& opts)
{
    auto t0 = std::chrono::steady_clock::now();
    Trace tr;
    try {
        tr = Trace::load(trace_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    std::vector<CheckReport> checks;
    try {
        checks = run_all_checks(tr);
    } catch (const std::exception& e) {
        std::cerr << "error: trace does not replay: " << e.what() << "\n";
        return 2;
    }
    RunReport report = RunReport::build(tr, checks, wall_ms_since(t0));
    if (!opts.out_dir.empty()) {
        fs::create_directories(opts.out_dir);
        std::string stem = fs::path(trace_path).stem().string();
        report.save(opts.out_dir + "/" + stem + ".check.json");
    }
    print_checks(checks);
    return report.all_passed ? 0 : 1;
}

int cmd_export_dot(const std::string& trace_path, const std::string& bank,
                   std::int64_t event_index)
{
    Trace tr;
    try {
        tr = Trace::load(trace_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    bool bank_known = false;
    for (const auto& b : tr.header.at("banks"))
        if (b.at("name") == bank) bank_known = true;
    if (!bank_known) {
        std::cerr << "error: unknown bank " << bank << "\n";
        return 2;
    }
    std::uint64_t upto = event_index < 0 ? tr.events.size()
                                         : static_cast<std::uint64_t>(event_index);
    if (upto > tr.events.size()) {
        std::cerr << "error: event index beyond trace end\n";
        return 2;
    }

    // Rebuild the bank's graph as of the event index from created/inserted
    // events and the node registry.
    std::map<Digest, Node> registry;
    Node init = decode_node(from_hex(tr.header.at("init").get<std::string>()));
    registry[node_hash(init)] = init;
    for (const auto& e : tr.events)
        if (e.kind == event::kNodeCreated) {
            Node n = decode_node(from_hex(e.data.at("bytes").get<std::string>()));
            registry[node_hash(n)] = n;
        }
    Blockgraph g(init, &scheme_by_name(tr.header.value("scheme", "test")));
    for (const auto& e : tr.events) {
        if (e.index >= upto) break;
        if (e.kind != event::kNodeCreated && e.kind != event::kNodeInserted) continue;
        if (e.data.at("bank") != bank) continue;
        Digest h = Digest::from_hex_str(e.data.at("node").get<std::string>());
        auto it = registry.find(h);
        if (it != registry.end()) g.insert(it->second);
    }
    std::cout << g.dot();
    return 0;
}

int cmd_sweep(const std::string& scenario_path, const CommonOpts& opts, std::uint64_t seed_from,
              std::uint64_t seed_to, unsigned workers)
{
    auto t0 = std::chrono::steady_clock::now();
    Scenario sc = load_scenario_or_exit(scenario_path, opts);
    if (seed_to < seed_from) {
        std::cerr << "error: empty seed range\n";
        return 2;
    }
    fs::create_directories(opts.out_dir);

    std::size_t count = seed_to - seed_from + 1;
    std::vector<std::vector<std::string>> failures(count);
    std::atomic<std::size_t> cursor{0};
    auto worker = [&]() {
        while (true) {
            std::size_t i = cursor.fetch_add(1);
            if (i >= count) return;
            std::uint64_t seed = seed_from + i;
            Trace tr = run_simulation(sc, seed);
            failures[i] = failed_properties(tr);
            if (!failures[i].empty())
                tr.save(opts.out_dir + "/" + sc.name + "-seed" + std::to_string(seed) +
                        ".fail.trace.jsonl");
        }
    };
    std::vector<std::thread> pool;
    unsigned n = std::max(1u, workers);
    for (unsigned w = 0; w < n; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    std::size_t failed = 0;
    nlohmann::json failing = nlohmann::json::array();
    for (std::size_t i = 0; i < count; ++i) {
        if (failures[i].empty()) continue;
        ++failed;
        failing.push_back({{"seed", seed_from + i}, {"properties", failures[i]}});
    }
    nlohmann::json summary = {{"schema", "bgl-sweep/1"},
                              {"scenario", sc.name},
                              {"scenario_digest", sc.digest().hex()},
                              {"seeds", {{"from", seed_from}, {"to", seed_to}}},
                              {"passed", count - failed},
                              {"failed", failed},
                              {"failing", failing},
                              {"wall_time_ms", wall_ms_since(t0)}};
    std::ofstream(opts.out_dir + "/" + sc.name + ".sweep.json") << summary.dump(2) << "\n";
    std::cout << "seeds " << seed_from << ".." << seed_to << ": " << (count - failed)
              << " passed, " << failed << " failed\n";
    return failed == 0 ? 0 : 1;
}

// Golden-vector management: the fixed encodings any reimplementation must
// reproduce bit-exactly.
std::map<std::string, std::string> compute_golden()
{
    const SignatureScheme& scheme = test_scheme();
    auto bank = scheme.keygen(1000);
    auto bank2 = scheme.keygen(1001);
    auto user = scheme.keygen(2000);
    auto user2 = scheme.keygen(2001);
    AccountId a1{BankId{bank.pub}, UserId{user.pub}};
    AccountId a2{BankId{bank2.pub}, UserId{user2.pub}};
    Node init = make_init_node({{a1, 40}});
    Transaction t = make_transaction(scheme, a1, a2, 20, 1, user.sec);
    Node start;
    start.kind = NodeKind::Start;
    start.bank = a1.bank;
    start.seq = 1;
    start.parent = node_hash(init);
    start.txs = {t};
    sign_node(scheme, start, bank.sec);
    return {
        {"init_node.hex", to_hex(encode_node(init))},
        {"init_digest.hex", node_hash(init).hex()},
        {"tx.hex", to_hex(encode_transaction(t))},
        {"start_node.hex", to_hex(encode_node(start))},
        {"start_digest.hex", node_hash(start).hex()},
    };
}

int cmd_golden(const std::string& dir, bool write)
{
    auto vectors = compute_golden();
    int rc = 0;
    for (const auto& [name, hex] : vectors) {
        fs::path path = fs::path(dir) / name;
        if (write) {
            std::ofstream(path) << hex << "\n";
            std::cout << "wrote " << path.string() << "\n";
            continue;
        }
        std::ifstream in(path);
        std::string expected;
        in >> expected;
        if (!in || expected != hex) {
            std::cout << "MISMATCH " << name << "\n";
            rc = 1;
        } else {
            std::cout << "OK " << name << "\n";
        }
    }
    return rc;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"blockgraph ledger simulator and property checker"};
    app.require_subcommand(1);
    CommonOpts opts;

    std::string scenario_path, trace_path, bank;
    std::int64_t event_index = -1;
    std::uint64_t seed_from = 1, seed_to = 100;
    unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::string golden_dir = "golden";
    bool golden_write = false;
    std::uint64_t seed_opt = 0;

    auto add_common = [&](CLI::App* cmd, bool with_seed) {
        cmd->add_option("--out", opts.out_dir, "output directory (default $BGL_OUT or .)");
        cmd->add_option("--scheme", opts.scheme, "signature scheme override: real|test");
        cmd->add_option("--shared-power", opts.shared_power,
                        "shared power rule override: simple|tiered");
        if (with_seed)
            cmd->add_option("--seed", seed_opt, "seed override")->each([&](const std::string&) {
                opts.seed = seed_opt;
            });
    };

    auto* run = app.add_subcommand("run", "run a scenario, write trace and report");
    run->add_option("scenario", scenario_path, "scenario file")->required();
    add_common(run, true);

    auto* check = app.add_subcommand("check", "re-run all oracles on a stored trace");
    check->add_option("trace", trace_path, "trace file")->required();
    add_common(check, false);

    auto* dot = app.add_subcommand("export-dot", "render a bank's graph at an event index");
    dot->add_option("trace", trace_path, "trace file")->required();
    dot->add_option("--bank", bank, "bank name")->required();
    dot->add_option("--event", event_index, "event index (default: end of trace)");

    auto* sweep = app.add_subcommand("sweep", "run many seeds, aggregate verdicts");
    sweep->add_option("scenario", scenario_path, "scenario file")->required();
    sweep->add_option("--seed-from", seed_from, "first seed");
    sweep->add_option("--seed-to", seed_to, "last seed");
    sweep->add_option("--workers", workers, "worker threads");
    add_common(sweep, false);

    auto* golden = app.add_subcommand("golden", "verify or regenerate golden vectors");
    golden->add_option("--dir", golden_dir, "golden vector directory");
    golden->add_flag("--write", golden_write, "rewrite instead of verify");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(scenario_path, opts);
        if (check->parsed()) return cmd_check(trace_path, opts);
        if (dot->parsed()) return cmd_export_dot(trace_path, bank, event_index);
        if (sweep->parsed()) return cmd_sweep(scenario_path, opts, seed_from, seed_to, workers);
        if (golden->parsed()) return cmd_golden(golden_dir, golden_write);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
