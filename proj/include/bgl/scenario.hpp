#pragma once

#include <optional>

#include <json.hpp>

#include "bgl/types.hpp"

namespace bgl {

inline constexpr const char* kScenarioSchema = "bgl-scenario";
inline constexpr int kScenarioVersion = 1;

/// Scripted deviation of a byzantine bank. Everything not scripted follows
/// the honest protocol, which is what makes the attacks plausible.
struct ByzBehavior {
    enum class Mode {
        None,           // honest
        EquivStart,     // two rival starts, one per partition, then dual chains
        EquivClose,     // two closes over one start
        EquivAccept,    // two accepts over one close
        Stop,           // crash after a number of own nodes
        Withhold,       // never send to selected banks
    };
    Mode mode = Mode::None;
    std::vector<std::string> partition_a, partition_b; // EquivStart routing
    std::vector<std::string> alt_recipients;           // rival close/accept routing
    std::optional<std::uint64_t> stop_after_own_nodes;
    std::vector<std::string> withhold_targets;

    bool honest() const { return mode == Mode::None; }
};

struct BankSpec {
    std::string name;
    std::uint64_t seed = 0;
    ByzBehavior behavior;
};

struct UserAction {
    enum class Op { Send, Switch, Resubmit };
    Op op = Op::Send;
    std::uint64_t at = 0; // logical submission time
    std::string to_user;
    std::string to_bank;
    std::optional<Money> amount;
    std::optional<std::uint64_t> seq; // override (deliberate double spends)
    std::string submit_to;            // defaults to the user's current bank
};

struct UserSpec {
    std::string name;
    std::uint64_t seed = 0;
    std::string home;
    Money balance = 0; // zero means receive-only, absent from the init node
    std::vector<UserAction> actions;
};

struct LinkDelay {
    std::string from, to;
    std::uint64_t delay = 0;
};

struct DelaySpec {
    enum class Policy { Uniform, Adversarial, Fixed, Exhaustive };
    Policy policy = Policy::Uniform;
    std::uint64_t lo = 0, hi = 4;        // Uniform
    std::vector<LinkDelay> links;        // Fixed: per-link constants
    std::uint64_t default_delay = 1;     // Fixed fallback
};

const char* delay_policy_name(DelaySpec::Policy p);

struct Limits {
    std::uint64_t max_events = 200000;
    int patience = 8;
    std::size_t batch_max = 16;
};

struct Scenario {
    std::string name = "scenario";
    std::uint64_t seed = 1;
    std::string scheme = "test";        // "real" | "test"
    std::string shared_power = "simple"; // "simple" | "tiered"
    DelaySpec delay;
    Limits limits;
    std::vector<BankSpec> banks;
    std::vector<UserSpec> users;

    static Scenario from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static Scenario load(const std::string& path);
    void save(const std::string& path) const;

    /// Digest of the canonical JSON form, stamped into traces and reports.
    Digest digest() const;

    const BankSpec* bank_spec(const std::string& name) const;
    bool all_honest() const;
};

} // namespace bgl
