#include "bgl/scenario.hpp"

#include <fstream>
#include <sstream>

#include "bgl/codec.hpp"

namespace bgl {

namespace {

ByzBehavior behavior_from_json(const nlohmann::json& j)
{
    ByzBehavior b;
    if (j.is_null()) return b;
    std::string mode = j.value("mode", "honest");
    if (mode == "honest") {
        b.mode = ByzBehavior::Mode::None;
    } else if (mode == "equivocate-start") {
        b.mode = ByzBehavior::Mode::EquivStart;
        for (const auto& x : j.at("partition_a")) b.partition_a.push_back(x.get<std::string>());
        for (const auto& x : j.at("partition_b")) b.partition_b.push_back(x.get<std::string>());
    } else if (mode == "equivocate-close") {
        b.mode = ByzBehavior::Mode::EquivClose;
        for (const auto& x : j.value("alt_recipients", nlohmann::json::array()))
            b.alt_recipients.push_back(x.get<std::string>());
    } else if (mode == "equivocate-accept") {
        b.mode = ByzBehavior::Mode::EquivAccept;
        for (const auto& x : j.value("alt_recipients", nlohmann::json::array()))
            b.alt_recipients.push_back(x.get<std::string>());
    } else if (mode == "stop") {
        b.mode = ByzBehavior::Mode::Stop;
    } else if (mode == "withhold") {
        b.mode = ByzBehavior::Mode::Withhold;
        for (const auto& x : j.at("targets")) b.withhold_targets.push_back(x.get<std::string>());
    } else {
        throw std::invalid_argument("unknown byzantine mode: " + mode);
    }
    if (j.contains("stop_after_own_nodes"))
        b.stop_after_own_nodes = j["stop_after_own_nodes"].get<std::uint64_t>();
    return b;
}

nlohmann::json behavior_to_json(const ByzBehavior& b)
{
    nlohmann::json j;
    switch (b.mode) {
    case ByzBehavior::Mode::None: j["mode"] = "honest"; break;
    case ByzBehavior::Mode::EquivStart:
        j["mode"] = "equivocate-start";
        j["partition_a"] = b.partition_a;
        j["partition_b"] = b.partition_b;
        break;
    case ByzBehavior::Mode::EquivClose:
        j["mode"] = "equivocate-close";
        j["alt_recipients"] = b.alt_recipients;
        break;
    case ByzBehavior::Mode::EquivAccept:
        j["mode"] = "equivocate-accept";
        j["alt_recipients"] = b.alt_recipients;
        break;
    case ByzBehavior::Mode::Stop: j["mode"] = "stop"; break;
    case ByzBehavior::Mode::Withhold:
        j["mode"] = "withhold";
        j["targets"] = b.withhold_targets;
        break;
    }
    if (b.stop_after_own_nodes) j["stop_after_own_nodes"] = *b.stop_after_own_nodes;
    return j;
}

} // namespace

const char* delay_policy_name(DelaySpec::Policy p)
{
    switch (p) {
    case DelaySpec::Policy::Uniform: return "uniform";
    case DelaySpec::Policy::Adversarial: return "adversarial";
    case DelaySpec::Policy::Fixed: return "fixed";
    case DelaySpec::Policy::Exhaustive: return "exhaustive";
    }
    return "?";
}

Scenario Scenario::from_json(const nlohmann::json& j)
{
    if (!j.contains("schema") || j["schema"] != kScenarioSchema)
        throw std::invalid_argument("not a scenario file (missing schema tag)");
    if (j.value("version", 0) != kScenarioVersion)
        throw std::invalid_argument("unsupported scenario schema version");

    Scenario sc;
    sc.name = j.value("name", "scenario");
    sc.seed = j.value("seed", 1ull);
    sc.scheme = j.value("scheme", "test");
    sc.shared_power = j.value("shared_power", "simple");

    if (j.contains("delay")) {
        const auto& d = j["delay"];
        std::string policy = d.value("policy", "uniform");
        if (policy == "uniform") {
            sc.delay.policy = DelaySpec::Policy::Uniform;
            sc.delay.lo = d.value("lo", 0ull);
            sc.delay.hi = d.value("hi", 4ull);
        } else if (policy == "adversarial") {
            sc.delay.policy = DelaySpec::Policy::Adversarial;
        } else if (policy == "fixed") {
            sc.delay.policy = DelaySpec::Policy::Fixed;
            sc.delay.default_delay = d.value("default", 1ull);
            for (const auto& l : d.value("links", nlohmann::json::array()))
                sc.delay.links.push_back({l.at("from").get<std::string>(),
                                          l.at("to").get<std::string>(),
                                          l.at("delay").get<std::uint64_t>()});
        } else if (policy == "exhaustive") {
            sc.delay.policy = DelaySpec::Policy::Exhaustive;
        } else {
            throw std::invalid_argument("unknown delay policy: " + policy);
        }
    }
    if (j.contains("limits")) {
        const auto& l = j["limits"];
        sc.limits.max_events = l.value("max_events", 200000ull);
        sc.limits.patience = l.value("patience", 8);
        sc.limits.batch_max = l.value("batch_max", std::size_t{16});
    }

    for (const auto& b : j.at("banks")) {
        BankSpec spec;
        spec.name = b.at("name").get<std::string>();
        spec.seed = b.at("seed").get<std::uint64_t>();
        if (b.contains("behavior")) spec.behavior = behavior_from_json(b["behavior"]);
        sc.banks.push_back(std::move(spec));
    }
    for (const auto& u : j.at("users")) {
        UserSpec spec;
        spec.name = u.at("name").get<std::string>();
        spec.seed = u.at("seed").get<std::uint64_t>();
        spec.home = u.at("home").get<std::string>();
        spec.balance = u.value("balance", 0ull);
        for (const auto& a : u.value("actions", nlohmann::json::array())) {
            UserAction act;
            std::string op = a.value("op", "send");
            if (op == "send")
                act.op = UserAction::Op::Send;
            else if (op == "switch")
                act.op = UserAction::Op::Switch;
            else if (op == "resubmit")
                act.op = UserAction::Op::Resubmit;
            else
                throw std::invalid_argument("unknown user action: " + op);
            act.at = a.value("at", 0ull);
            act.to_user = a.value("to_user", "");
            act.to_bank = a.value("to_bank", "");
            if (a.contains("amount")) act.amount = a["amount"].get<Money>();
            if (a.contains("seq")) act.seq = a["seq"].get<std::uint64_t>();
            act.submit_to = a.value("submit_to", "");
            spec.actions.push_back(std::move(act));
        }
        sc.users.push_back(std::move(spec));
    }

    if (sc.banks.empty()) throw std::invalid_argument("scenario needs at least one bank");
    for (const auto& u : sc.users)
        if (!sc.bank_spec(u.home))
            throw std::invalid_argument("user " + u.name + " references unknown bank " + u.home);
    return sc;
}

nlohmann::json Scenario::to_json() const
{
    nlohmann::json j;
    j["schema"] = kScenarioSchema;
    j["version"] = kScenarioVersion;
    j["name"] = name;
    j["seed"] = seed;
    j["scheme"] = scheme;
    j["shared_power"] = shared_power;
    nlohmann::json d;
    d["policy"] = delay_policy_name(delay.policy);
    if (delay.policy == DelaySpec::Policy::Uniform) {
        d["lo"] = delay.lo;
        d["hi"] = delay.hi;
    } else if (delay.policy == DelaySpec::Policy::Fixed) {
        d["default"] = delay.default_delay;
        nlohmann::json links = nlohmann::json::array();
        for (const auto& l : delay.links)
            links.push_back({{"from", l.from}, {"to", l.to}, {"delay", l.delay}});
        d["links"] = links;
    }
    j["delay"] = d;
    j["limits"] = {{"max_events", limits.max_events},
                   {"patience", limits.patience},
                   {"batch_max", limits.batch_max}};
    j["banks"] = nlohmann::json::array();
    for (const auto& b : banks) {
        nlohmann::json bj = {{"name", b.name}, {"seed", b.seed}};
        if (!b.behavior.honest()) bj["behavior"] = behavior_to_json(b.behavior);
        j["banks"].push_back(bj);
    }
    j["users"] = nlohmann::json::array();
    for (const auto& u : users) {
        nlohmann::json uj = {{"name", u.name}, {"seed", u.seed}, {"home", u.home},
                             {"balance", u.balance}};
        nlohmann::json actions = nlohmann::json::array();
        for (const auto& a : u.actions) {
            nlohmann::json aj;
            aj["op"] = a.op == UserAction::Op::Send     ? "send"
                       : a.op == UserAction::Op::Switch ? "switch"
                                                        : "resubmit";
            aj["at"] = a.at;
            if (!a.to_user.empty()) aj["to_user"] = a.to_user;
            if (!a.to_bank.empty()) aj["to_bank"] = a.to_bank;
            if (a.amount) aj["amount"] = *a.amount;
            if (a.seq) aj["seq"] = *a.seq;
            if (!a.submit_to.empty()) aj["submit_to"] = a.submit_to;
            actions.push_back(aj);
        }
        uj["actions"] = actions;
        j["users"].push_back(uj);
    }
    return j;
}

Scenario Scenario::load(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read scenario file: " + path);
    nlohmann::json j;
    in >> j;
    return from_json(j);
}

void Scenario::save(const std::string& path) const
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write scenario file: " + path);
    out << to_json().dump(2) << "\n";
}

Digest Scenario::digest() const
{
    std::string text = to_json().dump();
    return sha256(ByteSpan(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

const BankSpec* Scenario::bank_spec(const std::string& bank_name) const
{
    for (const auto& b : banks)
        if (b.name == bank_name) return &b;
    return nullptr;
}

bool Scenario::all_honest() const
{
    for (const auto& b : banks)
        if (!b.behavior.honest()) return false;
    return true;
}

} // namespace bgl
