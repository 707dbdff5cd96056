#include "bgl/report.hpp"

#include <fstream>

namespace bgl {

RunReport RunReport::build(const Trace& trace, const std::vector<CheckReport>& checks,
                           std::uint64_t wall_ms)
{
    RunReport r;
    r.body["schema"] = kReportSchema;
    r.body["version"] = kReportVersion;
    r.body["scenario"] = trace.header.value("scenario", "");
    r.body["scenario_digest"] = trace.header.value("scenario_digest", "");
    r.body["seed"] = trace.header.value("seed", 0ull);
    r.body["scheme"] = trace.header.value("scheme", "");
    r.body["shared_power"] = trace.header.value("shared_power", "");
    r.body["delay_policy"] = trace.header.value("delay_policy", "");
    r.body["events"] = trace.events.size();
    r.body["truncated"] = trace.truncated;

    nlohmann::json banks;
    for (const auto& e : trace.events) {
        if (e.kind != event::kFinalState) continue;
        nlohmann::json b = e.data;
        std::string name = b.at("bank").get<std::string>();
        b.erase("bank");
        banks[name] = b;
    }
    r.body["banks"] = banks;

    nlohmann::json checks_json = nlohmann::json::array();
    r.all_passed = true;
    for (const auto& c : checks) {
        checks_json.push_back(c.to_json());
        if (!c.pass) r.all_passed = false;
    }
    r.body["checks"] = checks_json;
    r.body["pass"] = r.all_passed;
    r.body["wall_time_ms"] = wall_ms; // the one environment-dependent field
    return r;
}

void RunReport::save(const std::string& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write report file: " + path);
    out << to_text();
}

} // namespace bgl
