#pragma once

#include "bgl/oracle.hpp"

namespace bgl {

inline constexpr const char* kReportSchema = "bgl-report";
inline constexpr int kReportVersion = 1;

/// Summary of one run: scenario identity, per-bank final state and every
/// check verdict. Regenerating the report from the stored trace reproduces
/// it byte-for-byte; wall time lives in a single field callers may ignore.
struct RunReport {
    nlohmann::json body;
    bool all_passed = false;

    static RunReport build(const Trace& trace, const std::vector<CheckReport>& checks,
                           std::uint64_t wall_ms);

    std::string to_text() const { return body.dump(2) + "\n"; }
    void save(const std::string& path) const;
};

} // namespace bgl
