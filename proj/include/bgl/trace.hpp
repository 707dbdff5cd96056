#pragma once

#include <iosfwd>
#include <optional>

#include <json.hpp>

#include "bgl/types.hpp"

namespace bgl {

inline constexpr const char* kTraceSchema = "bgl-trace";
inline constexpr int kTraceVersion = 1;

/// One timestamped record of an execution. `time` is the logical clock (no
/// wall time anywhere); `index` the global event counter that breaks ties.
struct TraceEvent {
    std::uint64_t index = 0;
    std::uint64_t time = 0;
    std::string kind;
    nlohmann::json data; // flat deterministic payload (sorted keys)
};

namespace event {
inline constexpr const char* kUserTxSubmitted = "user-tx-submitted";
inline constexpr const char* kMessageSent = "message-sent";
inline constexpr const char* kMessageDelivered = "message-delivered";
inline constexpr const char* kNodeCreated = "node-created";
inline constexpr const char* kNodeInserted = "node-inserted";
inline constexpr const char* kNodeQuarantined = "node-quarantined";
inline constexpr const char* kNodeDiscarded = "node-discarded";
inline constexpr const char* kTxAccepted = "tx-accepted";
inline constexpr const char* kTxRejected = "tx-rejected";
inline constexpr const char* kBankStopped = "bank-stopped";
inline constexpr const char* kFinalState = "final-state";
} // namespace event

struct Trace {
    nlohmann::json header; // schema, scenario digest, banks, users, config
    std::vector<TraceEvent> events;
    bool truncated = false;

    void add(std::uint64_t time, std::string kind, nlohmann::json data);

    std::string to_text() const;
    static Trace from_text(const std::string& text);

    void save(const std::string& path) const;
    static Trace load(const std::string& path);
};

} // namespace bgl
