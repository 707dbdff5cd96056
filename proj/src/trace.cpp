#include "bgl/trace.hpp"

#include <fstream>
#include <sstream>

namespace bgl {

void Trace::add(std::uint64_t time, std::string kind, nlohmann::json data)
{
    TraceEvent e;
    e.index = events.size();
    e.time = time;
    e.kind = std::move(kind);
    e.data = std::move(data);
    events.push_back(std::move(e));
}

std::string Trace::to_text() const
{
    std::ostringstream os;
    nlohmann::json head = header;
    head["schema"] = kTraceSchema;
    head["version"] = kTraceVersion;
    head["truncated"] = truncated;
    os << head.dump() << "\n";
    for (const auto& e : events) {
        nlohmann::json line = e.data;
        line["i"] = e.index;
        line["t"] = e.time;
        line["k"] = e.kind;
        os << line.dump() << "\n";
    }
    return os.str();
}

Trace Trace::from_text(const std::string& text)
{
    Trace tr;
    std::istringstream is(text);
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        if (first) {
            if (!j.contains("schema") || j["schema"] != kTraceSchema)
                throw CodecError("not a trace file (missing schema tag)");
            if (!j.contains("version") || j["version"].get<int>() != kTraceVersion)
                throw CodecError("unsupported trace schema version");
            tr.truncated = j.value("truncated", false);
            j.erase("schema");
            j.erase("version");
            j.erase("truncated");
            tr.header = std::move(j);
            first = false;
            continue;
        }
        TraceEvent e;
        e.index = j.at("i").get<std::uint64_t>();
        e.time = j.at("t").get<std::uint64_t>();
        e.kind = j.at("k").get<std::string>();
        j.erase("i");
        j.erase("t");
        j.erase("k");
        e.data = std::move(j);
        tr.events.push_back(std::move(e));
    }
    if (first) throw CodecError("empty trace file");
    return tr;
}

void Trace::save(const std::string& path) const
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trace file: " + path);
    out << to_text();
}

Trace Trace::load(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read trace file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

} // namespace bgl
