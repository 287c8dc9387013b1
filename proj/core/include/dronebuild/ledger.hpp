#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>

namespace dronebuild {

// Append-only JSON-lines record of every planner exchange and notable event.
// A default-constructed ledger discards everything, so call sites never need
// to branch on whether logging is enabled.
class RunLedger {
public:
    RunLedger() = default;
    explicit RunLedger(const std::filesystem::path& file);

    bool enabled() const { return enabled_; }

    // {"timestamp", "kind":"exchange", "prompt", "raw_response", "parse_result"}
    void log_exchange(const std::string& prompt, const std::string& raw_response,
                      const std::string& parse_result);

    // {"timestamp", "kind", "payload"} with payload parsed from payload_json.
    void log_event(const std::string& kind, const std::string& payload_json);

private:
    void write_line(const std::string& line);

    bool enabled_ = false;
    std::ofstream out_;
    std::mutex mutex_;
};

}  // namespace dronebuild
