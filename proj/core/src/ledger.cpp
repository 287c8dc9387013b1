#include "dronebuild/ledger.hpp"

#include <chrono>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace dronebuild {

using json = nlohmann::ordered_json;

namespace {

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

RunLedger::RunLedger(const std::filesystem::path& file) {
    if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
    out_.open(file, std::ios::app);
    if (!out_) throw std::runtime_error("cannot open run ledger " + file.string());
    enabled_ = true;
}

void RunLedger::write_line(const std::string& line) {
    std::lock_guard<std::mutex> lock(mutex_);
    out_ << line << "\n";
    out_.flush();
}

void RunLedger::log_exchange(const std::string& prompt, const std::string& raw_response,
                             const std::string& parse_result) {
    if (!enabled_) return;
    nlohmann::ordered_json j;
    j["timestamp"] = iso_timestamp();
    j["kind"] = "exchange";
    j["prompt"] = prompt;
    j["raw_response"] = raw_response;
    j["parse_result"] = parse_result;
    write_line(j.dump());
}

void RunLedger::log_event(const std::string& kind, const std::string& payload_json) {
    if (!enabled_) return;
    nlohmann::ordered_json j;
    j["timestamp"] = iso_timestamp();
    j["kind"] = kind;
    try {
        j["payload"] = json::parse(payload_json);
    } catch (const json::parse_error&) {
        j["payload"] = payload_json;
    }
    write_line(j.dump());
}

}  // namespace dronebuild
