#pragma once

#include <functional>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dronebuild/planner.hpp"

namespace dronebuild::plan {

enum class BackendErrorKind {
    KeyMissing,
    Timeout,
    HttpStatus,
    RetriesExhausted,
    UnknownDesign,
};

const char* to_string(BackendErrorKind kind);

class BackendError : public std::runtime_error {
public:
    BackendError(BackendErrorKind kind, const std::string& message, int status_code = 0)
        : std::runtime_error(message), kind_(kind), status_code_(status_code) {}
    BackendErrorKind kind() const { return kind_; }
    int status_code() const { return status_code_; }

private:
    BackendErrorKind kind_;
    int status_code_;
};

struct Completion {
    std::string text;
    long tokens = -1;  // provider-reported total, -1 when unknown
};

// A planner backend maps a full prompt text to a full response text. Backends
// must be safe to call concurrently.
class PlannerBackend {
public:
    virtual ~PlannerBackend() = default;
    virtual Completion complete(const std::string& prompt_text) const = 0;
    virtual std::string name() const = 0;
};

// Sends the assembled prompt and returns the raw response text.
std::string request_plan(const PlannerBackend& backend, const PromptParts& prompt);

// --- mock backend -------------------------------------------------------------

// What a design generator sees: the request and the scene read back out of the
// prompt text, exactly as a live model would.
struct MockContext {
    std::string design_request;
    int pad_size = 0;
    std::set<grid::Cell> occupied;
    bool is_reprompt = false;
};

using DesignGenerator = std::function<ActionPlan(const MockContext&)>;

// Deterministic stand-in for a live model. Designs are matched by keyword
// containment against the request text (longest keyword wins).
class MockBackend : public PlannerBackend {
public:
    // Starts with the stock design library.
    MockBackend();
    explicit MockBackend(std::map<std::string, DesignGenerator> library);

    void register_design(const std::string& keyword, DesignGenerator generator);
    std::vector<std::string> design_names() const;

    Completion complete(const std::string& prompt_text) const override;
    std::string name() const override { return "mock"; }

private:
    std::map<std::string, DesignGenerator> library_;
};

// Stock designs: smiley, cross, diamond, square, letter L, and the
// two-columns-plus-corner layout, all sized for a 5x5 pad or larger. Each
// generator is a pure function of (request, scene); on a reprompt it plans the
// completion of the variant of its shape that best covers the observed blocks,
// folding stray blocks into the layout when no rigid variant covers them.
std::map<std::string, DesignGenerator> mock_design_library();

// Canonical (unadapted) cell set of a stock design on the given pad; the
// ground-truth target for error-free runs. Throws on unknown names.
std::set<grid::Cell> mock_design_target(const std::string& name, int pad_size);

std::set<grid::Cell> parse_scene_from_prompt(const std::string& prompt_text, int* pad_size);

// --- live backend -------------------------------------------------------------

enum class ProviderStyle { OpenAI, Anthropic };

struct LiveConfig {
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string model = "gpt-4o";
    std::string key_env = "OPENAI_API_KEY";
    ProviderStyle style = ProviderStyle::OpenAI;
    double timeout_s = 30.0;
    int max_retries = 2;
    double temperature = 0.0;
    int max_tokens = 2048;
    int backoff_base_ms = 500;
};

// Generic chat-completion client: POSTs the prompt as a single user message,
// retries retryable failures (connection errors, timeouts, 429, 5xx) with
// exponential backoff, and extracts the assistant text per provider style.
class LiveBackend : public PlannerBackend {
public:
    explicit LiveBackend(LiveConfig config);

    Completion complete(const std::string& prompt_text) const override;
    std::string name() const override { return config_.model; }
    const LiveConfig& config() const { return config_; }

private:
    LiveConfig config_;
};

struct BackendConfig {
    std::string kind = "mock";  // "mock" | "live"
    LiveConfig live;
};

std::unique_ptr<PlannerBackend> make_backend(const BackendConfig& config);

}  // namespace dronebuild::plan
