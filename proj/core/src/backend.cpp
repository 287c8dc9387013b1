#include "dronebuild/backend.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <nlohmann/json.hpp>
#include <optional>
#include <sstream>
#include <thread>

#include <httplib.h>

namespace dronebuild::plan {

using nlohmann::json;

const char* to_string(BackendErrorKind kind) {
    switch (kind) {
        case BackendErrorKind::KeyMissing: return "KeyMissing";
        case BackendErrorKind::Timeout: return "Timeout";
        case BackendErrorKind::HttpStatus: return "HttpStatus";
        case BackendErrorKind::RetriesExhausted: return "RetriesExhausted";
        case BackendErrorKind::UnknownDesign: return "UnknownDesign";
    }
    return "Unknown";
}

std::string request_plan(const PlannerBackend& backend, const PromptParts& prompt) {
    return backend.complete(prompt.assemble()).text;
}

// --- mock backend -------------------------------------------------------------

namespace {

using grid::Cell;

struct Shape {
    std::string title;
    std::vector<Cell> cells;                   // normalized: min x = min y = 0
    std::optional<Cell> preferred_anchor;      // initial anchor; centered when unset
};

std::vector<Cell> normalized(std::vector<Cell> cells) {
    int min_x = cells[0].x, min_y = cells[0].y;
    for (const auto& c : cells) {
        min_x = std::min(min_x, c.x);
        min_y = std::min(min_y, c.y);
    }
    for (auto& c : cells) {
        c.x -= min_x;
        c.y -= min_y;
    }
    std::sort(cells.begin(), cells.end());
    return cells;
}

Cell bounding_box(const std::vector<Cell>& cells) {
    Cell bb{0, 0};
    for (const auto& c : cells) {
        bb.x = std::max(bb.x, c.x + 1);
        bb.y = std::max(bb.y, c.y + 1);
    }
    return bb;
}

// The 8 grid symmetries of a normalized cell list, deduplicated.
std::vector<std::vector<Cell>> orientations(const std::vector<Cell>& cells) {
    std::set<std::vector<Cell>> seen;
    std::vector<Cell> cur = cells;
    for (int mirror = 0; mirror < 2; ++mirror) {
        for (int rot = 0; rot < 4; ++rot) {
            seen.insert(normalized(cur));
            for (auto& c : cur) c = Cell{c.y, -c.x};
        }
        for (auto& c : cur) c = Cell{-c.x, c.y};
    }
    return {seen.begin(), seen.end()};
}

std::set<Cell> anchored(const std::vector<Cell>& cells, Cell anchor) {
    std::set<Cell> out;
    for (const auto& c : cells) out.insert(Cell{c.x + anchor.x, c.y + anchor.y});
    return out;
}

// Every placement of the shape (all symmetries, all translations) inside the
// pad, in a deterministic order.
std::vector<std::set<Cell>> enumerate_variants(const Shape& shape, int pad_size) {
    std::vector<std::set<Cell>> variants;
    std::set<std::set<Cell>> seen;
    for (const auto& orient : orientations(shape.cells)) {
        const Cell bb = bounding_box(orient);
        for (int dy = 0; dy + bb.y <= pad_size; ++dy)
            for (int dx = 0; dx + bb.x <= pad_size; ++dx) {
                auto v = anchored(orient, Cell{dx, dy});
                if (seen.insert(v).second) variants.push_back(std::move(v));
            }
    }
    return variants;
}

std::set<Cell> canonical_variant(const Shape& shape, int pad_size) {
    const Cell bb = bounding_box(shape.cells);
    if (bb.x > pad_size || bb.y > pad_size)
        throw BackendError(BackendErrorKind::UnknownDesign,
                           "design \"" + shape.title + "\" needs a pad of at least " +
                               std::to_string(std::max(bb.x, bb.y)) + " cells");
    const Cell anchor = shape.preferred_anchor.value_or(
        Cell{(pad_size - bb.x) / 2, (pad_size - bb.y) / 2});
    return anchored(shape.cells, anchor);
}

size_t overlap(const std::set<Cell>& a, const std::set<Cell>& b) {
    size_t n = 0;
    for (const auto& c : a)
        if (b.count(c)) ++n;
    return n;
}

bool subset(const std::set<Cell>& small, const std::set<Cell>& big) {
    return std::all_of(small.begin(), small.end(),
                       [&](const Cell& c) { return big.count(c) > 0; });
}

// Pursued design for the observed occupancy: the canonical placement when it
// still covers everything, otherwise the best-covering rigid variant,
// otherwise the best-overlap variant with the stray blocks folded in.
std::set<Cell> choose_target(const Shape& shape, int pad_size, const std::set<Cell>& occupied) {
    const auto canonical = canonical_variant(shape, pad_size);
    if (occupied.empty()) return canonical;
    if (subset(occupied, canonical) && canonical != occupied) return canonical;

    const auto variants = enumerate_variants(shape, pad_size);
    std::optional<std::set<Cell>> best_covering;
    for (const auto& v : variants) {
        if (!subset(occupied, v) || v == occupied) continue;
        if (!best_covering || v < *best_covering) best_covering = v;
    }
    if (best_covering) return *best_covering;

    std::optional<std::set<Cell>> best;
    size_t best_overlap = 0;
    for (const auto& v : variants) {
        if (subset(v, occupied)) continue;  // nothing left to place
        const size_t o = overlap(v, occupied);
        if (!best || o > best_overlap || (o == best_overlap && v < *best)) {
            best = v;
            best_overlap = o;
        }
    }
    if (!best)
        throw BackendError(BackendErrorKind::UnknownDesign,
                           "design \"" + shape.title + "\" cannot be extended on this pad");
    auto target = *best;
    target.insert(occupied.begin(), occupied.end());
    return target;
}

// Back-to-front execution order keeps later placements from being occluded by
// rows in front of them.
std::vector<Cell> execution_order(const std::set<Cell>& cells) {
    std::vector<Cell> out(cells.begin(), cells.end());
    std::sort(out.begin(), out.end(), [](const Cell& a, const Cell& b) {
        if (a.y != b.y) return a.y > b.y;
        return a.x < b.x;
    });
    return out;
}

DesignGenerator shape_generator(Shape shape) {
    return [shape](const MockContext& ctx) {
        const auto target = choose_target(shape, ctx.pad_size, ctx.occupied);
        std::set<Cell> remaining = target;
        for (const auto& c : ctx.occupied) remaining.erase(c);
        ActionPlan plan;
        plan.title = shape.title;
        plan.coordinates = execution_order(remaining);
        plan.used_coordinates = {ctx.occupied.begin(), ctx.occupied.end()};
        if (ctx.occupied.empty())
            plan.reasoning = "canonical " + shape.title + " layout";
        else if (subset(ctx.occupied, target) &&
                 overlap(target, ctx.occupied) == ctx.occupied.size())
            plan.reasoning = "completing the " + shape.title +
                             " variant that covers the blocks already placed";
        else
            plan.reasoning = "adapting the " + shape.title + " layout around existing blocks";
        return plan;
    };
}

const std::vector<Shape>& stock_shapes() {
    static const std::vector<Shape> shapes = {
        {"smiley", {{1, 3}, {3, 3}, {0, 1}, {4, 1}, {1, 0}, {2, 0}, {3, 0}}, std::nullopt},
        {"cross", {{1, 0}, {0, 1}, {1, 1}, {2, 1}, {1, 2}}, std::nullopt},
        {"diamond", {{1, 0}, {0, 1}, {2, 1}, {1, 2}}, std::nullopt},
        {"square", {{0, 0}, {1, 0}, {2, 0}, {0, 1}, {2, 1}, {0, 2}, {1, 2}, {2, 2}}, std::nullopt},
        {"letter l", {{0, 0}, {1, 0}, {2, 0}, {0, 1}, {0, 2}, {0, 3}}, std::nullopt},
        {"two columns", {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {1, 2}, {4, 0}}, Cell{0, 0}},
    };
    return shapes;
}

std::string lowercased(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

}  // namespace

std::map<std::string, DesignGenerator> mock_design_library() {
    std::map<std::string, DesignGenerator> lib;
    for (const auto& shape : stock_shapes()) lib[shape.title] = shape_generator(shape);
    return lib;
}

std::set<grid::Cell> mock_design_target(const std::string& name, int pad_size) {
    for (const auto& shape : stock_shapes())
        if (shape.title == lowercased(name)) return canonical_variant(shape, pad_size);
    throw BackendError(BackendErrorKind::UnknownDesign, "unknown design \"" + name + "\"");
}

std::set<grid::Cell> parse_scene_from_prompt(const std::string& prompt_text, int* pad_size) {
    // The scene grid is the block of consecutive lines made only of o/x tokens.
    std::istringstream is(prompt_text);
    std::string line;
    std::vector<std::string> grid_lines;
    bool in_grid = false;
    while (std::getline(is, line)) {
        bool grid_line = !line.empty();
        for (const char ch : line)
            if (ch != 'o' && ch != 'x' && ch != ' ') {
                grid_line = false;
                break;
            }
        if (grid_line) {
            grid_lines.push_back(line);
            in_grid = true;
        } else if (in_grid) {
            break;
        }
    }
    std::string joined;
    for (const auto& l : grid_lines) joined += l + "\n";
    const auto scene = grid::parse_scene_text(joined);
    if (pad_size) *pad_size = scene.pad_size;
    return scene.occupied;
}

MockBackend::MockBackend() : library_(mock_design_library()) {}

MockBackend::MockBackend(std::map<std::string, DesignGenerator> library)
    : library_(std::move(library)) {}

void MockBackend::register_design(const std::string& keyword, DesignGenerator generator) {
    library_[lowercased(keyword)] = std::move(generator);
}

std::vector<std::string> MockBackend::design_names() const {
    std::vector<std::string> names;
    for (const auto& [k, v] : library_) names.push_back(k);
    return names;
}

Completion MockBackend::complete(const std::string& prompt_text) const {
    MockContext ctx;
    const std::string req_marker = "Design request:\n";
    const size_t req_pos = prompt_text.find(req_marker);
    const size_t req_end = prompt_text.find("\n\nCurrent scene:", req_pos);
    if (req_pos == std::string::npos || req_end == std::string::npos)
        throw BackendError(BackendErrorKind::UnknownDesign,
                           "prompt text lacks the expected section layout");
    ctx.design_request = prompt_text.substr(req_pos + req_marker.size(),
                                            req_end - req_pos - req_marker.size());
    ctx.occupied = parse_scene_from_prompt(prompt_text, &ctx.pad_size);
    ctx.is_reprompt = prompt_text.find(kRepromptRulesMarker) != std::string::npos;

    const std::string request = lowercased(ctx.design_request);
    const DesignGenerator* generator = nullptr;
    size_t best_len = 0;
    for (const auto& [keyword, gen] : library_) {
        if (request.find(keyword) == std::string::npos) continue;
        if (keyword.size() > best_len) {
            best_len = keyword.size();
            generator = &gen;
        }
    }
    if (!generator) {
        std::ostringstream os;
        os << "no design registered for request \"" << ctx.design_request << "\"; available:";
        for (const auto& [k, v] : library_) os << " " << k << ",";
        std::string msg = os.str();
        msg.pop_back();
        throw BackendError(BackendErrorKind::UnknownDesign, msg);
    }
    const ActionPlan plan = (*generator)(ctx);
    return Completion{"Here is the plan.\n\n```json\n" + serialize_plan(plan) + "\n```\n", -1};
}

// --- live backend -------------------------------------------------------------

LiveBackend::LiveBackend(LiveConfig config) : config_(std::move(config)) {}

namespace {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& endpoint) {
    const size_t scheme = endpoint.find("://");
    if (scheme == std::string::npos)
        throw BackendError(BackendErrorKind::HttpStatus, "endpoint lacks a scheme: " + endpoint);
    const size_t slash = endpoint.find('/', scheme + 3);
    if (slash == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, slash), endpoint.substr(slash)};
}

bool retryable_status(int status) { return status == 429 || (status >= 500 && status < 600); }

}  // namespace

Completion LiveBackend::complete(const std::string& prompt_text) const {
    const char* key = std::getenv(config_.key_env.c_str());
    if (!key || !*key)
        throw BackendError(BackendErrorKind::KeyMissing,
                           "environment variable " + config_.key_env + " is not set");

    const SplitUrl url = split_url(config_.endpoint);

    json body;
    httplib::Headers headers;
    if (config_.style == ProviderStyle::Anthropic) {
        body["model"] = config_.model;
        body["max_tokens"] = config_.max_tokens;
        body["temperature"] = config_.temperature;
        body["messages"] = json::array({{{"role", "user"}, {"content", prompt_text}}});
        headers.emplace("x-api-key", key);
        headers.emplace("anthropic-version", "2023-06-01");
    } else {
        body["model"] = config_.model;
        body["max_tokens"] = config_.max_tokens;
        body["temperature"] = config_.temperature;
        body["messages"] = json::array({{{"role", "user"}, {"content", prompt_text}}});
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    const std::string payload = body.dump();

    std::string last_failure;
    bool last_was_timeout = false;
    const int attempts = config_.max_retries + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
        if (attempt > 0) {
            const int delay =
                std::min(config_.backoff_base_ms * (1 << (attempt - 1)), 8000);
            std::this_thread::sleep_for(std::chrono::milliseconds(delay));
        }
        httplib::Client client(url.base);
        const auto timeout_s = static_cast<time_t>(config_.timeout_s);
        const auto timeout_us =
            static_cast<time_t>((config_.timeout_s - double(timeout_s)) * 1e6);
        client.set_connection_timeout(timeout_s, timeout_us);
        client.set_read_timeout(timeout_s, timeout_us);
        client.set_write_timeout(timeout_s, timeout_us);

        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_was_timeout = res.error() == httplib::Error::ConnectionTimeout ||
                               res.error() == httplib::Error::Read;
            last_failure = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            if (retryable_status(res->status)) {
                last_was_timeout = false;
                last_failure = "HTTP " + std::to_string(res->status);
                continue;
            }
            throw BackendError(BackendErrorKind::HttpStatus,
                               "HTTP " + std::to_string(res->status) + ": " + res->body,
                               res->status);
        }

        json j;
        try {
            j = json::parse(res->body);
        } catch (const json::parse_error&) {
            throw BackendError(BackendErrorKind::HttpStatus,
                               "provider returned a non-JSON body", res->status);
        }
        Completion out;
        try {
            if (config_.style == ProviderStyle::Anthropic)
                out.text = j.at("content").at(0).at("text").get<std::string>();
            else
                out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const json::exception&) {
            throw BackendError(BackendErrorKind::HttpStatus,
                               "provider response lacks the completion text field", res->status);
        }
        if (j.contains("usage")) {
            const auto& usage = j["usage"];
            if (usage.contains("total_tokens"))
                out.tokens = usage["total_tokens"].get<long>();
            else if (usage.contains("input_tokens") && usage.contains("output_tokens"))
                out.tokens =
                    usage["input_tokens"].get<long>() + usage["output_tokens"].get<long>();
        }
        return out;
    }

    if (last_was_timeout && attempts == 1)
        throw BackendError(BackendErrorKind::Timeout, "request timed out: " + last_failure);
    throw BackendError(BackendErrorKind::RetriesExhausted,
                       "gave up after " + std::to_string(attempts) + " attempts; last: " +
                           last_failure);
}

std::unique_ptr<PlannerBackend> make_backend(const BackendConfig& config) {
    if (config.kind == "mock") return std::make_unique<MockBackend>();
    if (config.kind == "live") return std::make_unique<LiveBackend>(config.live);
    throw std::invalid_argument("unknown backend kind \"" + config.kind + "\"");
}

}  // namespace dronebuild::plan
