#include "dronebuild/planner.hpp"

#include <cmath>
#include <nlohmann/json.hpp>
#include <sstream>

namespace dronebuild::plan {

using nlohmann::json;

namespace {

const std::string kTaskTemplate =
    "You plan builds for a drone that assembles designs from identical blocks on a square "
    "build pad. Produce the ordered list of grid coordinates the drone should execute to "
    "build the requested design.";

const std::string kRulesBase =
    "Stay within the pad bounds. Use only integer coordinate values. Place at most one "
    "block per coordinate; list each coordinate at most once. Do not relist coordinates "
    "that are already occupied unless you mark them in \"stacked\". Respond with exactly "
    "one JSON object matching the output schema and no other text.";

const std::string kOutputSchema =
    "Respond with a JSON object of this shape:\n"
    "{\n"
    "  \"title\": \"<short name for the design>\",\n"
    "  \"coordinates\": [[x, y], ...],\n"
    "  \"used_coordinates\": [[x, y], ...],\n"
    "  \"reasoning\": \"<how the design was derived>\"\n"
    "}\n"
    "\"coordinates\" is the ordered list of placements to execute. Every coordinate is "
    "written [x, y] where x is the column counted from the left and y is the row counted "
    "from the bottom. \"used_coordinates\" lists the cells that are already occupied. An "
    "optional \"stacked\" array of [x, y] pairs marks entries of \"coordinates\" that go "
    "on top of an existing block.";

}  // namespace

const std::string kRepromptRulesMarker =
    "Blocks already on the pad cannot be moved or removed. Incorporate the existing "
    "blocks into the design, adapting the layout if necessary, and plan only the "
    "additional placements needed to complete it.";

std::string PromptParts::assemble() const {
    std::ostringstream os;
    os << "Task:\n" << task << "\n\n";
    os << "Design request:\n" << design_request << "\n\n";
    os << "Current scene:\n" << current_scene << "\n\n";
    os << "Rules:\n" << rules << "\n\n";
    os << "Output schema:\n" << output_schema << "\n";
    return os.str();
}

namespace {

std::string scene_section(const grid::BuildState& state, const grid::GridWorld& grid) {
    std::ostringstream os;
    const int n = grid.pad_size;
    os << "The build pad is a " << n << "x" << n << " grid. Cells are addressed (x, y) with "
       << "integer coordinates from (0, 0) at the bottom left to (" << n - 1 << ", " << n - 1
       << ") at the top right.\n";
    os << "The grid below prints the top row (y = " << n - 1 << ") first and the bottom row "
       << "(y = 0) last. \"o\" is a free cell, \"x\" is a cell occupied by a block.\n";
    const auto occupied = occupied_cells(state);
    os << "Occupied coordinates: ";
    if (occupied.empty()) {
        os << "none";
    } else {
        bool first = true;
        for (const auto& c : occupied) {
            if (!first) os << ", ";
            os << grid::to_string(c);
            first = false;
        }
    }
    os << "\n" << render_scene_text(state);
    return os.str();
}

}  // namespace

PromptParts build_prompt(const std::string& design_request, const grid::BuildState& state,
                         const grid::GridWorld& grid) {
    PromptParts parts;
    parts.task = kTaskTemplate;
    parts.design_request = design_request;
    parts.current_scene = scene_section(state, grid);
    parts.rules = kRulesBase;
    parts.output_schema = kOutputSchema;
    return parts;
}

PromptParts build_reprompt(const std::string& design_request, const grid::BuildState& state,
                           const grid::GridWorld& grid, const std::string& failed_step) {
    PromptParts parts = build_prompt(design_request, state, grid);
    parts.rules = kRulesBase + "\n" + kRepromptRulesMarker;
    if (!failed_step.empty()) parts.rules += "\nLast placement report: " + failed_step;
    return parts;
}

std::string serialize_plan(const ActionPlan& plan) {
    nlohmann::ordered_json j;
    j["title"] = plan.title;
    auto cells_to_json = [](const auto& cells) {
        json arr = json::array();
        for (const auto& c : cells) arr.push_back({c.x, c.y});
        return arr;
    };
    j["coordinates"] = cells_to_json(plan.coordinates);
    j["used_coordinates"] = cells_to_json(plan.used_coordinates);
    j["reasoning"] = plan.reasoning;
    if (!plan.stacked.empty()) j["stacked"] = cells_to_json(plan.stacked);
    return j.dump();
}

const char* to_string(PlanErrorKind kind) {
    switch (kind) {
        case PlanErrorKind::NoJsonFound: return "NoJsonFound";
        case PlanErrorKind::SchemaMismatch: return "SchemaMismatch";
        case PlanErrorKind::NonIntegerCoordinate: return "NonIntegerCoordinate";
        case PlanErrorKind::OutOfBounds: return "OutOfBounds";
        case PlanErrorKind::DuplicateCoordinate: return "DuplicateCoordinate";
    }
    return "Unknown";
}

namespace {

// First brace-balanced JSON object in the text, ignoring braces inside string
// literals.
std::string extract_json_object(const std::string& raw) {
    const size_t start = raw.find('{');
    if (start == std::string::npos)
        throw PlanParseError(PlanErrorKind::NoJsonFound, "response contains no JSON object");
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (size_t i = start; i < raw.size(); ++i) {
        const char ch = raw[i];
        if (in_string) {
            if (escaped)
                escaped = false;
            else if (ch == '\\')
                escaped = true;
            else if (ch == '"')
                in_string = false;
            continue;
        }
        if (ch == '"') {
            in_string = true;
        } else if (ch == '{') {
            ++depth;
        } else if (ch == '}') {
            if (--depth == 0) return raw.substr(start, i - start + 1);
        }
    }
    throw PlanParseError(PlanErrorKind::NoJsonFound, "JSON object is not closed");
}

std::vector<grid::Cell> parse_cell_array(const json& arr, const grid::GridWorld& grid,
                                         const std::string& field, bool discard_oob,
                                         int* discarded) {
    if (!arr.is_array())
        throw PlanParseError(PlanErrorKind::SchemaMismatch, "\"" + field + "\" must be an array");
    std::vector<grid::Cell> cells;
    for (const auto& entry : arr) {
        if (!entry.is_array() || entry.size() != 2)
            throw PlanParseError(PlanErrorKind::SchemaMismatch,
                                 "\"" + field + "\" entries must be [x, y] pairs");
        grid::Cell c;
        int* comp[2] = {&c.x, &c.y};
        for (int k = 0; k < 2; ++k) {
            const auto& v = entry[k];
            if (v.is_number_integer()) {
                *comp[k] = v.get<int>();
            } else if (v.is_number_float()) {
                const double d = v.get<double>();
                if (d != std::floor(d))
                    throw PlanParseError(PlanErrorKind::NonIntegerCoordinate,
                                         "\"" + field + "\" contains non-integer value " +
                                             std::to_string(d));
                *comp[k] = static_cast<int>(d);
            } else {
                throw PlanParseError(PlanErrorKind::NonIntegerCoordinate,
                                     "\"" + field + "\" contains a non-numeric coordinate");
            }
        }
        if (!grid.in_pad(c)) {
            if (discard_oob) {
                if (discarded) ++*discarded;
                continue;
            }
            throw PlanParseError(PlanErrorKind::OutOfBounds,
                                 "coordinate " + grid::to_string(c) + " outside the " +
                                     std::to_string(grid.pad_size) + "x" +
                                     std::to_string(grid.pad_size) + " pad");
        }
        cells.push_back(c);
    }
    return cells;
}

}  // namespace

ActionPlan parse_plan(const std::string& raw, const grid::GridWorld& grid) {
    return parse_plan(raw, grid, ParseOptions{}, nullptr);
}

ActionPlan parse_plan(const std::string& raw, const grid::GridWorld& grid,
                      const ParseOptions& options, int* out_of_bounds_discarded) {
    if (out_of_bounds_discarded) *out_of_bounds_discarded = 0;
    const std::string text = extract_json_object(raw);
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw PlanParseError(PlanErrorKind::NoJsonFound,
                             std::string("extracted text is not valid JSON: ") + e.what());
    }
    if (!j.is_object())
        throw PlanParseError(PlanErrorKind::SchemaMismatch, "response JSON is not an object");

    static const std::set<std::string> kKnown{"title", "coordinates", "used_coordinates",
                                              "reasoning", "stacked"};
    for (const auto& [key, value] : j.items())
        if (!kKnown.count(key))
            throw PlanParseError(PlanErrorKind::SchemaMismatch, "unexpected field \"" + key + "\"");
    for (const char* required : {"title", "coordinates", "reasoning"})
        if (!j.contains(required))
            throw PlanParseError(PlanErrorKind::SchemaMismatch,
                                 std::string("missing required field \"") + required + "\"");
    if (!j["title"].is_string() || !j["reasoning"].is_string())
        throw PlanParseError(PlanErrorKind::SchemaMismatch, "title and reasoning must be strings");

    ActionPlan plan;
    plan.title = j["title"].get<std::string>();
    plan.reasoning = j["reasoning"].get<std::string>();
    plan.coordinates = parse_cell_array(j["coordinates"], grid, "coordinates",
                                        options.discard_out_of_bounds, out_of_bounds_discarded);
    if (j.contains("used_coordinates"))
        plan.used_coordinates = parse_cell_array(j["used_coordinates"], grid, "used_coordinates",
                                                 options.discard_out_of_bounds, nullptr);
    if (j.contains("stacked"))
        for (const auto& c : parse_cell_array(j["stacked"], grid, "stacked",
                                              options.discard_out_of_bounds, nullptr))
            plan.stacked.insert(c);

    if (plan.coordinates.empty())
        throw PlanParseError(PlanErrorKind::SchemaMismatch, "\"coordinates\" must be non-empty");
    std::set<grid::Cell> seen;
    for (const auto& c : plan.coordinates)
        if (!seen.insert(c).second)
            throw PlanParseError(PlanErrorKind::DuplicateCoordinate,
                                 "coordinate " + grid::to_string(c) + " listed more than once");
    return plan;
}

std::string Violation::describe() const {
    switch (kind) {
        case ViolationKind::OutOfBounds: return "coordinate " + grid::to_string(cell) + " is outside the pad";
        case ViolationKind::Collision:
            return "coordinate " + grid::to_string(cell) + " is already occupied and not marked stacked";
        case ViolationKind::StackOnFree:
            return "coordinate " + grid::to_string(cell) + " is marked stacked but the cell is free";
        case ViolationKind::StackFull:
            return "coordinate " + grid::to_string(cell) + " already carries a stacked block";
    }
    return "unknown violation";
}

std::vector<Violation> validate_plan(const ActionPlan& plan, const grid::BuildState& state) {
    std::vector<Violation> violations;
    const int n = state.pad_size();
    for (const auto& c : plan.coordinates) {
        if (c.x < 0 || c.x >= n || c.y < 0 || c.y >= n) {
            violations.push_back({ViolationKind::OutOfBounds, c});
            continue;
        }
        const auto status = state.at(c);
        const bool stacked = plan.stacked.count(c) > 0;
        if (stacked) {
            if (status == grid::CellStatus::Free)
                violations.push_back({ViolationKind::StackOnFree, c});
            else if (status == grid::CellStatus::Stacked)
                violations.push_back({ViolationKind::StackFull, c});
        } else if (status != grid::CellStatus::Free) {
            violations.push_back({ViolationKind::Collision, c});
        }
    }
    return violations;
}

}  // namespace dronebuild::plan
