#pragma once

#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "dronebuild/gridworld.hpp"

namespace dronebuild::plan {

// The five prompt sections. Task, rules and output schema are fixed templates;
// the current scene is regenerated for every call.
struct PromptParts {
    std::string task;
    std::string design_request;
    std::string current_scene;
    std::string rules;
    std::string output_schema;

    // Full prompt text as sent to a backend.
    std::string assemble() const;
    bool operator==(const PromptParts&) const = default;
};

// Parsed planner output.
struct ActionPlan {
    std::string title;
    std::vector<grid::Cell> coordinates;       // execution order
    std::set<grid::Cell> stacked;              // coordinates to place on layer 1
    std::vector<grid::Cell> used_coordinates;  // occupied at plan time
    std::string reasoning;

    bool operator==(const ActionPlan&) const = default;
};

// Canonical JSON for an ActionPlan; parse_plan round-trips it exactly.
std::string serialize_plan(const ActionPlan& plan);

enum class PlanErrorKind {
    NoJsonFound,
    SchemaMismatch,
    NonIntegerCoordinate,
    OutOfBounds,
    DuplicateCoordinate,
};

const char* to_string(PlanErrorKind kind);

class PlanParseError : public std::runtime_error {
public:
    PlanParseError(PlanErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}
    PlanErrorKind kind() const { return kind_; }

private:
    PlanErrorKind kind_;
};

struct ParseOptions {
    // Drop out-of-bounds coordinates instead of failing; the count of dropped
    // cells is reported through the out parameter of parse_plan.
    bool discard_out_of_bounds = false;
};

// Extracts the first JSON object from the raw response (code fences and
// surrounding prose are tolerated) and maps it onto an ActionPlan. Throws
// PlanParseError with a distinct kind per failure mode.
ActionPlan parse_plan(const std::string& raw, const grid::GridWorld& grid);
ActionPlan parse_plan(const std::string& raw, const grid::GridWorld& grid,
                      const ParseOptions& options, int* out_of_bounds_discarded = nullptr);

enum class ViolationKind { OutOfBounds, Collision, StackOnFree, StackFull };

struct Violation {
    ViolationKind kind;
    grid::Cell cell;
    std::string describe() const;
    auto operator<=>(const Violation&) const = default;
};

// Checks a parsed plan against the current occupancy; returns every violation.
std::vector<Violation> validate_plan(const ActionPlan& plan, const grid::BuildState& state);

// Initial prompt: byte-identical output for identical inputs.
PromptParts build_prompt(const std::string& design_request, const grid::BuildState& state,
                         const grid::GridWorld& grid);

// Reprompt after an execution mismatch: same structure, scene regenerated from
// the observed state, rules extended with the continue-from-scene instruction
// and the failed-step report.
PromptParts build_reprompt(const std::string& design_request, const grid::BuildState& state,
                           const grid::GridWorld& grid, const std::string& failed_step);

// Marker sentence present in reprompt rules; lets a scripted backend tell the
// two prompt kinds apart.
extern const std::string kRepromptRulesMarker;

}  // namespace dronebuild::plan
