#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dronebuild/backend.hpp"
#include "dronebuild/framesync.hpp"
#include "dronebuild/gridworld.hpp"
#include "dronebuild/ledger.hpp"
#include "dronebuild/render.hpp"
#include "dronebuild/vision.hpp"

namespace dronebuild::sim {

// Injectable placement-error model. Draws for step k come from a substream
// derived from (seed, k), so two runs sharing a seed see identical
// realizations at identical step indices regardless of what they plan.
struct ErrorModel {
    double misplace_prob = 0.0;
    std::vector<grid::Cell> offset_dist = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
    double drop_fail_prob = 0.0;
    std::uint64_t seed = 0;
    std::set<int> force_misplace_steps;  // deterministically misplace these steps

    bool operator==(const ErrorModel&) const = default;
};

struct ErrorEvent {
    int step = 0;
    bool misplaced = false;
    std::optional<grid::Cell> offset;  // applied offset when misplaced
    bool drop_failed = false;

    bool operator==(const ErrorEvent&) const = default;
};

struct PlacementContext {
    const grid::GridWorld& world;
    const CameraParams& camera;
    const ErrorModel& error_model;
    int drop_retries = 2;
};

struct PlacementOutcome {
    bool drop_failed = false;  // never released within the retry budget
    bool lost = false;         // released onto a full stack; state unchanged
    grid::Cell actual_cell;
    int actual_layer = 0;
    grid::BuildState new_truth;
    vision::RgbFrame frame_before;
    vision::RgbFrame frame_after;
    std::vector<vision::FeatureTrack> tracks;
    ErrorEvent event;
};

// One pick-transport-release cycle against the ground-truth state. Renders the
// observation frames and synthesizes the pickup feature tracks.
PlacementOutcome execute_placement(const grid::BuildState& truth, grid::Cell planned_cell,
                                   const PlacementContext& ctx, int step_index);

struct StepRecord {
    int step = 0;
    grid::Cell planned;
    int planned_layer = 0;
    std::array<double, 3> waypoint{0, 0, 0};
    std::optional<grid::Cell> executed;
    int executed_layer = 0;
    std::optional<grid::Cell> observed;
    int observed_layer = 0;
    std::string classification;  // "new" | "stacked" | "behind" | "drop_failed" | "lost"
    bool verified = false;
    bool reprompt_issued = false;

    bool operator==(const StepRecord&) const = default;
};

struct BuildReport {
    std::string design_request;
    std::uint64_t seed = 0;
    bool reprompt_enabled = true;
    std::vector<StepRecord> steps;
    int prompts_used = 0;
    int reprompts_used = 0;
    grid::BuildState final_state;  // as observed by the vision pipeline
    std::set<grid::Cell> target;   // pursued design cells
    double final_iou = -1.0;
    std::vector<ErrorEvent> error_events;
    double duration_ms = 0.0;

    // duration_ms is the only wall-clock field; leaving it out gives the
    // byte-stable form used by determinism checks.
    std::string to_json(bool include_duration = true) const;
};

struct RunConfig {
    bool reprompt_enabled = true;
    int max_reprompts = 5;
    int max_steps = 60;
    int max_parse_reprompts = 2;
    int drop_retries = 2;
    int pickup_retries = 2;
    std::optional<std::set<grid::Cell>> target_grid;  // overrides the plan-implied target
    std::filesystem::path frame_dump_dir;             // per-step PPMs when set
};

// Raised when the backend fails mid-run; carries whatever was built so far.
class BuildAborted : public std::runtime_error {
public:
    BuildAborted(const std::string& message, BuildReport partial)
        : std::runtime_error(message), partial_report(std::move(partial)) {}
    BuildReport partial_report;
};

// The closed loop: request a plan, convert coordinates to waypoints, execute
// placements, verify each one through the vision pipeline, and reprompt from
// the observed scene when a placement lands wrong (when enabled).
BuildReport run_build(const std::string& design_request, const plan::PlannerBackend& backend,
                      const grid::GridWorld& world, const sync::PadMap& pad_map,
                      const ErrorModel& error_model, const RunConfig& cfg,
                      const CameraParams& camera = CameraParams{}, RunLedger* ledger = nullptr);

}  // namespace dronebuild::sim
