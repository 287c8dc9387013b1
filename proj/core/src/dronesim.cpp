#include "dronebuild/dronesim.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <nlohmann/json.hpp>
#include <sstream>

#include "dronebuild/evalharness.hpp"
#include "dronebuild/prng.hpp"

namespace dronebuild::sim {

using grid::Cell;
using json = nlohmann::ordered_json;

namespace {

json cell_json(const Cell& c) { return json::array({c.x, c.y}); }

std::vector<vision::FeatureTrack> synthesize_pickup_tracks(const CameraParams& camera,
                                                           rng::Stream& stream, int frame_gap) {
    // Feature points on the top edge of the carried block, all drifting upward
    // at ~3 px per frame with a little seeded jitter.
    std::vector<vision::FeatureTrack> tracks;
    const int n_points = 8;
    const double base_x = camera.margin_x_px / 2.0;
    const double base_y = camera.margin_top_px + 10.0;
    for (int i = 0; i < n_points; ++i) {
        vision::FeatureTrack track;
        track.point_id = i;
        const double x0 = base_x + i * 2.0;
        const double y0 = base_y + stream.uniform01();
        for (int t = 0; t <= frame_gap; ++t) {
            const double jitter = 0.2 * stream.uniform01();
            track.positions.push_back({t, x0 + jitter, y0 - 3.0 * t});
        }
        tracks.push_back(std::move(track));
    }
    return tracks;
}

}  // namespace

PlacementOutcome execute_placement(const grid::BuildState& truth, Cell planned_cell,
                                   const PlacementContext& ctx, int step_index) {
    const ErrorModel& err = ctx.error_model;
    rng::Stream stream(rng::mix64(err.seed, 0x9d7e5c3b, static_cast<std::uint64_t>(step_index)));

    PlacementOutcome out{.new_truth = truth};
    out.event.step = step_index;
    out.frame_before = render_world(ctx.world, truth, ctx.camera);
    out.tracks =
        synthesize_pickup_tracks(ctx.camera, stream, make_detector_config(ctx.camera).frame_gap);

    bool released = false;
    for (int attempt = 0; attempt <= ctx.drop_retries; ++attempt) {
        if (!stream.bernoulli(err.drop_fail_prob)) {
            released = true;
            break;
        }
    }
    if (!released) {
        out.drop_failed = true;
        out.event.drop_failed = true;
        out.frame_after = out.frame_before;
        return out;
    }

    Cell landing = planned_cell;
    const bool misplace =
        err.force_misplace_steps.count(step_index) > 0 || stream.bernoulli(err.misplace_prob);
    if (misplace) {
        // Offsets must keep the block on the pad; sampling the in-bounds
        // subset is the rejection loop collapsed into one draw.
        std::vector<Cell> valid;
        for (const auto& offset : err.offset_dist)
            if (ctx.world.in_pad(Cell{planned_cell.x + offset.x, planned_cell.y + offset.y}))
                valid.push_back(offset);
        if (!valid.empty()) {
            const Cell offset = valid[stream.uniform_index(valid.size())];
            landing = Cell{planned_cell.x + offset.x, planned_cell.y + offset.y};
            out.event.misplaced = true;
            out.event.offset = offset;
        }
    }

    out.actual_cell = landing;
    switch (truth.at(landing)) {
        case grid::CellStatus::Free:
            out.actual_layer = 0;
            out.new_truth = apply_placement(truth, landing, false);
            break;
        case grid::CellStatus::Occupied:
            out.actual_layer = 1;
            out.new_truth = apply_placement(truth, landing, true);
            break;
        case grid::CellStatus::Stacked:
            // No room on top of a full stack; the block tumbles out of play.
            out.lost = true;
            break;
    }
    out.frame_after = render_world(ctx.world, out.new_truth, ctx.camera);
    return out;
}

namespace {

struct PlanTarget {
    Cell cell;
    bool stacked = false;
};

std::vector<PlanTarget> plan_targets(const plan::ActionPlan& p) {
    std::vector<PlanTarget> targets;
    targets.reserve(p.coordinates.size());
    for (const auto& c : p.coordinates) targets.push_back({c, p.stacked.count(c) > 0});
    return targets;
}

std::string violations_text(const std::vector<plan::Violation>& violations) {
    std::ostringstream os;
    for (size_t i = 0; i < violations.size(); ++i) {
        if (i) os << "; ";
        os << violations[i].describe();
    }
    return os.str();
}

}  // namespace

BuildReport run_build(const std::string& design_request, const plan::PlannerBackend& backend,
                      const grid::GridWorld& world, const sync::PadMap& pad_map,
                      const ErrorModel& error_model, const RunConfig& cfg,
                      const CameraParams& camera, RunLedger* ledger) {
    const auto start = std::chrono::steady_clock::now();
    const int pad = world.pad_size;

    BuildReport report;
    report.design_request = design_request;
    report.seed = error_model.seed;
    report.reprompt_enabled = cfg.reprompt_enabled;
    report.final_state = grid::BuildState(pad);

    grid::BuildState truth(pad);
    grid::BuildState observed(pad);
    vision::BlockDetector detector;
    const auto det_cfg = make_detector_config(camera);
    const auto pad_region = camera.pad_region(pad);
    const auto corners = camera.pad_corners(pad);

    std::vector<vision::PixelPoint> recorded_positions;
    std::vector<Cell> recorded_cells;

    plan::ActionPlan current_plan;

    // Requests a plan, retrying with a corrective reprompt (quoting the exact
    // violation) when the response fails to parse or validate.
    auto acquire_plan = [&](plan::PromptParts prompt) {
        std::string correction;
        for (int attempt = 0; attempt <= cfg.max_parse_reprompts; ++attempt) {
            plan::PromptParts attempt_prompt = prompt;
            if (!correction.empty())
                attempt_prompt.rules +=
                    "\nYour previous response was invalid: " + correction +
                    ". Respond again following the schema exactly.";
            std::string raw;
            try {
                raw = backend.complete(attempt_prompt.assemble()).text;
            } catch (const plan::BackendError& e) {
                if (ledger) ledger->log_exchange(attempt_prompt.assemble(), "", e.what());
                throw BuildAborted(e.what(), report);
            }
            ++report.prompts_used;
            try {
                plan::ActionPlan parsed = plan::parse_plan(raw, world);
                const auto violations = plan::validate_plan(parsed, observed);
                if (!violations.empty()) {
                    correction = violations_text(violations);
                    if (ledger)
                        ledger->log_exchange(attempt_prompt.assemble(), raw,
                                             "invalid: " + correction);
                    continue;
                }
                if (ledger) ledger->log_exchange(attempt_prompt.assemble(), raw, "ok");
                return parsed;
            } catch (const plan::PlanParseError& e) {
                correction = e.what();
                if (ledger)
                    ledger->log_exchange(attempt_prompt.assemble(), raw,
                                         std::string(plan::to_string(e.kind())) + ": " + e.what());
            }
        }
        throw BuildAborted("planner kept returning invalid plans: " + correction, report);
    };

    current_plan = acquire_plan(plan::build_prompt(design_request, observed, world));
    std::vector<PlanTarget> queue = plan_targets(current_plan);
    size_t queue_pos = 0;

    int step = 0;
    while (queue_pos < queue.size() && step < cfg.max_steps) {
        const PlanTarget target = queue[queue_pos];
        ++queue_pos;

        StepRecord record;
        record.step = step;
        record.planned = target.cell;
        record.planned_layer = target.stacked ? 1 : 0;
        const auto wp = interpolate_pad_point(pad_map, target.cell, target.stacked ? 1 : 0);
        record.waypoint = {wp.x(), wp.y(), wp.z()};

        PlacementContext ctx{world, camera, error_model, cfg.drop_retries};
        const PlacementOutcome outcome = execute_placement(truth, target.cell, ctx, step);
        truth = outcome.new_truth;
        report.error_events.push_back(outcome.event);

        // Pickup verification; synthesized tracks show clear upward motion, so
        // retries only matter for externally supplied track providers.
        bool picked_up = false;
        for (int attempt = 0; attempt <= cfg.pickup_retries && !picked_up; ++attempt)
            picked_up = vision::pickup_detect(outcome.tracks, 0, det_cfg).picked_up;

        if (!cfg.frame_dump_dir.empty()) {
            std::filesystem::create_directories(cfg.frame_dump_dir);
            char name[64];
            std::snprintf(name, sizeof(name), "step_%03d_before.ppm", step);
            vision::write_ppm(outcome.frame_before, cfg.frame_dump_dir / name);
            std::snprintf(name, sizeof(name), "step_%03d_after.ppm", step);
            vision::write_ppm(outcome.frame_after, cfg.frame_dump_dir / name);
        }

        const int count_before =
            static_cast<int>(detector.detect(outcome.frame_before, pad_region).size());
        const int count_after =
            static_cast<int>(detector.detect(outcome.frame_after, pad_region).size());
        const auto diff =
            vision::frame_diff(vision::to_gray(outcome.frame_before), vision::to_gray(outcome.frame_after));
        const auto region = vision::change_region(diff, det_cfg);
        const bool dropped = picked_up && vision::dropoff_verify(count_before, count_after,
                                                                 region, pad_region);

        if (!dropped || !region) {
            record.classification = outcome.drop_failed ? "drop_failed" : "lost";
            record.verified = false;
        } else {
            const auto cls =
                vision::classify_stack(region->centroid, recorded_positions, region->area, det_cfg);
            Cell observed_cell;
            int observed_layer = 0;
            if (cls == vision::PlacementClass::Stacked && !recorded_cells.empty()) {
                size_t nearest = 0;
                double best = std::numeric_limits<double>::infinity();
                for (size_t i = 0; i < recorded_positions.size(); ++i) {
                    const double d = std::hypot(region->centroid.x - recorded_positions[i].x,
                                                region->centroid.y - recorded_positions[i].y);
                    if (d < best) {
                        best = d;
                        nearest = i;
                    }
                }
                observed_cell = recorded_cells[nearest];
                observed_layer = 1;
                record.classification = "stacked";
            } else {
                observed_cell = vision::centroid_to_grid(region->centroid, corners, pad);
                observed_layer = 0;
                record.classification =
                    cls == vision::PlacementClass::PlacedBehind ? "behind" : "new";
            }
            recorded_positions.push_back(region->centroid);
            recorded_cells.push_back(observed_cell);

            record.executed = outcome.actual_cell;
            record.executed_layer = outcome.actual_layer;
            record.observed = observed_cell;
            record.observed_layer = observed_layer;
            record.verified =
                observed_cell == target.cell && observed_layer == record.planned_layer;

            const auto status = observed.at(observed_cell);
            if (observed_layer == 1 && status == grid::CellStatus::Occupied)
                observed = apply_placement(observed, observed_cell, true);
            else if (observed_layer == 0 && status == grid::CellStatus::Free)
                observed = apply_placement(observed, observed_cell, false);
            // Anything else is a vision contradiction; the scene keeps the
            // previous belief and the mismatch shows up as unverified.
        }

        if (!record.verified && cfg.reprompt_enabled &&
            report.reprompts_used < cfg.max_reprompts) {
            ++report.reprompts_used;
            record.reprompt_issued = true;
            std::ostringstream desc;
            desc << "step " << step << " planned " << grid::to_string(target.cell);
            if (outcome.drop_failed)
                desc << " but the block was never released";
            else if (outcome.lost)
                desc << " but the block was lost";
            else if (record.observed)
                desc << " but the block was observed at " << grid::to_string(*record.observed)
                     << (record.observed_layer == 1 ? " stacked" : "");
            report.steps.push_back(record);
            current_plan =
                acquire_plan(plan::build_reprompt(design_request, observed, world, desc.str()));
            queue = plan_targets(current_plan);
            queue_pos = 0;
            ++step;
            continue;
        }

        report.steps.push_back(record);
        ++step;
    }

    report.target = cfg.target_grid.value_or([&] {
        std::set<Cell> implied(current_plan.used_coordinates.begin(),
                               current_plan.used_coordinates.end());
        implied.insert(current_plan.coordinates.begin(), current_plan.coordinates.end());
        return implied;
    }());
    report.final_state = observed;
    report.final_iou = eval::iou(eval::to_bool_grid(occupied_cells(observed), pad),
                                 eval::to_bool_grid(report.target, pad));
    report.duration_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    if (ledger) ledger->log_event("pad_map", pad_map.to_json());
    return report;
}

std::string BuildReport::to_json(bool include_duration) const {
    nlohmann::ordered_json j;
    j["design_request"] = design_request;
    j["seed"] = seed;
    j["reprompt_enabled"] = reprompt_enabled;
    j["prompts_used"] = prompts_used;
    j["reprompts_used"] = reprompts_used;
    json steps_json = json::array();
    for (const auto& s : steps) {
        nlohmann::ordered_json sj;
        sj["step"] = s.step;
        sj["planned"] = cell_json(s.planned);
        sj["planned_layer"] = s.planned_layer;
        sj["waypoint"] = {s.waypoint[0], s.waypoint[1], s.waypoint[2]};
        sj["executed"] = s.executed ? cell_json(*s.executed) : json(nullptr);
        sj["executed_layer"] = s.executed_layer;
        sj["observed"] = s.observed ? cell_json(*s.observed) : json(nullptr);
        sj["observed_layer"] = s.observed_layer;
        sj["classification"] = s.classification;
        sj["verified"] = s.verified;
        sj["reprompt_issued"] = s.reprompt_issued;
        steps_json.push_back(sj);
    }
    j["steps"] = steps_json;
    json events = json::array();
    for (const auto& e : error_events) {
        nlohmann::ordered_json ej;
        ej["step"] = e.step;
        ej["misplaced"] = e.misplaced;
        ej["offset"] = e.offset ? cell_json(*e.offset) : json(nullptr);
        ej["drop_failed"] = e.drop_failed;
        events.push_back(ej);
    }
    j["error_events"] = events;
    json target_json = json::array();
    for (const auto& c : target) target_json.push_back(cell_json(c));
    j["target"] = target_json;
    json occupied_json = json::array();
    for (const auto& c : occupied_cells(final_state)) occupied_json.push_back(cell_json(c));
    j["final_occupied"] = occupied_json;
    j["final_scene"] = render_scene_text(final_state);
    j["final_iou"] = final_iou;
    if (include_duration) j["duration_ms"] = duration_ms;
    return j.dump(2);
}

}  // namespace dronebuild::sim
