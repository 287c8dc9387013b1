#include "cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "dronebuild/evalharness.hpp"
#include "dronebuild/ledger.hpp"
#include "dronebuild/prng.hpp"

namespace dronebuild::cli {

using json = nlohmann::ordered_json;

namespace {

void emit_error(const std::string& kind, const std::string& message, int exit_code) {
    json j;
    j["error"]["kind"] = kind;
    j["error"]["message"] = message;
    j["error"]["exit_code"] = exit_code;
    std::cerr << j.dump() << std::endl;
}

std::array<double, 3> to_vec3(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

const std::vector<std::string> kStockDesigns = {"smiley", "cross",    "diamond",
                                                "square", "letter l", "two columns"};

}  // namespace

RunConfig load_config_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("config file " + path.string() + " is not valid JSON: " +
                                 e.what());
    }

    RunConfig config;
    config.seed = j.value("seed", config.seed);
    config.output_dir = j.value("output_dir", config.output_dir.string());

    if (j.contains("world")) {
        const auto& w = j["world"];
        config.world.pad_size = w.value("pad_size", config.world.pad_size);
        config.world.cell_size_m = w.value("cell_size_m", config.world.cell_size_m);
        if (w.contains("dims_cells")) {
            const auto& d = w["dims_cells"];
            config.world.dims_cells = grid::GridDims{d.at(0).get<int>(), d.at(1).get<int>(),
                                                     d.at(2).get<int>()};
        }
        if (w.contains("pad_origin_cell")) {
            const auto& p = w["pad_origin_cell"];
            config.world.pad_origin_cell = grid::Cell{p.at(0).get<int>(), p.at(1).get<int>()};
        }
    }
    if (j.contains("pad_map")) {
        const auto& p = j["pad_map"];
        config.pad_map.method = p.value("method", config.pad_map.method);
        if (p.contains("anchor_world")) config.pad_map.anchor_world = to_vec3(p["anchor_world"]);
        config.pad_map.yaw_deg = p.value("yaw_deg", config.pad_map.yaw_deg);
        config.pad_map.spacing_m = p.value("spacing_m", config.pad_map.spacing_m);
        config.pad_map.block_height_m = p.value("block_height_m", config.pad_map.block_height_m);
        config.pad_map.tag_noise_translation_m =
            p.value("tag_noise_translation_m", config.pad_map.tag_noise_translation_m);
        config.pad_map.tag_noise_rotation_deg =
            p.value("tag_noise_rotation_deg", config.pad_map.tag_noise_rotation_deg);
    }
    if (j.contains("backend")) {
        const auto& b = j["backend"];
        config.backend.kind = b.value("kind", config.backend.kind);
        config.backend.live.endpoint = b.value("endpoint", config.backend.live.endpoint);
        config.backend.live.model = b.value("model", config.backend.live.model);
        config.backend.live.key_env = b.value("key_env", config.backend.live.key_env);
        const std::string provider = b.value("provider", std::string("openai"));
        config.backend.live.style = provider == "anthropic" ? plan::ProviderStyle::Anthropic
                                                            : plan::ProviderStyle::OpenAI;
        config.backend.live.timeout_s = b.value("timeout_s", config.backend.live.timeout_s);
        config.backend.live.max_retries = b.value("max_retries", config.backend.live.max_retries);
        config.backend.live.temperature = b.value("temperature", config.backend.live.temperature);
        config.backend.live.max_tokens = b.value("max_tokens", config.backend.live.max_tokens);
        config.backend.live.backoff_base_ms =
            b.value("backoff_base_ms", config.backend.live.backoff_base_ms);
    }
    if (j.contains("error_model")) {
        const auto& e = j["error_model"];
        config.error_model.misplace_prob =
            e.value("misplace_prob", config.error_model.misplace_prob);
        config.error_model.drop_fail_prob =
            e.value("drop_fail_prob", config.error_model.drop_fail_prob);
        if (e.contains("force_misplace_steps"))
            for (const auto& s : e["force_misplace_steps"])
                config.error_model.force_misplace_steps.insert(s.get<int>());
    }
    if (j.contains("run")) {
        const auto& r = j["run"];
        config.run.reprompt_enabled = r.value("reprompt", config.run.reprompt_enabled);
        config.run.max_reprompts = r.value("max_reprompts", config.run.max_reprompts);
        config.run.max_steps = r.value("max_steps", config.run.max_steps);
        config.run.max_parse_reprompts = r.value("parse_reprompts", config.run.max_parse_reprompts);
    }
    if (j.contains("eval")) {
        const auto& e = j["eval"];
        config.eval.trials = e.value("trials", config.eval.trials);
        config.eval.parallelism = e.value("parallelism", config.eval.parallelism);
        config.eval.model_label = e.value("model_label", config.eval.model_label);
    }
    return config;
}

grid::GridWorld make_world(const RunConfig& config) {
    const auto& w = config.world;
    const grid::Cell origin = w.pad_origin_cell.value_or(grid::Cell{0, 0});
    const grid::GridDims dims = w.dims_cells.value_or(
        grid::GridDims{4, origin.x + w.pad_size, origin.y + w.pad_size});
    return grid::new_world(dims, w.cell_size_m, w.pad_size, origin);
}

sync::PadMap make_pad_map(const RunConfig& config) {
    const auto& p = config.pad_map;
    const double yaw = p.yaw_deg * M_PI / 180.0;
    const Eigen::Vector3d anchor =
        p.anchor_world ? Eigen::Vector3d((*p.anchor_world)[0], (*p.anchor_world)[1],
                                         (*p.anchor_world)[2])
                       : Eigen::Vector3d(sync::rot_z(yaw) *
                                         Eigen::Vector3d((config.world.pad_size - 1) * p.spacing_m,
                                                         0.0, 0.0));
    if (p.method == "hardcoded")
        return sync::pad_map_hardcoded(anchor, yaw, p.spacing_m, config.world.pad_size,
                                       p.block_height_m);
    if (p.method != "tags")
        throw std::runtime_error("pad_map.method must be \"hardcoded\" or \"tags\"");

    // Tag route: synthesize what the overview camera would report for a pad
    // whose notch tag sits where the hardcoded route would put the notch.
    const auto truth =
        sync::pad_map_hardcoded(anchor, yaw, p.spacing_m, config.world.pad_size, p.block_height_m);
    sync::TagScene scene;
    scene.pad_in_world.rotation = truth.rotation_rel;
    scene.pad_in_world.translation = truth.notch_world;
    scene.camera_in_world.rotation =
        sync::rot_axis_angle(Eigen::Vector3d::UnitX(), -2.2) *
        sync::rot_axis_angle(Eigen::Vector3d::UnitZ(), 0.3);
    scene.camera_in_world.translation = Eigen::Vector3d(0.8, -1.4, 1.9);

    sync::TagNoise noise;
    noise.sigma_translation_m = p.tag_noise_translation_m;
    noise.sigma_rotation_rad = p.tag_noise_rotation_deg * M_PI / 180.0;
    rng::Stream stream(rng::mix64(config.seed, 0x7a65f00dULL));
    const auto obs = sync::observe_tags(scene, noise, stream);
    return sync::pad_map_from_tags(obs.origin_tag, obs.pad_tag, Eigen::Vector3d::Zero(),
                                   p.spacing_m, config.world.pad_size, p.block_height_m);
}

namespace {

std::unique_ptr<plan::PlannerBackend> build_backend(const RunConfig& config) {
    auto backend = plan::make_backend(config.backend);
    if (config.backend.kind == "live") {
        const char* key = std::getenv(config.backend.live.key_env.c_str());
        if (!key || !*key)
            throw plan::BackendError(plan::BackendErrorKind::KeyMissing,
                                     "environment variable " + config.backend.live.key_env +
                                         " is not set");
    }
    return backend;
}

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const plan::BackendError& e) {
        emit_error(plan::to_string(e.kind()), e.what(), kExitBackendError);
        return kExitBackendError;
    } catch (const sim::BuildAborted& e) {
        emit_error("BuildAborted", e.what(), kExitBackendError);
        return kExitBackendError;
    } catch (const std::exception& e) {
        emit_error("ConfigError", e.what(), kExitConfigError);
        return kExitConfigError;
    }
}

}  // namespace

int cmd_build(const RunConfig& config) {
    return guarded([&] {
        if (config.request.empty()) throw std::runtime_error("--request must not be empty");
        const auto world = make_world(config);
        const auto pad_map = make_pad_map(config);
        auto backend = build_backend(config);

        sim::ErrorModel err = config.error_model;
        err.seed = config.seed;
        sim::RunConfig run_cfg = config.run;
        if (config.dump_frames) run_cfg.frame_dump_dir = config.output_dir / "frames";

        std::filesystem::create_directories(config.output_dir);
        RunLedger ledger(config.output_dir / "ledger.jsonl");

        sim::BuildReport report;
        try {
            report = sim::run_build(config.request, *backend, world, pad_map, err, run_cfg,
                                    sim::CameraParams{}, &ledger);
        } catch (const sim::BuildAborted& e) {
            std::ofstream(config.output_dir / "report.json")
                << e.partial_report.to_json() << "\n";
            throw;
        }

        std::ofstream(config.output_dir / "report.json") << report.to_json() << "\n";
        std::cout << "design: " << report.design_request << "\n"
                  << "steps: " << report.steps.size() << "  prompts: " << report.prompts_used
                  << "  reprompts: " << report.reprompts_used << "\n"
                  << "final IoU: " << report.final_iou << "\n"
                  << render_scene_text(report.final_state) << "\n";
        return report.final_iou == 1.0 ? kExitOk : kExitBuildIncomplete;
    });
}

int cmd_eval(const RunConfig& config) {
    return guarded([&] {
        const auto prompts = config.suite_path.empty()
                                 ? eval::builtin_constrained_corpus()
                                 : eval::load_corpus(config.suite_path);
        auto backend = build_backend(config);
        if (auto* mock = dynamic_cast<plan::MockBackend*>(backend.get()))
            eval::register_corpus_answers(*mock, prompts);

        std::filesystem::create_directories(config.output_dir);
        RunLedger ledger(config.output_dir / "ledger.jsonl");

        eval::SuiteOptions options;
        options.trials_per_prompt = config.eval.trials;
        options.parallelism = config.eval.parallelism;
        options.model_label = config.eval.model_label;
        const auto results = eval::run_constrained_suite(prompts, *backend, options, &ledger);
        eval::emit_report(results, config.output_dir);

        double mean = 0.0;
        for (const auto& r : results) mean += r.mean_iou;
        if (!results.empty()) mean /= results.size();
        std::cout << "prompts: " << results.size() << "  trials each: " << config.eval.trials
                  << "\noverall mean IoU: " << mean << "\nreports in " << config.output_dir
                  << "\n";
        return kExitOk;
    });
}

int cmd_matrix(const RunConfig& config) {
    return guarded([&] {
        const auto world = make_world(config);
        const auto pad_map = make_pad_map(config);
        auto backend = build_backend(config);

        const std::vector<std::string>& designs =
            config.designs.empty() ? kStockDesigns : config.designs;
        std::vector<std::uint64_t> seeds;
        for (int i = 0; i < config.seed_count; ++i)
            seeds.push_back(rng::mix64(config.seed, static_cast<std::uint64_t>(i)));

        std::filesystem::create_directories(config.output_dir);
        RunLedger ledger(config.output_dir / "ledger.jsonl");

        const auto rows = eval::run_reprompt_matrix(designs, *backend, world, pad_map,
                                                    config.error_model, seeds, config.run,
                                                    sim::CameraParams{}, &ledger);
        eval::emit_matrix_report(rows, config.output_dir);

        int on = 0, off = 0;
        for (const auto& row : rows) {
            if (row.iou_reprompt == 1.0) ++on;
            if (row.iou_no_reprompt == 1.0) ++off;
        }
        std::cout << "paired runs: " << rows.size() << "\nIoU 1.0 with reprompt: " << on
                  << "  without: " << off << "\nreports in " << config.output_dir << "\n";
        return kExitOk;
    });
}

int run(int argc, const char* const* argv) {
    CLI::App app{"LLM-planned drone block assembly simulator and evaluation harness"};
    app.require_subcommand(1);

    std::string config_path;
    RunConfig config;
    bool have_config = false;

    // Deferred overrides: flags beat config-file values.
    std::optional<std::uint64_t> seed_flag;
    std::optional<std::string> out_flag, backend_flag, reprompt_flag, request_flag, suite_flag,
        designs_flag, model_flag;
    std::optional<double> misplace_flag, dropfail_flag;
    std::optional<int> trials_flag, parallelism_flag, seeds_flag, pad_size_flag;
    bool dump_frames = false;

    app.add_option("--config", config_path, "JSON config file; flags override its values");
    app.add_option("--seed", seed_flag, "master seed for every random draw");
    app.add_option("--out", out_flag, "output directory");
    app.add_option("--backend", backend_flag, "planner backend: mock or live");
    app.add_option("--pad-size", pad_size_flag, "build pad side length in cells");

    auto* build = app.add_subcommand("build", "run one closed-loop build");
    build->add_option("--request", request_flag, "design request text")->required();
    build->add_option("--reprompt", reprompt_flag, "reprompt on placement errors: on or off");
    build->add_option("--misplace-prob", misplace_flag, "probability a placement lands offset");
    build->add_option("--drop-fail-prob", dropfail_flag, "probability a release fails");
    build->add_flag("--dump-frames", dump_frames, "write per-step PPM frames");

    auto* eval_cmd = app.add_subcommand("eval", "run the constrained-prompt IoU suite");
    eval_cmd->add_option("--suite", suite_flag, "corpus file; omit for the builtin 15 prompts");
    eval_cmd->add_option("--trials", trials_flag, "trials per prompt");
    eval_cmd->add_option("--parallelism", parallelism_flag, "concurrent trials");
    eval_cmd->add_option("--model-label", model_flag, "label recorded in the reports");

    auto* matrix = app.add_subcommand("matrix", "paired reprompt vs no-reprompt comparison");
    matrix->add_option("--designs", designs_flag,
                       "comma-separated design names; omit for the stock six");
    matrix->add_option("--seeds", seeds_flag, "number of seeded runs per design");
    matrix->add_option("--misplace-prob", misplace_flag, "probability a placement lands offset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfigError;
    }

    try {
        if (!config_path.empty()) {
            config = load_config_file(config_path);
            have_config = true;
        }
    } catch (const std::exception& e) {
        emit_error("ConfigError", e.what(), kExitConfigError);
        return kExitConfigError;
    }
    (void)have_config;

    if (seed_flag) config.seed = *seed_flag;
    if (out_flag) config.output_dir = *out_flag;
    if (backend_flag) config.backend.kind = *backend_flag;
    if (pad_size_flag) config.world.pad_size = *pad_size_flag;
    if (request_flag) config.request = *request_flag;
    if (reprompt_flag) {
        if (*reprompt_flag != "on" && *reprompt_flag != "off") {
            emit_error("ConfigError", "--reprompt expects on or off", kExitConfigError);
            return kExitConfigError;
        }
        config.run.reprompt_enabled = *reprompt_flag == "on";
    }
    if (misplace_flag) config.error_model.misplace_prob = *misplace_flag;
    if (dropfail_flag) config.error_model.drop_fail_prob = *dropfail_flag;
    if (dump_frames) config.dump_frames = true;
    if (suite_flag) config.suite_path = *suite_flag;
    if (trials_flag) config.eval.trials = *trials_flag;
    if (parallelism_flag) config.eval.parallelism = *parallelism_flag;
    if (model_flag) config.eval.model_label = *model_flag;
    if (seeds_flag) config.seed_count = *seeds_flag;
    if (designs_flag) {
        config.designs.clear();
        std::string token;
        std::istringstream is(*designs_flag);
        while (std::getline(is, token, ','))
            if (!token.empty()) config.designs.push_back(token);
    }

    if (build->parsed()) return cmd_build(config);
    if (eval_cmd->parsed()) return cmd_eval(config);
    return cmd_matrix(config);
}

}  // namespace dronebuild::cli
