#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dronebuild/backend.hpp"
#include "dronebuild/dronesim.hpp"
#include "dronebuild/framesync.hpp"
#include "dronebuild/gridworld.hpp"

namespace dronebuild::cli {

// Exit codes shared by every subcommand.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfigError = 2;
inline constexpr int kExitBackendError = 3;
inline constexpr int kExitBuildIncomplete = 4;

struct WorldConfig {
    int pad_size = 5;
    double cell_size_m = 0.01;
    std::optional<grid::GridDims> dims_cells;      // auto-sized when unset
    std::optional<grid::Cell> pad_origin_cell;     // (0, 0) when unset
};

struct PadMapConfig {
    std::string method = "hardcoded";  // "hardcoded" | "tags"
    std::optional<std::array<double, 3>> anchor_world;  // default puts the notch at the origin
    double yaw_deg = 0.0;
    double spacing_m = 0.04;
    double block_height_m = 0.02;
    double tag_noise_translation_m = 0.0;
    double tag_noise_rotation_deg = 0.0;
};

struct EvalConfig {
    int trials = 5;
    int parallelism = 4;
    std::string model_label;
};

// Everything a command needs; config-file keys and flags map one to one and
// flags win.
struct RunConfig {
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "out";
    WorldConfig world;
    PadMapConfig pad_map;
    plan::BackendConfig backend;
    sim::ErrorModel error_model;
    sim::RunConfig run;
    EvalConfig eval;

    // build
    std::string request;
    bool dump_frames = false;

    // eval
    std::filesystem::path suite_path;  // builtin corpus when empty

    // matrix
    std::vector<std::string> designs;  // stock six when empty
    int seed_count = 10;
};

RunConfig load_config_file(const std::filesystem::path& path);

grid::GridWorld make_world(const RunConfig& config);
sync::PadMap make_pad_map(const RunConfig& config);

int cmd_build(const RunConfig& config);
int cmd_eval(const RunConfig& config);
int cmd_matrix(const RunConfig& config);

// Argument parsing + dispatch; returns a process exit code.
int run(int argc, const char* const* argv);

}  // namespace dronebuild::cli
