#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dronebuild/backend.hpp"
#include "dronebuild/dronesim.hpp"
#include "dronebuild/gridworld.hpp"
#include "dronebuild/ledger.hpp"

namespace dronebuild::eval {

// Square boolean occupancy grid used for scoring.
struct BoolGrid {
    int size = 0;
    std::vector<std::uint8_t> cells;  // row-major, y * size + x

    static BoolGrid empty(int size);
    bool at(int x, int y) const { return cells[static_cast<size_t>(y) * size + x] != 0; }
    void set(int x, int y, bool v) { cells[static_cast<size_t>(y) * size + x] = v ? 1 : 0; }
    bool operator==(const BoolGrid&) const = default;
};

BoolGrid to_bool_grid(const std::set<grid::Cell>& cells, int size);

// |A intersection B| / |A union B|; 1.0 when both grids are empty. Throws on
// dimension mismatch.
double iou(const BoolGrid& answer, const BoolGrid& response);

// A design request admitting exactly one correct grid answer.
struct ConstrainedPrompt {
    std::string id;
    std::string request;
    BoolGrid answer;
};

// The stock suite: 15 uniquely-answerable prompts on a 10x10 pad.
std::vector<ConstrainedPrompt> builtin_constrained_corpus();

// Corpus file: one document per prompt, separated by "---" lines:
//   id: <identifier>
//   request: <request text>
//   grid:
//   <o/x rows, same grammar as the scene text>
std::vector<ConstrainedPrompt> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::vector<ConstrainedPrompt>& prompts,
                 const std::filesystem::path& path);

// Registers every prompt's answer as a mock design keyed by its request text,
// so the stock suite runs offline end to end.
void register_corpus_answers(plan::MockBackend& backend,
                             const std::vector<ConstrainedPrompt>& prompts);

struct TrialResult {
    int trial = 0;
    double iou_score = 0.0;
    double latency_ms = 0.0;
    long cost_tokens = -1;
    bool parse_ok = false;
    int out_of_bounds_discarded = 0;
    std::string error;  // parse/backend failure, empty on success
};

struct EvalResult {
    std::string prompt_id;
    std::vector<TrialResult> trials;
    double mean_iou = 0.0;
    double variance = 0.0;  // population variance over the trials
    std::string model;
};

struct SuiteOptions {
    int trials_per_prompt = 5;
    int parallelism = 4;
    std::string model_label;
};

// Issues trials_per_prompt independent requests per prompt against an empty
// pad and scores each response against the answer grid. Unparseable responses
// score 0 and stay in the record; backend failures never abort the suite.
std::vector<EvalResult> run_constrained_suite(const std::vector<ConstrainedPrompt>& prompts,
                                              const plan::PlannerBackend& backend,
                                              const SuiteOptions& options,
                                              RunLedger* ledger = nullptr);

struct MatrixRow {
    std::string design;
    std::uint64_t seed = 0;
    double iou_reprompt = 0.0;
    double iou_no_reprompt = 0.0;
    int prompts_reprompt = 0;
    int prompts_no_reprompt = 0;
    int shared_misplacements = 0;

    bool operator==(const MatrixRow&) const = default;
};

// For every (design, seed) runs one build with reprompting and one without
// under the same error stream, and reports the paired final IoU values.
// Verifies that both arms saw identical error realizations at every shared
// step index.
std::vector<MatrixRow> run_reprompt_matrix(const std::vector<std::string>& designs,
                                           const plan::PlannerBackend& backend,
                                           const grid::GridWorld& world,
                                           const sync::PadMap& pad_map,
                                           const sim::ErrorModel& error_model,
                                           const std::vector<std::uint64_t>& seeds,
                                           const sim::RunConfig& base_cfg,
                                           const sim::CameraParams& camera = sim::CameraParams{},
                                           RunLedger* ledger = nullptr);

// Append-only record of human grades (1 best .. 3 worst). One grade per
// (design, grader) pair.
class QualitativeStore {
public:
    QualitativeStore() = default;
    explicit QualitativeStore(const std::filesystem::path& file);

    void record(const std::string& design_id, int grade, const std::string& grader_id);
    std::map<int, int> counts() const;  // always carries keys 1, 2, 3
    size_t size() const { return records_.size(); }

private:
    struct Entry {
        std::string design_id;
        int grade;
        std::string grader_id;
    };
    std::vector<Entry> records_;
    std::filesystem::path file_;
};

// Writes eval_trials.csv (one row per trial), eval_summary.json and
// eval_iou.svg into out_dir; byte-deterministic for identical inputs.
void emit_report(const std::vector<EvalResult>& results, const std::filesystem::path& out_dir);

// Same for the reprompt matrix: matrix_pairs.csv, matrix_summary.json,
// matrix_iou.svg.
void emit_matrix_report(const std::vector<MatrixRow>& rows, const std::filesystem::path& out_dir);

}  // namespace dronebuild::eval
