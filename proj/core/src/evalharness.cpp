#include "dronebuild/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace dronebuild::eval {

using grid::Cell;
using json = nlohmann::ordered_json;

BoolGrid BoolGrid::empty(int size) {
    BoolGrid g;
    g.size = size;
    g.cells.assign(static_cast<size_t>(size) * size, 0);
    return g;
}

BoolGrid to_bool_grid(const std::set<Cell>& cells, int size) {
    BoolGrid g = BoolGrid::empty(size);
    for (const auto& c : cells) {
        if (c.x < 0 || c.x >= size || c.y < 0 || c.y >= size)
            throw std::invalid_argument("cell " + grid::to_string(c) + " outside grid");
        g.set(c.x, c.y, true);
    }
    return g;
}

double iou(const BoolGrid& answer, const BoolGrid& response) {
    if (answer.size != response.size) throw std::invalid_argument("iou grid dimension mismatch");
    long inter = 0, uni = 0;
    for (size_t i = 0; i < answer.cells.size(); ++i) {
        const bool a = answer.cells[i] != 0;
        const bool b = response.cells[i] != 0;
        inter += (a && b) ? 1 : 0;
        uni += (a || b) ? 1 : 0;
    }
    if (uni == 0) return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

BoolGrid grid_where(int size, const std::function<bool(int, int)>& predicate) {
    BoolGrid g = BoolGrid::empty(size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (predicate(x, y)) g.set(x, y, true);
    return g;
}

std::string grid_to_scene(const BoolGrid& g) {
    std::ostringstream os;
    for (int y = g.size - 1; y >= 0; --y) {
        for (int x = 0; x < g.size; ++x) {
            if (x > 0) os << ' ';
            os << (g.at(x, y) ? 'x' : 'o');
        }
        if (y > 0) os << '\n';
    }
    return os.str();
}

std::set<Cell> grid_cells(const BoolGrid& g) {
    std::set<Cell> cells;
    for (int y = 0; y < g.size; ++y)
        for (int x = 0; x < g.size; ++x)
            if (g.at(x, y)) cells.insert(Cell{x, y});
    return cells;
}

}  // namespace

std::vector<ConstrainedPrompt> builtin_constrained_corpus() {
    const int n = 10;
    std::vector<ConstrainedPrompt> prompts;
    auto add = [&](const std::string& id, const std::string& request,
                   std::function<bool(int, int)> predicate) {
        prompts.push_back({id, request, grid_where(n, predicate)});
    };
    add("bottom_row", "Fill every cell of the bottom row (y = 0) and nothing else.",
        [](int, int y) { return y == 0; });
    add("row_6", "Fill every cell of the row y = 6 and nothing else.",
        [](int, int y) { return y == 6; });
    add("left_column", "Fill every cell of the leftmost column (x = 0) and nothing else.",
        [](int x, int) { return x == 0; });
    add("right_column", "Fill every cell of the rightmost column (x = 9) and nothing else.",
        [](int x, int) { return x == 9; });
    add("main_diagonal", "Fill the diagonal cells from (0, 0) to (9, 9) and nothing else.",
        [](int x, int y) { return x == y; });
    add("anti_diagonal", "Fill the diagonal cells from (0, 9) to (9, 0) and nothing else.",
        [](int x, int y) { return x + y == 9; });
    add("perimeter", "Fill every cell on the outer border of the pad and nothing else.",
        [n](int x, int y) { return x == 0 || y == 0 || x == n - 1 || y == n - 1; });
    add("center_block",
        "Fill the four center cells (4, 4), (5, 4), (4, 5) and (5, 5) and nothing else.",
        [](int x, int y) { return (x == 4 || x == 5) && (y == 4 || y == 5); });
    add("corners", "Fill the four corner cells of the pad and nothing else.",
        [n](int x, int y) { return (x == 0 || x == n - 1) && (y == 0 || y == n - 1); });
    add("bottom_left_square",
        "Fill the 3x3 square of cells whose bottom-left corner is (0, 0) and nothing else.",
        [](int x, int y) { return x < 3 && y < 3; });
    add("top_right_square",
        "Fill the 2x2 square of cells in the top-right corner and nothing else.",
        [n](int x, int y) { return x >= n - 2 && y >= n - 2; });
    add("plus_center",
        "Fill every cell of the row y = 4 and every cell of the column x = 4 and nothing else.",
        [](int x, int y) { return x == 4 || y == 4; });
    add("even_checker", "Fill every cell where x + y is even and nothing else.",
        [](int x, int y) { return (x + y) % 2 == 0; });
    add("left_half", "Fill every cell with x <= 4 (the left half of the pad) and nothing else.",
        [](int x, int) { return x <= 4; });
    add("inner_ring",
        "Fill the outline of the square spanning (1, 1) to (8, 8) and nothing else.",
        [n](int x, int y) {
            if (x < 1 || x > n - 2 || y < 1 || y > n - 2) return false;
            return x == 1 || x == n - 2 || y == 1 || y == n - 2;
        });
    return prompts;
}

std::vector<ConstrainedPrompt> load_corpus(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open corpus " + path.string());
    std::vector<ConstrainedPrompt> prompts;
    std::string line;
    std::string id, request, grid_text;
    bool in_grid = false;
    auto flush = [&]() {
        if (id.empty() && request.empty() && grid_text.empty()) return;
        if (id.empty() || request.empty() || grid_text.empty())
            throw std::runtime_error("corpus document missing id, request or grid");
        const auto scene = grid::parse_scene_text(grid_text);
        ConstrainedPrompt p;
        p.id = id;
        p.request = request;
        p.answer = to_bool_grid(scene.occupied, scene.pad_size);
        prompts.push_back(std::move(p));
        id.clear();
        request.clear();
        grid_text.clear();
        in_grid = false;
    };
    while (std::getline(is, line)) {
        if (line == "---") {
            flush();
        } else if (line.rfind("id: ", 0) == 0) {
            id = line.substr(4);
            in_grid = false;
        } else if (line.rfind("request: ", 0) == 0) {
            request = line.substr(9);
            in_grid = false;
        } else if (line == "grid:") {
            in_grid = true;
        } else if (in_grid && !line.empty()) {
            grid_text += line + "\n";
        }
    }
    flush();
    if (prompts.empty()) throw std::runtime_error("corpus " + path.string() + " holds no prompts");
    return prompts;
}

void save_corpus(const std::vector<ConstrainedPrompt>& prompts,
                 const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write corpus " + path.string());
    for (size_t i = 0; i < prompts.size(); ++i) {
        if (i) os << "---\n";
        os << "id: " << prompts[i].id << "\n";
        os << "request: " << prompts[i].request << "\n";
        os << "grid:\n" << grid_to_scene(prompts[i].answer) << "\n";
    }
}

void register_corpus_answers(plan::MockBackend& backend,
                             const std::vector<ConstrainedPrompt>& prompts) {
    for (const auto& prompt : prompts) {
        const auto cells = grid_cells(prompt.answer);
        const std::string id = prompt.id;
        backend.register_design(prompt.request, [cells, id](const plan::MockContext& ctx) {
            plan::ActionPlan p;
            p.title = id;
            std::vector<Cell> order(cells.begin(), cells.end());
            std::sort(order.begin(), order.end(), [](const Cell& a, const Cell& b) {
                if (a.y != b.y) return a.y > b.y;
                return a.x < b.x;
            });
            for (const auto& c : order)
                if (!ctx.occupied.count(c)) p.coordinates.push_back(c);
            p.used_coordinates = {ctx.occupied.begin(), ctx.occupied.end()};
            p.reasoning = "stored answer for " + id;
            return p;
        });
    }
}

std::vector<EvalResult> run_constrained_suite(const std::vector<ConstrainedPrompt>& prompts,
                                              const plan::PlannerBackend& backend,
                                              const SuiteOptions& options, RunLedger* ledger) {
    const int trials = options.trials_per_prompt;
    std::vector<EvalResult> results(prompts.size());
    for (size_t i = 0; i < prompts.size(); ++i) {
        results[i].prompt_id = prompts[i].id;
        results[i].trials.resize(trials);
        results[i].model = options.model_label.empty() ? backend.name() : options.model_label;
    }

    struct Task {
        size_t prompt;
        int trial;
    };
    std::vector<Task> tasks;
    for (size_t p = 0; p < prompts.size(); ++p)
        for (int t = 0; t < trials; ++t) tasks.push_back({p, t});

    auto run_task = [&](const Task& task) {
        const ConstrainedPrompt& prompt = prompts[task.prompt];
        TrialResult trial;
        trial.trial = task.trial;
        const auto world = grid::world_for_pad(prompt.answer.size);
        const grid::BuildState state(prompt.answer.size);
        const auto parts = plan::build_prompt(prompt.request, state, world);
        const auto t0 = std::chrono::steady_clock::now();
        std::string raw;
        try {
            const auto completion = backend.complete(parts.assemble());
            raw = completion.text;
            trial.cost_tokens = completion.tokens;
        } catch (const plan::BackendError& e) {
            trial.latency_ms = std::chrono::duration<double, std::milli>(
                                   std::chrono::steady_clock::now() - t0)
                                   .count();
            trial.error = e.what();
            if (ledger) ledger->log_exchange(parts.assemble(), "", trial.error);
            results[task.prompt].trials[task.trial] = trial;
            return;
        }
        trial.latency_ms =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
                .count();
        try {
            plan::ParseOptions popts;
            popts.discard_out_of_bounds = true;
            const auto parsed =
                plan::parse_plan(raw, world, popts, &trial.out_of_bounds_discarded);
            trial.parse_ok = true;
            std::set<Cell> cells(parsed.coordinates.begin(), parsed.coordinates.end());
            trial.iou_score = iou(prompt.answer, to_bool_grid(cells, prompt.answer.size));
            if (ledger) ledger->log_exchange(parts.assemble(), raw, "ok");
        } catch (const plan::PlanParseError& e) {
            trial.error = e.what();
            if (ledger)
                ledger->log_exchange(parts.assemble(), raw,
                                     std::string(plan::to_string(e.kind())) + ": " + e.what());
        }
        results[task.prompt].trials[task.trial] = trial;
    };

    const int workers = std::max(1, std::min<int>(options.parallelism,
                                                  static_cast<int>(tasks.size())));
    if (workers == 1) {
        for (const auto& task : tasks) run_task(task);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (;;) {
                    const size_t i = next.fetch_add(1);
                    if (i >= tasks.size()) return;
                    run_task(tasks[i]);
                }
            });
        for (auto& th : pool) th.join();
    }

    for (auto& result : results) {
        double mean = 0.0, m2 = 0.0;
        int n = 0;
        for (const auto& trial : result.trials) {
            ++n;
            const double delta = trial.iou_score - mean;
            mean += delta / n;
            m2 += delta * (trial.iou_score - mean);
        }
        result.mean_iou = n ? mean : 0.0;
        result.variance = n ? m2 / n : 0.0;
    }
    return results;
}

std::vector<MatrixRow> run_reprompt_matrix(const std::vector<std::string>& designs,
                                           const plan::PlannerBackend& backend,
                                           const grid::GridWorld& world,
                                           const sync::PadMap& pad_map,
                                           const sim::ErrorModel& error_model,
                                           const std::vector<std::uint64_t>& seeds,
                                           const sim::RunConfig& base_cfg,
                                           const sim::CameraParams& camera, RunLedger* ledger) {
    std::vector<MatrixRow> rows;
    for (const auto& design : designs) {
        for (const auto seed : seeds) {
            sim::ErrorModel em = error_model;
            em.seed = seed;
            sim::RunConfig cfg_on = base_cfg;
            cfg_on.reprompt_enabled = true;
            sim::RunConfig cfg_off = base_cfg;
            cfg_off.reprompt_enabled = false;

            const auto with = sim::run_build(design, backend, world, pad_map, em, cfg_on,
                                             camera, ledger);
            const auto without = sim::run_build(design, backend, world, pad_map, em, cfg_off,
                                                camera, ledger);

            const size_t shared =
                std::min(with.error_events.size(), without.error_events.size());
            int misplacements = 0;
            for (size_t i = 0; i < shared; ++i) {
                const auto& a = with.error_events[i];
                const auto& b = without.error_events[i];
                if (a.step != b.step || a.misplaced != b.misplaced ||
                    a.drop_failed != b.drop_failed)
                    throw std::logic_error("paired arms diverged in their error realizations");
                if (a.misplaced) ++misplacements;
            }

            MatrixRow row;
            row.design = design;
            row.seed = seed;
            row.iou_reprompt = with.final_iou;
            row.iou_no_reprompt = without.final_iou;
            row.prompts_reprompt = with.prompts_used;
            row.prompts_no_reprompt = without.prompts_used;
            row.shared_misplacements = misplacements;
            rows.push_back(row);
        }
    }
    return rows;
}

QualitativeStore::QualitativeStore(const std::filesystem::path& file) : file_(file) {
    if (std::filesystem::exists(file)) {
        std::ifstream is(file);
        std::string line;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const auto j = json::parse(line);
            records_.push_back(Entry{j.at("design_id").get<std::string>(),
                                     j.at("grade").get<int>(),
                                     j.at("grader_id").get<std::string>()});
        }
    }
}

void QualitativeStore::record(const std::string& design_id, int grade,
                              const std::string& grader_id) {
    if (grade < 1 || grade > 3) throw std::out_of_range("grade must be 1, 2 or 3");
    for (const auto& e : records_)
        if (e.design_id == design_id && e.grader_id == grader_id)
            throw std::logic_error("grade for (" + design_id + ", " + grader_id +
                                   ") already recorded");
    records_.push_back(Entry{design_id, grade, grader_id});
    if (!file_.empty()) {
        std::ofstream os(file_, std::ios::app);
        nlohmann::ordered_json j;
        j["design_id"] = design_id;
        j["grade"] = grade;
        j["grader_id"] = grader_id;
        os << j.dump() << "\n";
    }
}

std::map<int, int> QualitativeStore::counts() const {
    std::map<int, int> out{{1, 0}, {2, 0}, {3, 0}};
    for (const auto& e : records_) ++out[e.grade];
    return out;
}

namespace {

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (const char ch : s) {
        if (ch == '"') out += "\"\"";
        else out += ch;
    }
    out += "\"";
    return out;
}

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << content;
}

// Minimal deterministic bar chart.
std::string svg_bar_chart(const std::string& title,
                          const std::vector<std::pair<std::string, std::vector<double>>>& groups,
                          const std::vector<std::string>& series_names) {
    const int bar_w = 18;
    const int gap = 26;
    const size_t series = series_names.size();
    const int group_w = static_cast<int>(series) * bar_w + gap;
    const int plot_h = 240;
    const int width = 80 + static_cast<int>(groups.size()) * group_w;
    const int height = plot_h + 120;
    const char* palette[] = {"#4878a8", "#d08333"};
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
       << height << "\">\n";
    os << "<text x=\"10\" y=\"20\" font-size=\"14\">" << title << "</text>\n";
    os << "<line x1=\"50\" y1=\"" << 40 + plot_h << "\" x2=\"" << width - 10 << "\" y2=\""
       << 40 + plot_h << "\" stroke=\"#333\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double frac = tick / 4.0;
        const int y = 40 + plot_h - static_cast<int>(frac * plot_h);
        os << "<text x=\"14\" y=\"" << y + 4 << "\" font-size=\"10\">" << fixed(frac, 2)
           << "</text>\n";
    }
    for (size_t g = 0; g < groups.size(); ++g) {
        const int x0 = 60 + static_cast<int>(g) * group_w;
        for (size_t s = 0; s < series && s < groups[g].second.size(); ++s) {
            const double v = std::clamp(groups[g].second[s], 0.0, 1.0);
            const int bh = static_cast<int>(v * plot_h);
            os << "<rect x=\"" << x0 + static_cast<int>(s) * bar_w << "\" y=\""
               << 40 + plot_h - bh << "\" width=\"" << bar_w - 2 << "\" height=\"" << bh
               << "\" fill=\"" << palette[s % 2] << "\"/>\n";
        }
        os << "<text x=\"" << x0 << "\" y=\"" << 40 + plot_h + 14
           << "\" font-size=\"9\" transform=\"rotate(35 " << x0 << " " << 40 + plot_h + 14
           << ")\">" << groups[g].first << "</text>\n";
    }
    for (size_t s = 0; s < series; ++s) {
        const int y = 40 + static_cast<int>(s) * 16;
        os << "<rect x=\"" << width - 150 << "\" y=\"" << y << "\" width=\"12\" height=\"12\" "
           << "fill=\"" << palette[s % 2] << "\"/>\n";
        os << "<text x=\"" << width - 132 << "\" y=\"" << y + 10 << "\" font-size=\"10\">"
           << series_names[s] << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace

void emit_report(const std::vector<EvalResult>& results, const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    std::ostringstream csv;
    csv << "prompt_id,trial,iou,latency_ms,cost_tokens,parse_ok,oob_discarded,error\n";
    for (const auto& result : results)
        for (const auto& trial : result.trials) {
            csv << csv_escape(result.prompt_id) << "," << trial.trial << ","
                << fixed(trial.iou_score) << "," << fixed(trial.latency_ms, 3) << ",";
            if (trial.cost_tokens >= 0) csv << trial.cost_tokens;
            csv << "," << (trial.parse_ok ? 1 : 0) << "," << trial.out_of_bounds_discarded << ","
                << csv_escape(trial.error) << "\n";
        }
    write_text_file(out_dir / "eval_trials.csv", csv.str());

    nlohmann::ordered_json summary;
    summary["model"] = results.empty() ? "" : results.front().model;
    summary["prompt_count"] = results.size();
    summary["variance_kind"] = "population";
    json prompts_json = json::array();
    double mean_sum = 0.0, var_sum = 0.0;
    for (const auto& result : results) {
        nlohmann::ordered_json pj;
        pj["prompt_id"] = result.prompt_id;
        pj["trials"] = result.trials.size();
        pj["mean_iou"] = result.mean_iou;
        pj["variance"] = result.variance;
        prompts_json.push_back(pj);
        mean_sum += result.mean_iou;
        var_sum += result.variance;
    }
    summary["prompts"] = prompts_json;
    summary["overall_mean_iou"] = results.empty() ? 0.0 : mean_sum / results.size();
    summary["overall_mean_variance"] = results.empty() ? 0.0 : var_sum / results.size();
    write_text_file(out_dir / "eval_summary.json", summary.dump(2) + "\n");

    std::vector<std::pair<std::string, std::vector<double>>> groups;
    for (const auto& result : results)
        groups.emplace_back(result.prompt_id, std::vector<double>{result.mean_iou});
    write_text_file(out_dir / "eval_iou.svg",
                    svg_bar_chart("mean IoU per prompt", groups, {"mean IoU"}));
}

void emit_matrix_report(const std::vector<MatrixRow>& rows,
                        const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);

    std::ostringstream csv;
    csv << "design,seed,iou_reprompt,iou_no_reprompt,prompts_reprompt,prompts_no_reprompt,"
           "shared_misplacements\n";
    for (const auto& row : rows)
        csv << csv_escape(row.design) << "," << row.seed << "," << fixed(row.iou_reprompt) << ","
            << fixed(row.iou_no_reprompt) << "," << row.prompts_reprompt << ","
            << row.prompts_no_reprompt << "," << row.shared_misplacements << "\n";
    write_text_file(out_dir / "matrix_pairs.csv", csv.str());

    struct Agg {
        int runs = 0;
        int success_on = 0;
        int success_off = 0;
        double iou_on = 0.0;
        double iou_off = 0.0;
    };
    std::vector<std::pair<std::string, Agg>> per_design;
    for (const auto& row : rows) {
        auto it = std::find_if(per_design.begin(), per_design.end(),
                               [&](const auto& p) { return p.first == row.design; });
        if (it == per_design.end()) {
            per_design.emplace_back(row.design, Agg{});
            it = std::prev(per_design.end());
        }
        auto& agg = it->second;
        ++agg.runs;
        agg.iou_on += row.iou_reprompt;
        agg.iou_off += row.iou_no_reprompt;
        if (row.iou_reprompt == 1.0) ++agg.success_on;
        if (row.iou_no_reprompt == 1.0) ++agg.success_off;
    }

    nlohmann::ordered_json summary;
    json designs_json = json::array();
    for (const auto& [name, agg] : per_design) {
        nlohmann::ordered_json dj;
        dj["design"] = name;
        dj["runs"] = agg.runs;
        dj["success_reprompt"] = agg.success_on;
        dj["success_no_reprompt"] = agg.success_off;
        dj["mean_iou_reprompt"] = agg.runs ? agg.iou_on / agg.runs : 0.0;
        dj["mean_iou_no_reprompt"] = agg.runs ? agg.iou_off / agg.runs : 0.0;
        designs_json.push_back(dj);
    }
    summary["designs"] = designs_json;
    summary["rows"] = rows.size();
    write_text_file(out_dir / "matrix_summary.json", summary.dump(2) + "\n");

    std::vector<std::pair<std::string, std::vector<double>>> groups;
    for (const auto& [name, agg] : per_design)
        groups.emplace_back(name, std::vector<double>{agg.runs ? agg.iou_on / agg.runs : 0.0,
                                                      agg.runs ? agg.iou_off / agg.runs : 0.0});
    write_text_file(out_dir / "matrix_iou.svg",
                    svg_bar_chart("mean final IoU per design", groups,
                                  {"reprompt on", "reprompt off"}));
}

}  // namespace dronebuild::eval
