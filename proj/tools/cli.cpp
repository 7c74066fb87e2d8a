#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <regex>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "diffprobe/activation_store.hpp"
#include "diffprobe/checkpoint.hpp"
#include "diffprobe/error.hpp"
#include "diffprobe/io.hpp"
#include "diffprobe/labels.hpp"
#include "diffprobe/parallel.hpp"
#include "diffprobe/probe.hpp"
#include "diffprobe/reports.hpp"
#include "diffprobe/scaling.hpp"
#include "diffprobe/steering.hpp"
#include "diffprobe/synthetic.hpp"

namespace diffprobe::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
T config_value(const json& value, const std::string& key) {
    const bool ok = [&] {
        if constexpr (std::is_same_v<T, double>) return value.is_number();
        else if constexpr (std::is_same_v<T, std::string>) return value.is_string();
        else if constexpr (std::is_unsigned_v<T>) return value.is_number_unsigned();
        else return value.is_number_integer();
    }();
    if (!ok) throw UsageError("config key '" + key + "' has the wrong type");
    return value.get<T>();
}

template <typename T>
std::vector<T> config_list(const json& value, const std::string& key) {
    if (!value.is_array()) throw UsageError("config key '" + key + "' must be an array");
    std::vector<T> out;
    for (const auto& item : value) out.push_back(config_value<T>(item, key));
    return out;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
    std::vector<double> out;
    for (const auto& field : split_csv_line(text)) out.push_back(parse_double(field, what));
    return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
    std::vector<int> out;
    for (const auto& field : split_csv_line(text)) out.push_back(static_cast<int>(parse_int(field, what)));
    return out;
}

std::string to_text(const std::function<void(std::ostream&)>& writer) {
    std::ostringstream buffer;
    writer(buffer);
    return buffer.str();
}

void require_file(const fs::path& path, const char* what) {
    if (!fs::is_regular_file(path)) throw UsageError(std::string(what) + " not found: " + path.string());
}

void require_dir(const fs::path& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (!fs::is_directory(path)) throw UsageError("cannot create output directory " + path.string());
}

void require_parent(const fs::path& path) {
    if (path.has_parent_path()) require_dir(path.parent_path());
}

std::size_t env_thread_cap() {
    const char* env = std::getenv("DIFFPROBE_THREADS");
    if (!env || !*env) return 0;
    try {
        const auto value = parse_int(env, "DIFFPROBE_THREADS");
        if (value < 0) throw UsageError("DIFFPROBE_THREADS must be >= 0");
        return static_cast<std::size_t>(value);
    } catch (const Error&) {
        throw UsageError("DIFFPROBE_THREADS must be an integer");
    }
}

// Shared settings: config file values, then explicit flags on top.
struct Settings {
    RunConfig config;
    std::string config_path;
    std::string alpha_grid;
    std::string positions;
    std::map<std::string, std::vector<CLI::Option*>> flags;

    void add_common(CLI::App* app) {
        app->add_option("--config", config_path, "JSON config file (flags override its values)");
    }
    void add_sweep(CLI::App* app) {
        flags["k"].push_back(app->add_option("--k", config.k, "Cross-validation folds (default 5)"));
        flags["seed"].push_back(app->add_option("--seed", config.seed, "Fold-shuffle seed (default 0)"));
        flags["lambda"].push_back(app->add_option("--lambda", config.lambda, "Ridge penalty (default 1.0)"));
        flags["threads"].push_back(app->add_option("--threads", config.threads, "Worker threads, 0 = auto"));
    }
    void add(CLI::App* app, const std::string& key, const std::string& flag, const std::string& help) {
        if (key == "epsilon") flags[key].push_back(app->add_option(flag, config.epsilon, help));
        else if (key == "bins") flags[key].push_back(app->add_option(flag, config.bins, help));
        else if (key == "top_k") flags[key].push_back(app->add_option(flag, config.top_k, help));
        else if (key == "length_bucket_width") flags[key].push_back(app->add_option(flag, config.length_bucket_width, help));
        else if (key == "out_dir") flags[key].push_back(app->add_option(flag, config.out_dir, help));
        else if (key == "alpha_grid") flags[key].push_back(app->add_option(flag, alpha_grid, help));
        else if (key == "positions") flags[key].push_back(app->add_option(flag, positions, help));
    }

    RunConfig resolve() const {
        RunConfig merged = config_path.empty() ? RunConfig{} : load_config(config_path);
        auto given = [&](const char* key) {
            const auto it = flags.find(key);
            if (it == flags.end()) return false;
            for (const auto* option : it->second)
                if (option->count() > 0) return true;
            return false;
        };
        if (given("k")) merged.k = config.k;
        if (given("seed")) merged.seed = config.seed;
        if (given("lambda")) merged.lambda = config.lambda;
        if (given("threads")) merged.threads = config.threads;
        if (given("epsilon")) merged.epsilon = config.epsilon;
        if (given("bins")) merged.bins = config.bins;
        if (given("top_k")) merged.top_k = config.top_k;
        if (given("length_bucket_width")) merged.length_bucket_width = config.length_bucket_width;
        if (given("out_dir")) merged.out_dir = config.out_dir;
        try {
            if (given("alpha_grid")) merged.alpha_grid = parse_double_list(alpha_grid, "alpha grid");
            if (given("positions")) merged.positions = parse_int_list(positions, "positions");
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
        if (merged.k < 2) throw UsageError("k must be at least 2");
        if (!(merged.lambda > 0.0)) throw UsageError("lambda must be positive");
        if (merged.bins == 0) throw UsageError("bins must be positive");
        const std::size_t cap = env_thread_cap();
        if (cap > 0) merged.threads = merged.threads == 0 ? cap : std::min(merged.threads, cap);
        return merged;
    }
};

SweepConfig sweep_config(const RunConfig& c) { return {c.k, c.seed, c.lambda, c.threads}; }

fs::path sibling(const fs::path& path, const std::string& suffix) {
    fs::path out = path;
    out.replace_extension();
    out += suffix;
    return out;
}

// --- subcommands -----------------------------------------------------------

struct ProbeSweepArgs {
    std::string activations, labels, out, weights, dataset;
};

int probe_sweep(const ProbeSweepArgs& a, const RunConfig& c, std::ostream& log) {
    require_file(a.activations, "activations file");
    require_file(a.labels, "labels file");
    require_parent(a.out);
    const ActivationSet set = load_activation_set(a.activations);
    const DifficultyLabels labels = load_labels_csv(a.labels, a.dataset);
    const ProbeGrid grid = sweep_grid(set, labels, sweep_config(c));
    const fs::path weights = a.weights.empty() ? sibling(a.out, ".weights.json") : fs::path(a.weights);
    write_file_atomic(a.out, to_text([&](std::ostream& o) { write_grid_csv(grid, o); }));
    write_file_atomic(weights, weights_json(grid.refit_weights));
    if (grid.best)
        log << "best cell: layer " << grid.best->cell.layer << ", position " << grid.best->cell.position
            << ", mean " << format_fixed(grid.best->mean_score, 4) << '\n';
    else
        log << "no cell could be scored\n";
    return kExitOk;
}

struct ScalingArgs {
    std::string points, out, plot;
};

int scaling_fit(const ScalingArgs& a, const RunConfig& c, std::ostream& out) {
    require_file(a.points, "points file");
    const auto points = load_scaling_points_csv(a.points);
    const ScalingFit fit = fit_power_law(points, c.epsilon);
    const std::string text = scaling_fit_json(fit);
    if (a.out.empty()) {
        out << text;
    } else {
        require_parent(a.out);
        write_file_atomic(a.out, text);
    }
    if (!a.plot.empty()) {
        require_parent(a.plot);
        write_file_atomic(a.plot, to_text([&](std::ostream& o) { write_scaling_plot_csv(fit, points, o); }));
    }
    return kExitOk;
}

struct SteerBuildArgs {
    std::string weights, activations, out, dataset;
    int layer = 0;
    int position = -1;
};

int steer_build(const SteerBuildArgs& a) {
    require_file(a.weights, "weights file");
    require_file(a.activations, "activations file");
    require_parent(a.out);
    const auto probes = parse_weights_json(read_file(a.weights));
    const auto it = probes.find({a.layer, a.position});
    if (it == probes.end())
        throw Error("weights file has no probe for layer " + std::to_string(a.layer) + ", position " +
                    std::to_string(a.position));
    const ActivationSet set = load_activation_set(a.activations);
    const FeatureMatrix x = slice(set, a.layer, a.position);
    const SteeringVector v = build_steering_vector(it->second, x, set.model_id, a.dataset);
    write_file_atomic(a.out, steering_vector_json(v));
    return kExitOk;
}

struct SteerReportArgs {
    std::string records;
};

int steer_report(const SteerReportArgs& a, const RunConfig& c) {
    require_file(a.records, "records file");
    require_dir(c.out_dir);
    std::ifstream in(a.records);
    const auto records = read_generation_records(in);
    if (records.empty()) throw Error("no generation records to summarize");
    // One prediction per problem, in first-seen order.
    std::map<std::string, double> seen;
    std::vector<double> predictions;
    for (const auto& r : records)
        if (seen.emplace(r.problem_id, r.predicted_difficulty).second) predictions.push_back(r.predicted_difficulty);
    const DifficultyBins bins = predicted_difficulty_bins(predictions, c.bins);
    const SteeringReport report = summarize_runs(records, bins, c.alpha_grid, c.length_bucket_width);
    const fs::path dir = c.out_dir;
    write_file_atomic(dir / "pass1_by_bin.csv", to_text([&](std::ostream& o) { write_pass1_csv(report, o); }));
    write_file_atomic(dir / "length_histogram.csv", to_text([&](std::ostream& o) { write_length_csv(report, o); }));
    write_file_atomic(dir / "code_blocks.csv", to_text([&](std::ostream& o) { write_code_block_csv(report, o); }));
    write_file_atomic(dir / "steering_report.json", steering_report_json(report, bins));
    return kExitOk;
}

struct TrackArgs {
    std::string checkpoints, pass1, probe_cell;
    std::vector<std::string> labels;
};

std::map<int, fs::path> find_checkpoints(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw UsageError("checkpoint directory not found: " + dir.string());
    static const std::regex pattern(R"(step_(\d+)\.actv)");
    std::map<int, fs::path> found;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::smatch m;
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && std::regex_match(name, m, pattern))
            found.emplace(std::stoi(m[1].str()), entry.path());
    }
    if (found.empty()) throw Error("no step_<k>.actv files in " + dir.string());
    return found;
}

int track(const TrackArgs& a, const RunConfig& c, std::ostream& log) {
    require_file(a.pass1, "pass1 file");
    std::map<std::string, DifficultyLabels> labels;
    for (const auto& spec : a.labels) {
        const auto eq = spec.find('=');
        if (eq == std::string::npos || eq == 0) throw UsageError("--labels expects NAME=PATH, got '" + spec + "'");
        const std::string name = spec.substr(0, eq);
        const fs::path path = spec.substr(eq + 1);
        require_file(path, "labels file");
        labels.emplace(name, load_labels_csv(path, name));
    }
    std::optional<CellKey> fixed_cell;
    if (!a.probe_cell.empty()) {
        const auto parts = parse_int_list(a.probe_cell, "probe cell");
        if (parts.size() != 2) throw UsageError("--probe-cell expects LAYER,POSITION");
        fixed_cell = CellKey{parts[0], parts[1]};
    }
    require_dir(c.out_dir);

    const auto files = find_checkpoints(a.checkpoints);
    CheckpointSeries series;
    const auto pass1 = load_step_series_csv(a.pass1, "pass1");
    for (const auto& [step, path] : files) {
        const ActivationSet set = load_activation_set(path);
        series.steps.push_back(step);
        for (const auto& [name, lab] : labels) series.grids[step].emplace(name, sweep_grid(set, lab, sweep_config(c)));
        const auto p = pass1.find(step);
        if (p == pass1.end()) throw Error("pass1 file has no entry for step " + std::to_string(step));
        series.pass1[step] = p->second;
    }

    const fs::path dir = c.out_dir;
    Eigen::VectorXd steps(static_cast<Eigen::Index>(series.steps.size()));
    for (std::size_t i = 0; i < series.steps.size(); ++i) steps(static_cast<Eigen::Index>(i)) = series.steps[i];
    const Eigen::VectorXd accuracy = pass1_series(series);
    for (const auto& [name, lab] : labels) {
        const TrackMatrix scores = build_track_matrix(series, name, c.positions);
        const TrackMatrix change = relative_change(scores);
        write_file_atomic(dir / ("heatmap_" + name + ".csv"),
                          to_text([&](std::ostream& o) { write_heatmap_csv(scores, change, o); }));
        const Eigen::VectorXd probe =
            fixed_cell ? cell_score_series(series, name, *fixed_cell) : best_score_series(series, name);
        std::map<int, double> probe_map;
        for (std::size_t i = 0; i < series.steps.size(); ++i)
            probe_map[series.steps[i]] = probe(static_cast<Eigen::Index>(i));
        write_file_atomic(dir / ("probe_scores_" + name + ".csv"),
                          to_text([&](std::ostream& o) { write_step_series_csv(probe_map, "score", o); }));
        try {
            const auto report = residual_slope(probe, accuracy, steps);
            write_file_atomic(dir / ("residual_" + name + ".json"), residual_report_json(report));
            log << name << ": " << format_residual(report) << '\n';
        } catch (const Error& e) {
            log << name << ": residual regression skipped (" << e.what() << ")\n";
        }
    }
    const PeakReport peak = peak_report(series);
    write_file_atomic(dir / "peak.json", peak_report_json(peak));
    log << "pass@1: " << format_peak(peak) << '\n';
    return kExitOk;
}

struct ResidualArgs {
    std::string probe, pass1, out;
};

int residual(const ResidualArgs& a, std::ostream& out) {
    require_file(a.probe, "probe score file");
    require_file(a.pass1, "pass1 file");
    const auto probe = load_step_series_csv(a.probe, "score");
    const auto pass1 = load_step_series_csv(a.pass1, "pass1");
    std::vector<int> steps;
    for (const auto& [step, value] : probe)
        if (pass1.contains(step)) steps.push_back(step);
    if (steps.size() != probe.size() || steps.size() != pass1.size())
        throw Error("probe-score and pass1 files cover different steps");
    const auto n = static_cast<Eigen::Index>(steps.size());
    Eigen::VectorXd x(n), y(n), s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int step = steps[static_cast<std::size_t>(i)];
        x(i) = probe.at(step);
        y(i) = pass1.at(step);
        s(i) = step;
    }
    const auto report = residual_slope(x, y, s);
    const std::string text = residual_report_json(report);
    if (a.out.empty()) {
        out << text;
    } else {
        require_parent(a.out);
        write_file_atomic(a.out, text);
    }
    return kExitOk;
}

struct SynthArgs {
    std::string spec;
};

int synth(const SynthArgs& a, const RunConfig& c) {
    require_file(a.spec, "synth spec");
    SynthSpec spec;
    try {
        spec = parse_synth_spec(read_file(a.spec));
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    require_dir(c.out_dir);
    const fs::path dir = c.out_dir;
    auto save_labels = [&](const DifficultyLabels& labels, const fs::path& path) {
        write_file_atomic(path, to_text([&](std::ostream& o) { write_labels_csv(labels, o); }));
    };
    if (const auto* plant = std::get_if<PlantSpec>(&spec)) {
        const PlantedSet planted = plant_direction_set(*plant);
        save_activation_set(planted.set, dir / "synth.actv");
        save_labels(planted.labels, dir / "labels.csv");
        const nlohmann::ordered_json truth{
            {"target_layer", plant->target_cell.layer},
            {"target_position", plant->target_cell.position},
            {"snr", plant->snr},
            {"direction", std::vector<double>(planted.direction.data(),
                                              planted.direction.data() + planted.direction.size())}};
        write_file_atomic(dir / "planted.json", truth.dump() + "\n");
    } else if (const auto* scaling = std::get_if<ScalingPlantSpec>(&spec)) {
        const auto points =
            plant_scaling_points(scaling->C, scaling->alpha, scaling->sizes, scaling->noise_sigma, scaling->seed);
        write_file_atomic(dir / "points.csv", to_text([&](std::ostream& o) { write_scaling_points_csv(points, o); }));
    } else {
        const auto& ckpt = std::get<CheckpointPlantSpec>(spec);
        const PlantedSeries series = plant_checkpoint_series(ckpt);
        for (std::size_t i = 0; i < series.steps.size(); ++i)
            save_activation_set(series.sets[i], dir / ("step_" + std::to_string(series.steps[i]) + ".actv"));
        for (const auto& [name, labels] : series.labels) save_labels(labels, dir / ("labels_" + name + ".csv"));
    }
    return kExitOk;
}

struct InspectArgs {
    std::string file;
};

int inspect(const InspectArgs& a, std::ostream& out) {
    require_file(a.file, "activations file");
    const ActivationSet set = load_activation_set(a.file);
    out << json::parse(header_json(set)).dump(2) << '\n';
    return kExitOk;
}

struct GridReportArgs {
    std::string manifest;
    std::vector<std::string> pairs;
};

int grid_report(const GridReportArgs& a, const RunConfig& c) {
    require_file(a.manifest, "manifest");
    const auto lines = read_lines(a.manifest);
    if (lines.empty() || lines.front() != "model_id,dataset,grid,n_params")
        throw FormatError("manifest header must be 'model_id,dataset,grid,n_params'");
    const fs::path base = fs::path(a.manifest).parent_path();
    std::vector<ProbeGrid> grids;
    std::map<std::string, double> sizes;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 4) throw FormatError("manifest row needs 4 fields: '" + lines[i] + "'");
        fs::path grid_path = f[2];
        if (grid_path.is_relative()) grid_path = base / grid_path;
        grids.push_back(load_grid_csv(grid_path, f[0], f[1]));
        if (!f[3].empty()) sizes[f[0]] = parse_double(f[3], "n_params");
    }
    std::vector<ModelPair> pairs;
    for (const auto& p : a.pairs) {
        const auto comma = p.find(',');
        if (comma == std::string::npos) throw UsageError("--pair expects BASE,SPECIALISED");
        pairs.push_back({p.substr(0, comma), p.substr(comma + 1)});
    }
    const GridReports reports = grid_reports(grids, sizes, pairs, c.top_k);
    require_dir(c.out_dir);
    const fs::path dir = c.out_dir;
    write_file_atomic(dir / "top.csv", to_text([&](std::ostream& o) { write_top_csv(reports, o); }));
    write_file_atomic(dir / "positions.csv", to_text([&](std::ostream& o) { write_histogram_csv(reports, o); }));
    write_file_atomic(dir / "deltas.csv", to_text([&](std::ostream& o) { write_deltas_csv(reports, o); }));
    write_file_atomic(dir / "reports.json", reports_json(reports));
    for (const auto& [dataset, points] : reports.scaling_points)
        write_file_atomic(dir / ("scaling_points_" + dataset + ".csv"),
                          to_text([&](std::ostream& o) { write_scaling_points_csv(points, o); }));
    return kExitOk;
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw UsageError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    RunConfig c;
    for (const auto& [key, value] : j.items()) {
        if (key == "k") c.k = config_value<std::size_t>(value, key);
        else if (key == "seed") c.seed = config_value<std::uint64_t>(value, key);
        else if (key == "lambda") c.lambda = config_value<double>(value, key);
        else if (key == "epsilon") c.epsilon = config_value<double>(value, key);
        else if (key == "alpha_grid") c.alpha_grid = config_list<double>(value, key);
        else if (key == "bins") c.bins = config_value<std::size_t>(value, key);
        else if (key == "positions") c.positions = config_list<int>(value, key);
        else if (key == "top_k") c.top_k = config_value<std::size_t>(value, key);
        else if (key == "length_bucket_width") c.length_bucket_width = config_value<std::size_t>(value, key);
        else if (key == "threads") c.threads = config_value<std::size_t>(value, key);
        else if (key == "out_dir") c.out_dir = config_value<std::string>(value, key);
        else throw UsageError("unknown config key '" + key + "'");
    }
    return c;
}

RunConfig load_config(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw UsageError("config file not found: " + path.string());
    return parse_config(read_file(path));
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"diffprobe: difficulty probes over activation dumps"};
    app.name("diffprobe");
    app.require_subcommand(1);

    Settings settings;

    ProbeSweepArgs sweep;
    auto* sweep_cmd = app.add_subcommand("probe-sweep", "Cross-validated ridge probes over every (layer, position) cell");
    sweep_cmd->add_option("--activations", sweep.activations, "ACTV1 file")->required();
    sweep_cmd->add_option("--labels", sweep.labels, "labels CSV (problem_id,rating,source)")->required();
    sweep_cmd->add_option("--out", sweep.out, "grid CSV output")->required();
    sweep_cmd->add_option("--weights", sweep.weights, "weights JSON output (default: <out stem>.weights.json)");
    sweep_cmd->add_option("--dataset", sweep.dataset, "dataset name (default: labels file stem)");
    settings.add_common(sweep_cmd);
    settings.add_sweep(sweep_cmd);

    ScalingArgs scaling;
    auto* scaling_cmd = app.add_subcommand("scaling-fit", "Fit 1 - perf = C * N^-alpha in log-log space");
    scaling_cmd->add_option("--points", scaling.points, "CSV model_id,n_params,perf")->required();
    scaling_cmd->add_option("--out", scaling.out, "fit JSON output (default: stdout)");
    scaling_cmd->add_option("--plot", scaling.plot, "plot-data CSV output");
    settings.add_common(scaling_cmd);
    settings.add(scaling_cmd, "epsilon", "--epsilon", "gap clipping floor (default 1e-6)");

    SteerBuildArgs build;
    auto* build_cmd = app.add_subcommand("steer-build", "Build a steering vector from a fitted probe");
    build_cmd->add_option("--weights", build.weights, "weights JSON from probe-sweep")->required();
    build_cmd->add_option("--activations", build.activations, "ACTV1 file the probe was trained on")->required();
    build_cmd->add_option("--layer", build.layer, "probe layer")->required();
    build_cmd->add_option("--position", build.position, "probe position offset (e.g. -1)")->required();
    build_cmd->add_option("--dataset", build.dataset, "dataset the probe was trained on");
    build_cmd->add_option("--out", build.out, "steering vector JSON output")->required();
    settings.add_common(build_cmd);

    SteerReportArgs report;
    auto* report_cmd = app.add_subcommand("steer-report", "Summarize steered generation records");
    report_cmd->add_option("--records", report.records, "GenerationRecord JSON-lines")->required();
    settings.add_common(report_cmd);
    settings.add(report_cmd, "out_dir", "--out-dir", "output directory");
    settings.add(report_cmd, "alpha_grid", "--alpha-grid", "comma-separated coefficients (default -3..3)");
    settings.add(report_cmd, "bins", "--bins", "difficulty bins (default 3)");
    settings.add(report_cmd, "length_bucket_width", "--length-bucket", "token-count bucket width (default 250)");

    TrackArgs track_args;
    auto* track_cmd = app.add_subcommand("track", "Probe every checkpoint and build change maps");
    track_cmd->add_option("--checkpoints", track_args.checkpoints, "directory of step_<k>.actv files")->required();
    track_cmd->add_option("--labels", track_args.labels, "NAME=PATH labels CSV, repeatable")->required();
    track_cmd->add_option("--pass1", track_args.pass1, "CSV step,pass1")->required();
    track_cmd->add_option("--probe-cell", track_args.probe_cell,
                          "LAYER,POSITION fixed cell for the residual regression (default: best cell)");
    settings.add_common(track_cmd);
    settings.add_sweep(track_cmd);
    settings.add(track_cmd, "out_dir", "--out-dir", "output directory");
    settings.add(track_cmd, "positions", "--positions", "comma-separated offsets (default -1,-2,-3)");

    ResidualArgs residual_args;
    auto* residual_cmd = app.add_subcommand("residual", "Step-residualized probe vs pass@1 regression");
    residual_cmd->add_option("--probe", residual_args.probe, "CSV step,score")->required();
    residual_cmd->add_option("--pass1", residual_args.pass1, "CSV step,pass1")->required();
    residual_cmd->add_option("--out", residual_args.out, "report JSON output (default: stdout)");
    settings.add_common(residual_cmd);

    SynthArgs synth_args;
    auto* synth_cmd = app.add_subcommand("synth", "Generate synthetic inputs with planted ground truth");
    synth_cmd->add_option("--spec", synth_args.spec, "synth spec JSON")->required();
    settings.add_common(synth_cmd);
    settings.add(synth_cmd, "out_dir", "--out-dir", "output directory");

    InspectArgs inspect_args;
    auto* inspect_cmd = app.add_subcommand("inspect", "Print an ACTV1 header");
    inspect_cmd->add_option("file", inspect_args.file, "ACTV1 file")->required();

    GridReportArgs grid_args;
    auto* grid_cmd = app.add_subcommand("grid-report", "Top-k, position histogram and pair deltas over many grids");
    grid_cmd->add_option("--manifest", grid_args.manifest, "CSV model_id,dataset,grid,n_params")->required();
    grid_cmd->add_option("--pair", grid_args.pairs, "BASE,SPECIALISED model pair, repeatable");
    settings.add_common(grid_cmd);
    settings.add(grid_cmd, "out_dir", "--out-dir", "output directory");
    settings.add(grid_cmd, "top_k", "--top-k", "rows per dataset (default 3)");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitUsage;
    }

    try {
        const RunConfig config = settings.resolve();
        if (*sweep_cmd) return probe_sweep(sweep, config, err);
        if (*scaling_cmd) return scaling_fit(scaling, config, out);
        if (*build_cmd) return steer_build(build);
        if (*report_cmd) return steer_report(report, config);
        if (*track_cmd) return track(track_args, config, err);
        if (*residual_cmd) return residual(residual_args, out);
        if (*synth_cmd) return synth(synth_args, config);
        if (*inspect_cmd) return inspect(inspect_args, out);
        if (*grid_cmd) return grid_report(grid_args, config);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    err << app.help();
    return kExitUsage;
}

}  // namespace diffprobe::cli
