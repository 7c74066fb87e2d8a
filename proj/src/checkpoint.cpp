#include "diffprobe/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "diffprobe/error.hpp"
#include "diffprobe/io.hpp"
#include "diffprobe/stats.hpp"

namespace diffprobe {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

const ProbeGrid& grid_at(const CheckpointSeries& series, int step, const std::string& dataset) {
    const auto by_step = series.grids.find(step);
    if (by_step == series.grids.end()) throw Error("no grids for step " + std::to_string(step));
    const auto grid = by_step->second.find(dataset);
    if (grid == by_step->second.end())
        throw Error("dataset '" + dataset + "' missing at step " + std::to_string(step));
    return grid->second;
}

std::vector<int> grid_layers(const ProbeGrid& grid) {
    std::vector<int> layers;
    for (const auto& [key, result] : grid.cells)
        if (layers.empty() || layers.back() != key.layer) layers.push_back(key.layer);
    return layers;
}

}  // namespace

void validate(const CheckpointSeries& series) {
    if (series.steps.empty()) throw Error("checkpoint series has no steps");
    for (std::size_t i = 1; i < series.steps.size(); ++i)
        if (series.steps[i] <= series.steps[i - 1]) throw Error("checkpoint steps must be strictly increasing");
    for (int step : series.steps) {
        if (!series.grids.contains(step)) throw Error("no grids for step " + std::to_string(step));
        const auto p = series.pass1.find(step);
        if (p == series.pass1.end()) throw Error("no pass@1 for step " + std::to_string(step));
        if (!(p->second >= 0.0 && p->second <= 1.0))
            throw Error("pass@1 at step " + std::to_string(step) + " outside [0, 1]");
    }
}

TrackMatrix build_track_matrix(const CheckpointSeries& series, const std::string& dataset,
                               const std::vector<int>& positions) {
    validate(series);
    if (positions.empty()) throw Error("no positions requested");
    TrackMatrix m;
    m.dataset_name = dataset;
    m.steps = series.steps;
    m.positions = positions;
    m.layers = grid_layers(grid_at(series, series.steps.front(), dataset));

    for (int step : series.steps) {
        const ProbeGrid& grid = grid_at(series, step, dataset);
        Eigen::MatrixXd scores(static_cast<Eigen::Index>(m.layers.size()),
                               static_cast<Eigen::Index>(positions.size()));
        for (std::size_t p = 0; p < positions.size(); ++p) {
            bool position_seen = false;
            for (std::size_t l = 0; l < m.layers.size(); ++l) {
                const auto cell = grid.cells.find({m.layers[l], positions[p]});
                double value = kMissing;
                if (cell != grid.cells.end()) {
                    position_seen = true;
                    if (cell->second.score) value = cell->second.score->mean_score;
                }
                scores(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(p)) = value;
            }
            if (!position_seen)
                throw Error("position " + std::to_string(positions[p]) + " absent at step " +
                            std::to_string(step) + " for dataset '" + dataset + "'");
        }
        if (grid_layers(grid) != m.layers)
            throw Error("layer set at step " + std::to_string(step) + " differs from the first step");
        m.scores.push_back(std::move(scores));
    }
    return m;
}

TrackMatrix relative_change(const TrackMatrix& matrix) {
    TrackMatrix out = matrix;
    if (matrix.scores.empty()) return out;
    const Eigen::MatrixXd& base = matrix.scores.front();
    const Eigen::ArrayXXd denom = base.array().abs();
    for (auto& s : out.scores) {
        const Eigen::ArrayXXd change = (s.array() - base.array()) / denom;
        s = (denom > 0.0).select(change, kMissing).matrix();
    }
    return out;
}

Eigen::VectorXd best_score_series(const CheckpointSeries& series, const std::string& dataset) {
    validate(series);
    Eigen::VectorXd out(static_cast<Eigen::Index>(series.steps.size()));
    for (std::size_t i = 0; i < series.steps.size(); ++i) {
        const ProbeGrid& grid = grid_at(series, series.steps[i], dataset);
        if (!grid.best) throw Error("no scored cell at step " + std::to_string(series.steps[i]));
        out(static_cast<Eigen::Index>(i)) = grid.best->mean_score;
    }
    return out;
}

Eigen::VectorXd cell_score_series(const CheckpointSeries& series, const std::string& dataset, CellKey cell) {
    validate(series);
    Eigen::VectorXd out(static_cast<Eigen::Index>(series.steps.size()));
    for (std::size_t i = 0; i < series.steps.size(); ++i) {
        const ProbeGrid& grid = grid_at(series, series.steps[i], dataset);
        const auto it = grid.cells.find(cell);
        if (it == grid.cells.end() || !it->second.score)
            throw Error("cell (" + std::to_string(cell.layer) + ", " + std::to_string(cell.position) +
                        ") not scored at step " + std::to_string(series.steps[i]));
        out(static_cast<Eigen::Index>(i)) = it->second.score->mean_score;
    }
    return out;
}

Eigen::VectorXd pass1_series(const CheckpointSeries& series) {
    validate(series);
    Eigen::VectorXd out(static_cast<Eigen::Index>(series.steps.size()));
    for (std::size_t i = 0; i < series.steps.size(); ++i)
        out(static_cast<Eigen::Index>(i)) = series.pass1.at(series.steps[i]);
    return out;
}

ResidualRegressionReport residual_slope(const Eigen::Ref<const Eigen::VectorXd>& probe_scores,
                                        const Eigen::Ref<const Eigen::VectorXd>& pass1,
                                        const Eigen::Ref<const Eigen::VectorXd>& steps) {
    const Eigen::Index n = steps.size();
    if (probe_scores.size() != n || pass1.size() != n)
        throw Error("probe scores, pass@1 and steps must have equal length");
    if (n < 4) throw Error("residual regression needs at least 4 checkpoints");
    if (!probe_scores.allFinite() || !pass1.allFinite() || !steps.allFinite())
        throw Error("residual regression inputs must be finite");
    if ((steps.array() == steps(0)).all()) throw Error("training steps are constant");

    const LineFit probe_on_step = fit_line(steps, probe_scores);
    const LineFit pass_on_step = fit_line(steps, pass1);
    const Eigen::VectorXd probe_resid =
        probe_scores.array() - probe_on_step.intercept - probe_on_step.slope * steps.array();
    const Eigen::VectorXd pass_resid =
        pass1.array() - pass_on_step.intercept - pass_on_step.slope * steps.array();

    const double scale = std::max(probe_scores.norm(), std::numeric_limits<double>::min());
    if (probe_resid.norm() <= 1e-10 * scale) throw Error("no residual variance in probe scores");

    const LineFit fit = fit_line(probe_resid, pass_resid);
    ResidualRegressionReport report;
    report.n = static_cast<std::size_t>(n);
    report.beta = fit.slope;
    report.intercept = fit.intercept;
    const double dof = static_cast<double>(n - 2);
    report.stderr_beta = std::sqrt(fit.ss_res / dof / fit.sxx);
    report.t_stat = report.beta / report.stderr_beta;
    report.p_value = student_t_two_sided_p(report.t_stat, dof);
    return report;
}

std::string format_residual(const ResidualRegressionReport& report) {
    std::string beta = format_fixed(report.beta, 2);
    if (beta.front() != '-') beta.insert(beta.begin(), '+');
    const std::string p = report.p_value < 0.001 ? "p<0.001" : "p=" + format_fixed(report.p_value, 3);
    return "β=" + typographic_minus(beta) + ", " + p;
}

std::string residual_report_json(const ResidualRegressionReport& report) {
    const nlohmann::ordered_json j{{"beta", report.beta},
                                   {"stderr", report.stderr_beta},
                                   {"t_stat", report.t_stat},
                                   {"p_value", report.p_value},
                                   {"n", report.n},
                                   {"intercept", report.intercept},
                                   {"summary", format_residual(report)}};
    return j.dump(2) + "\n";
}

ResidualRegressionReport parse_residual_report_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        ResidualRegressionReport r;
        r.beta = j.at("beta").get<double>();
        r.stderr_beta = j.at("stderr").get<double>();
        r.t_stat = j.at("t_stat").get<double>();
        r.p_value = j.at("p_value").get<double>();
        r.n = j.at("n").get<std::size_t>();
        r.intercept = j.value("intercept", 0.0);
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed residual report JSON: ") + e.what());
    }
}

PeakReport peak_report(const std::map<int, double>& pass1) {
    if (pass1.empty()) throw Error("pass@1 series is empty");
    PeakReport report;
    report.baseline = pass1.begin()->second;
    report.peak = report.baseline;
    report.peak_step = pass1.begin()->first;
    for (const auto& [step, value] : pass1) {
        if (value > report.peak) {
            report.peak = value;
            report.peak_step = step;
        }
        report.last_step = step;
    }
    return report;
}

std::string format_peak(const PeakReport& report) {
    return format_fixed(100.0 * report.baseline, 1) + " / " + format_fixed(100.0 * report.peak, 1) +
           " / step " + std::to_string(report.peak_step);
}

std::string peak_report_json(const PeakReport& report) {
    const nlohmann::ordered_json j{{"baseline", report.baseline},
                                   {"peak", report.peak},
                                   {"peak_step", report.peak_step},
                                   {"last_step", report.last_step},
                                   {"summary", format_peak(report)}};
    return j.dump(2) + "\n";
}

void write_heatmap_csv(const TrackMatrix& scores, const TrackMatrix& change, std::ostream& out) {
    auto cell = [](double v) { return std::isnan(v) ? std::string{} : format_double(v); };
    out << "step,layer,position,score,rel_change\n";
    for (std::size_t s = 0; s < scores.steps.size(); ++s)
        for (std::size_t l = 0; l < scores.layers.size(); ++l)
            for (std::size_t p = 0; p < scores.positions.size(); ++p) {
                const auto li = static_cast<Eigen::Index>(l);
                const auto pi = static_cast<Eigen::Index>(p);
                out << scores.steps[s] << ',' << scores.layers[l] << ',' << scores.positions[p] << ','
                    << cell(scores.scores[s](li, pi)) << ',' << cell(change.scores[s](li, pi)) << '\n';
            }
}

std::map<int, double> read_step_series_csv(std::istream& in, const std::string& value_column) {
    std::map<int, double> series;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header) {
            if (line != "step," + value_column)
                throw FormatError("CSV header must be 'step," + value_column + "'");
            header = true;
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 2) throw FormatError("CSV row needs 2 fields: '" + line + "'");
        const auto step = static_cast<int>(parse_int(fields[0], "step"));
        if (!series.emplace(step, parse_double(fields[1], value_column)).second)
            throw FormatError("duplicate step " + fields[0]);
    }
    if (!header) throw FormatError("step CSV is empty");
    return series;
}

std::map<int, double> load_step_series_csv(const std::filesystem::path& path, const std::string& value_column) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return read_step_series_csv(in, value_column);
}

void write_step_series_csv(const std::map<int, double>& series, const std::string& value_column,
                           std::ostream& out) {
    out << "step," << value_column << '\n';
    for (const auto& [step, value] : series) out << step << ',' << format_double(value) << '\n';
}

}  // namespace diffprobe
