#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "diffprobe/probe.hpp"

namespace diffprobe {

/// Probe grids and test accuracy for a sequence of training checkpoints.
struct CheckpointSeries {
    std::vector<int> steps;                                   // strictly increasing
    std::map<int, std::map<std::string, ProbeGrid>> grids;    // step -> dataset -> grid
    std::map<int, double> pass1;                              // step -> accuracy in [0, 1]
};

void validate(const CheckpointSeries& series);

/// Mean CV scores per step as [layers x positions] matrices; NaN marks a
/// missing or failed cell.
struct TrackMatrix {
    std::string dataset_name;
    std::vector<int> steps;
    std::vector<int> layers;
    std::vector<int> positions;
    std::vector<Eigen::MatrixXd> scores;  // one per step
};

TrackMatrix build_track_matrix(const CheckpointSeries& series, const std::string& dataset,
                               const std::vector<int>& positions);

/// (score - score at first step) / |score at first step|; zero or missing
/// baselines give NaN.
TrackMatrix relative_change(const TrackMatrix& matrix);

/// Best-cell mean score at each step.
Eigen::VectorXd best_score_series(const CheckpointSeries& series, const std::string& dataset);

/// Mean score of one fixed cell at each step.
Eigen::VectorXd cell_score_series(const CheckpointSeries& series, const std::string& dataset, CellKey cell);

Eigen::VectorXd pass1_series(const CheckpointSeries& series);

struct ResidualRegressionReport {
    double beta = 0.0;
    double intercept = 0.0;  // of the residual-on-residual fit; ~0 by construction
    double stderr_beta = 0.0;
    double t_stat = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
};

/// Removes the linear effect of `steps` from both series, then regresses the
/// pass@1 residuals on the probe-score residuals. Two-sided p from Student's
/// t with n - 2 degrees of freedom.
ResidualRegressionReport residual_slope(const Eigen::Ref<const Eigen::VectorXd>& probe_scores,
                                        const Eigen::Ref<const Eigen::VectorXd>& pass1,
                                        const Eigen::Ref<const Eigen::VectorXd>& steps);

/// "β=+6.66, p<0.001"
std::string format_residual(const ResidualRegressionReport& report);
std::string residual_report_json(const ResidualRegressionReport& report);
ResidualRegressionReport parse_residual_report_json(const std::string& text);

struct PeakReport {
    double baseline = 0.0;
    double peak = 0.0;
    int peak_step = 0;
    int last_step = 0;
};

/// Baseline is the first step's accuracy; ties at the peak go to the earliest step.
PeakReport peak_report(const std::map<int, double>& pass1);
inline PeakReport peak_report(const CheckpointSeries& series) { return peak_report(series.pass1); }

/// "64.7 / 76.2 / step 43"
std::string format_peak(const PeakReport& report);
std::string peak_report_json(const PeakReport& report);

/// step,layer,position,score,rel_change
void write_heatmap_csv(const TrackMatrix& scores, const TrackMatrix& change, std::ostream& out);

/// `step,pass1` (also accepts `step,score` for probe-score series via `value_column`).
std::map<int, double> read_step_series_csv(std::istream& in, const std::string& value_column);
std::map<int, double> load_step_series_csv(const std::filesystem::path& path, const std::string& value_column);
void write_step_series_csv(const std::map<int, double>& series, const std::string& value_column,
                           std::ostream& out);

}  // namespace diffprobe
