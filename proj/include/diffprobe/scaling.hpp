#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace diffprobe {

struct ScalingPoint {
    std::string model_id;
    double n_params = 0.0;  // parameter count, > 0
    double perf = 0.0;      // best mean CV score for the model
};

/// 1 - perf = C * N^(-alpha), fitted by OLS in log-log space.
struct ScalingFit {
    double C = 1.0;
    double alpha = 0.0;
    double r2_log = 1.0;
    std::size_t n_points = 0;
    double epsilon = 1e-6;
};

/// Gaps 1 - perf are clipped below at `epsilon` before taking logs.
/// Needs at least 3 points and 2 distinct sizes; throws if every gap is clipped.
ScalingFit fit_power_law(const std::vector<ScalingPoint>& points, double epsilon = 1e-6);

/// 1 - C * N^(-alpha), never above 1.
double predict_perf(const ScalingFit& fit, double n_params);

// Points CSV: model_id,n_params,perf
std::vector<ScalingPoint> read_scaling_points_csv(std::istream& in);
std::vector<ScalingPoint> load_scaling_points_csv(const std::filesystem::path& path);
void write_scaling_points_csv(const std::vector<ScalingPoint>& points, std::ostream& out);

std::string scaling_fit_json(const ScalingFit& fit);

/// Plot data: kind,n_params,perf,fitted. "point" rows carry observations,
/// "curve" rows carry `samples` log-spaced evaluations of the fit.
void write_scaling_plot_csv(const ScalingFit& fit, const std::vector<ScalingPoint>& points,
                            std::ostream& out, std::size_t samples = 50);

}  // namespace diffprobe
