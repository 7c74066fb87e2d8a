#include "diffprobe/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include <Eigen/Core>
#include <json.hpp>

#include "diffprobe/error.hpp"
#include "diffprobe/io.hpp"
#include "diffprobe/stats.hpp"

namespace diffprobe {

ScalingFit fit_power_law(const std::vector<ScalingPoint>& points, double epsilon) {
    if (points.size() < 3)
        throw Error("insufficient points: power-law fit needs at least 3, got " +
                    std::to_string(points.size()));
    if (!(epsilon > 0.0) || epsilon >= 1.0) throw Error("epsilon must lie in (0, 1)");
    std::set<double> sizes;
    const auto n = static_cast<Eigen::Index>(points.size());
    Eigen::VectorXd log_n(n), log_gap(n);
    bool any_unclipped = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& p = points[static_cast<std::size_t>(i)];
        if (!(p.n_params > 0.0) || !std::isfinite(p.n_params))
            throw Error("model '" + p.model_id + "' has non-positive parameter count");
        if (!std::isfinite(p.perf)) throw Error("model '" + p.model_id + "' has non-finite perf");
        sizes.insert(p.n_params);
        const double gap = 1.0 - p.perf;
        if (gap > epsilon) any_unclipped = true;
        log_n(i) = std::log(p.n_params);
        log_gap(i) = std::log(std::max(gap, epsilon));
    }
    if (sizes.size() < 2) throw Error("insufficient points: need at least 2 distinct model sizes");
    if (!any_unclipped) throw Error("degenerate: all performances at ceiling");

    const LineFit line = fit_line(log_n, log_gap);
    ScalingFit fit;
    fit.alpha = -line.slope;
    fit.C = std::exp(line.intercept);
    fit.r2_log = line.ss_tot > 0.0 ? 1.0 - line.ss_res / line.ss_tot : 1.0;
    fit.n_points = points.size();
    fit.epsilon = epsilon;
    return fit;
}

double predict_perf(const ScalingFit& fit, double n_params) {
    if (!(n_params > 0.0)) throw Error("parameter count must be positive");
    return std::min(1.0, 1.0 - fit.C * std::pow(n_params, -fit.alpha));
}

std::vector<ScalingPoint> read_scaling_points_csv(std::istream& in) {
    std::vector<ScalingPoint> points;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header) {
            if (line != "model_id,n_params,perf")
                throw FormatError("scaling CSV header must be 'model_id,n_params,perf'");
            header = true;
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 3) throw FormatError("scaling CSV row needs 3 fields: '" + line + "'");
        points.push_back({fields[0], parse_double(fields[1], "n_params"), parse_double(fields[2], "perf")});
    }
    if (!header) throw FormatError("scaling CSV is empty");
    return points;
}

std::vector<ScalingPoint> load_scaling_points_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return read_scaling_points_csv(in);
}

void write_scaling_points_csv(const std::vector<ScalingPoint>& points, std::ostream& out) {
    out << "model_id,n_params,perf\n";
    for (const auto& p : points)
        out << p.model_id << ',' << format_double(p.n_params) << ',' << format_double(p.perf) << '\n';
}

std::string scaling_fit_json(const ScalingFit& fit) {
    const nlohmann::ordered_json j{{"C", fit.C},
                                   {"alpha", fit.alpha},
                                   {"r2_log", fit.r2_log},
                                   {"n_points", fit.n_points},
                                   {"epsilon", fit.epsilon}};
    return j.dump(2) + "\n";
}

void write_scaling_plot_csv(const ScalingFit& fit, const std::vector<ScalingPoint>& points,
                            std::ostream& out, std::size_t samples) {
    out << "kind,n_params,perf,fitted\n";
    double lo = points.front().n_params;
    double hi = lo;
    for (const auto& p : points) {
        out << "point," << format_double(p.n_params) << ',' << format_double(p.perf) << ','
            << format_double(predict_perf(fit, p.n_params)) << '\n';
        lo = std::min(lo, p.n_params);
        hi = std::max(hi, p.n_params);
    }
    const double log_lo = std::log(lo);
    const double log_hi = std::log(hi);
    for (std::size_t s = 0; s < samples; ++s) {
        const double t = samples > 1 ? static_cast<double>(s) / static_cast<double>(samples - 1) : 0.0;
        const double n_params = std::exp(log_lo + t * (log_hi - log_lo));
        out << "curve," << format_double(n_params) << ",," << format_double(predict_perf(fit, n_params))
            << '\n';
    }
}

}  // namespace diffprobe
