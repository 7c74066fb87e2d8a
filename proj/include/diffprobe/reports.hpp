#pragma once

// Cross-model summaries of probe sweeps: top-k rows per dataset, where the
// best cells sit along the position axis, and base-vs-specialised deltas.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "diffprobe/probe.hpp"
#include "diffprobe/scaling.hpp"

namespace diffprobe {

struct TopRow {
    std::string dataset;
    std::size_t rank = 0;  // 1-based within dataset
    std::string model_id;
    double score = 0.0;
    int layer = 0;
    int position = -1;
};

struct PositionShare {
    int position = -1;
    std::size_t count = 0;
    double percent = 0.0;
};

struct ModelPair {
    std::string base;
    std::string specialised;
};

struct PairDelta {
    std::string dataset;
    std::string base;
    std::string specialised;
    double base_score = 0.0;
    double specialised_score = 0.0;
    double delta = 0.0;  // specialised - base
};

struct GridReports {
    std::vector<TopRow> top;
    std::map<std::string, std::vector<PositionShare>> position_histogram;  // per dataset
    std::vector<PairDelta> deltas;
    std::map<std::string, std::vector<ScalingPoint>> scaling_points;       // per dataset
};

/// Grids without any scored cell are ignored. Scaling points are emitted for
/// models present in `model_sizes`. Throws if a pair names a model with no
/// grid, or if its two models share no dataset.
GridReports grid_reports(const std::vector<ProbeGrid>& grids,
                         const std::map<std::string, double>& model_sizes,
                         const std::vector<ModelPair>& pairs = {}, std::size_t top_k = 3);

/// "0.8842, layer 38, pos −1"
std::string format_top_row(const TopRow& row);

/// "Qwen-Coder-Instruct-7B: +0.04"
std::string format_delta(const PairDelta& delta);

void write_top_csv(const GridReports& reports, std::ostream& out);
void write_histogram_csv(const GridReports& reports, std::ostream& out);
void write_deltas_csv(const GridReports& reports, std::ostream& out);
std::string reports_json(const GridReports& reports);

}  // namespace diffprobe
