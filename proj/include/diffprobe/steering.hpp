#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "diffprobe/activation_store.hpp"
#include "diffprobe/probe.hpp"

namespace diffprobe {

struct SourceProbe {
    int layer = 0;
    int position = -1;
    double lambda = 1.0;
    std::string dataset_name;

    friend bool operator==(const SourceProbe&, const SourceProbe&) = default;
};

/// Unit direction in raw activation space plus the spread of training
/// projections along it. Positive coefficients push toward "harder".
struct SteeringVector {
    std::string model_id;
    int layer = 0;
    Eigen::VectorXd direction;
    double projection_scale = 1.0;  // sigma
    SourceProbe source_probe;
};

/// `training` must be the slice the probe was fitted on.
SteeringVector build_steering_vector(const ProbeWeights& probe, const FeatureMatrix& training,
                                     std::string model_id = {}, std::string dataset_name = {});

/// alpha * sigma * direction: the residual-stream offset at `v.layer`.
Eigen::VectorXd steering_offset(const SteeringVector& v, double alpha);

/// Default coefficient grid: -3, -2, ..., +3.
std::vector<double> default_alpha_grid();

std::string steering_vector_json(const SteeringVector& v);
SteeringVector parse_steering_vector_json(const std::string& text);

/// Equal-count quantile bins over predicted difficulty.
struct DifficultyBins {
    std::vector<double> edges;  // n_bins + 1: min, interior midpoints, max
    std::vector<std::size_t> assignment;
    std::vector<std::string> labels;  // easy/medium/hard when n_bins == 3

    std::size_t n_bins() const noexcept { return labels.size(); }
    /// Bin whose interior edges bracket `value`; values equal to an edge go low.
    std::size_t bin_of(double value) const noexcept;
};

DifficultyBins predicted_difficulty_bins(const std::vector<double>& predictions, std::size_t n_bins = 3);

struct GenerationRecord {
    std::string problem_id;
    double alpha = 0.0;
    std::string response_text;
    std::optional<std::string> parsed_answer;
    std::optional<bool> is_correct;
    std::size_t response_tokens = 0;
    double predicted_difficulty = 0.0;

    /// Records without a parsed answer never count as correct.
    bool counts_correct() const noexcept { return parsed_answer.has_value() && is_correct.value_or(false); }
};

std::vector<GenerationRecord> read_generation_records(std::istream& in);
void write_generation_records(const std::vector<GenerationRecord>& records, std::ostream& out);

/// Blocks opened by lines starting with ``` (language tag optional);
/// the next such line closes the block.
std::size_t count_code_blocks(std::string_view text);

struct BinTally {
    std::size_t n = 0;
    std::size_t correct = 0;
    double pass1() const noexcept { return n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0; }
};

struct SteeringReport {
    std::vector<std::string> bin_labels;
    std::map<double, std::vector<BinTally>> pass1_by_alpha_and_bin;
    std::map<double, std::map<std::size_t, std::size_t>> length_histograms;   // bucket start -> count
    std::map<double, std::map<std::size_t, std::size_t>> code_block_counts;   // blocks -> records
    std::size_t length_bucket_width = 250;
};

SteeringReport summarize_runs(const std::vector<GenerationRecord>& records, const DifficultyBins& bins,
                              const std::vector<double>& alpha_grid,
                              std::size_t length_bucket_width = 250);

void write_pass1_csv(const SteeringReport& report, std::ostream& out);
void write_length_csv(const SteeringReport& report, std::ostream& out);
void write_code_block_csv(const SteeringReport& report, std::ostream& out);
std::string steering_report_json(const SteeringReport& report, const DifficultyBins& bins);

}  // namespace diffprobe
