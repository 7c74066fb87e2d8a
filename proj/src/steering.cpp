#include "diffprobe/steering.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include <json.hpp>

#include "diffprobe/error.hpp"
#include "diffprobe/io.hpp"
#include "diffprobe/stats.hpp"

namespace diffprobe {

SteeringVector build_steering_vector(const ProbeWeights& probe, const FeatureMatrix& training,
                                     std::string model_id, std::string dataset_name) {
    if (training.cols() != probe.dim())
        throw Error("probe has " + std::to_string(probe.dim()) + " weights but activations have " +
                    std::to_string(training.cols()) + " columns");
    const Eigen::VectorXd raw = probe.raw_direction();
    const double norm = raw.norm();
    if (!(norm > 0.0)) throw Error("probe has no direction");

    SteeringVector v;
    v.model_id = std::move(model_id);
    v.layer = probe.layer;
    v.direction = raw / norm;
    v.projection_scale = population_std(training.values * v.direction);
    if (!(v.projection_scale > 0.0))
        throw Error("activations have zero spread along the probe direction");
    v.source_probe = {probe.layer, probe.position, probe.ridge_lambda, std::move(dataset_name)};
    return v;
}

Eigen::VectorXd steering_offset(const SteeringVector& v, double alpha) {
    return alpha * (v.projection_scale * v.direction);
}

std::vector<double> default_alpha_grid() { return {-3, -2, -1, 0, 1, 2, 3}; }

std::string steering_vector_json(const SteeringVector& v) {
    const nlohmann::ordered_json j{
        {"model_id", v.model_id},
        {"layer", v.layer},
        {"sigma", v.projection_scale},
        {"direction", std::vector<double>(v.direction.data(), v.direction.data() + v.direction.size())},
        {"source_probe",
         {{"layer", v.source_probe.layer},
          {"position", v.source_probe.position},
          {"lambda", v.source_probe.lambda},
          {"dataset_name", v.source_probe.dataset_name}}}};
    return j.dump() + "\n";
}

SteeringVector parse_steering_vector_json(const std::string& text) {
    try {
        const auto j = nlohmann::json::parse(text);
        SteeringVector v;
        v.model_id = j.at("model_id").get<std::string>();
        v.layer = j.at("layer").get<int>();
        v.projection_scale = j.at("sigma").get<double>();
        const auto dir = j.at("direction").get<std::vector<double>>();
        v.direction = Eigen::Map<const Eigen::VectorXd>(dir.data(), static_cast<Eigen::Index>(dir.size()));
        const auto& src = j.at("source_probe");
        v.source_probe = {src.at("layer").get<int>(), src.at("position").get<int>(),
                          src.at("lambda").get<double>(), src.at("dataset_name").get<std::string>()};
        if (std::abs(v.direction.norm() - 1.0) > 1e-9) throw FormatError("steering direction is not unit length");
        if (!(v.projection_scale > 0.0)) throw FormatError("steering sigma must be positive");
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed steering vector JSON: ") + e.what());
    }
}

std::size_t DifficultyBins::bin_of(double value) const noexcept {
    std::size_t bin = 0;
    for (std::size_t e = 1; e + 1 < edges.size(); ++e)
        if (value > edges[e]) bin = e;
    return bin;
}

DifficultyBins predicted_difficulty_bins(const std::vector<double>& predictions, std::size_t n_bins) {
    if (n_bins == 0) throw Error("need at least one difficulty bin");
    if (predictions.size() < n_bins)
        throw Error("need at least " + std::to_string(n_bins) + " predictions to form bins");
    for (double p : predictions)
        if (!std::isfinite(p)) throw Error("non-finite predicted difficulty");
    std::vector<double> sorted = predictions;
    std::sort(sorted.begin(), sorted.end());
    const auto distinct = static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    if (distinct < n_bins)
        throw Error("fewer distinct predicted difficulties (" + std::to_string(distinct) + ") than bins (" +
                    std::to_string(n_bins) + ")");
    sorted = predictions;
    std::sort(sorted.begin(), sorted.end());

    const std::size_t n = sorted.size();
    DifficultyBins bins;
    bins.edges.push_back(sorted.front());
    for (std::size_t b = 1; b < n_bins; ++b) {
        const std::size_t first = (b * n + n_bins - 1) / n_bins;  // first rank in bin b
        bins.edges.push_back(0.5 * (sorted[first - 1] + sorted[first]));
    }
    bins.edges.push_back(sorted.back());
    if (n_bins == 3) {
        bins.labels = {"easy", "medium", "hard"};
    } else {
        for (std::size_t b = 0; b < n_bins; ++b) bins.labels.push_back("bin" + std::to_string(b + 1));
    }
    bins.assignment.reserve(n);
    for (double p : predictions) bins.assignment.push_back(bins.bin_of(p));
    return bins;
}

std::vector<GenerationRecord> read_generation_records(std::istream& in) {
    std::vector<GenerationRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            GenerationRecord r;
            r.problem_id = j.at("problem_id").get<std::string>();
            r.alpha = j.at("alpha").get<double>();
            r.response_text = j.value("response_text", std::string{});
            if (j.contains("parsed_answer") && !j.at("parsed_answer").is_null())
                r.parsed_answer = j.at("parsed_answer").get<std::string>();
            if (j.contains("is_correct") && !j.at("is_correct").is_null())
                r.is_correct = j.at("is_correct").get<bool>();
            const auto tokens = j.at("response_tokens").get<std::int64_t>();
            if (tokens < 0) throw FormatError("negative response_tokens");
            r.response_tokens = static_cast<std::size_t>(tokens);
            r.predicted_difficulty = j.at("predicted_difficulty").get<double>();
            records.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw FormatError("generation record line " + std::to_string(line_no) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("generation record line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

void write_generation_records(const std::vector<GenerationRecord>& records, std::ostream& out) {
    for (const auto& r : records) {
        nlohmann::ordered_json j{{"problem_id", r.problem_id},
                                 {"alpha", r.alpha},
                                 {"response_text", r.response_text},
                                 {"parsed_answer", nullptr},
                                 {"is_correct", nullptr},
                                 {"response_tokens", r.response_tokens},
                                 {"predicted_difficulty", r.predicted_difficulty}};
        if (r.parsed_answer) j["parsed_answer"] = *r.parsed_answer;
        if (r.is_correct) j["is_correct"] = *r.is_correct;
        out << j.dump() << '\n';
    }
}

std::size_t count_code_blocks(std::string_view text) {
    std::size_t opened = 0;
    bool inside = false;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        if (text.substr(start, end - start).starts_with("```")) {
            if (!inside) ++opened;
            inside = !inside;
        }
        start = end + 1;
    }
    return opened;
}

SteeringReport summarize_runs(const std::vector<GenerationRecord>& records, const DifficultyBins& bins,
                              const std::vector<double>& alpha_grid, std::size_t length_bucket_width) {
    if (records.empty()) throw Error("no generation records to summarize");
    if (length_bucket_width == 0) throw Error("length bucket width must be positive");
    const std::set<double> grid(alpha_grid.begin(), alpha_grid.end());

    SteeringReport report;
    report.bin_labels = bins.labels;
    report.length_bucket_width = length_bucket_width;
    for (const auto& r : records) {
        if (!grid.contains(r.alpha))
            throw Error("record for '" + r.problem_id + "' has alpha " + format_double(r.alpha) +
                        " outside the configured grid");
        auto& tallies = report.pass1_by_alpha_and_bin[r.alpha];
        tallies.resize(bins.n_bins());
        auto& tally = tallies[bins.bin_of(r.predicted_difficulty)];
        ++tally.n;
        if (r.counts_correct()) ++tally.correct;
        ++report.length_histograms[r.alpha]
              [(r.response_tokens / length_bucket_width) * length_bucket_width];
        ++report.code_block_counts[r.alpha][count_code_blocks(r.response_text)];
    }
    return report;
}

void write_pass1_csv(const SteeringReport& report, std::ostream& out) {
    out << "alpha,bin,label,n,correct,pass1\n";
    for (const auto& [alpha, tallies] : report.pass1_by_alpha_and_bin)
        for (std::size_t b = 0; b < tallies.size(); ++b)
            out << format_double(alpha) << ',' << b << ',' << report.bin_labels[b] << ',' << tallies[b].n
                << ',' << tallies[b].correct << ','
                << (tallies[b].n ? format_double(tallies[b].pass1()) : std::string{}) << '\n';
}

void write_length_csv(const SteeringReport& report, std::ostream& out) {
    out << "alpha,bucket_start,count\n";
    for (const auto& [alpha, histogram] : report.length_histograms)
        for (const auto& [bucket, count] : histogram)
            out << format_double(alpha) << ',' << bucket << ',' << count << '\n';
}

void write_code_block_csv(const SteeringReport& report, std::ostream& out) {
    out << "alpha,code_blocks,count\n";
    for (const auto& [alpha, histogram] : report.code_block_counts)
        for (const auto& [blocks, count] : histogram)
            out << format_double(alpha) << ',' << blocks << ',' << count << '\n';
}

std::string steering_report_json(const SteeringReport& report, const DifficultyBins& bins) {
    using nlohmann::ordered_json;
    ordered_json pass1 = ordered_json::array();
    for (const auto& [alpha, tallies] : report.pass1_by_alpha_and_bin)
        for (std::size_t b = 0; b < tallies.size(); ++b) {
            ordered_json row{{"alpha", alpha},
                             {"bin", report.bin_labels[b]},
                             {"n", tallies[b].n},
                             {"correct", tallies[b].correct},
                             {"pass1", nullptr}};
            if (tallies[b].n) row["pass1"] = tallies[b].pass1();
            pass1.push_back(row);
        }
    auto histograms = [](const auto& by_alpha, const char* key) {
        ordered_json rows = ordered_json::array();
        for (const auto& [alpha, histogram] : by_alpha)
            for (const auto& [bucket, count] : histogram)
                rows.push_back({{"alpha", alpha}, {key, bucket}, {"count", count}});
        return rows;
    };
    const ordered_json j{{"bin_edges", bins.edges},
                         {"bin_labels", report.bin_labels},
                         {"length_bucket_width", report.length_bucket_width},
                         {"pass1", pass1},
                         {"length_histogram", histograms(report.length_histograms, "bucket_start")},
                         {"code_block_histogram", histograms(report.code_block_counts, "code_blocks")}};
    return j.dump(2) + "\n";
}

}  // namespace diffprobe
