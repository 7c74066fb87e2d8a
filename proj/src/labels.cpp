#include "diffprobe/labels.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "diffprobe/error.hpp"
#include "diffprobe/io.hpp"

namespace diffprobe {

std::string_view to_string(LabelSource source) noexcept {
    return source == LabelSource::human ? "human" : "llm";
}

LabelSource parse_label_source(std::string_view text) {
    if (text == "human") return LabelSource::human;
    if (text == "llm") return LabelSource::llm;
    throw Error("label source must be 'human' or 'llm', got '" + std::string(text) + "'");
}

void validate(const DifficultyLabels& labels) {
    std::set<double> distinct;
    for (const auto& [id, rating] : labels.ratings) {
        if (!std::isfinite(rating)) throw Error("non-finite rating for problem '" + id + "'");
        distinct.insert(rating);
    }
    if (distinct.size() < 2)
        throw Error("difficulty labels need at least 2 distinct ratings");
}

Eigen::VectorXd label_vector(const DifficultyLabels& labels,
                             const std::vector<std::string>& problem_ids) {
    Eigen::VectorXd y(static_cast<Eigen::Index>(problem_ids.size()));
    std::string missing;
    std::size_t n_missing = 0;
    for (std::size_t i = 0; i < problem_ids.size(); ++i) {
        const auto it = labels.ratings.find(problem_ids[i]);
        if (it == labels.ratings.end()) {
            if (n_missing++) missing += ", ";
            missing += problem_ids[i];
            continue;
        }
        y(static_cast<Eigen::Index>(i)) = it->second;
    }
    if (n_missing)
        throw Error("labels missing for " + std::to_string(n_missing) + " problem(s): " + missing);
    return y;
}

DifficultyLabels read_labels_csv(std::istream& in, std::string dataset_name) {
    DifficultyLabels labels;
    labels.dataset_name = std::move(dataset_name);
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    bool have_source = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!have_header) {
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            if (line != "problem_id,rating,source")
                throw FormatError("labels CSV header must be 'problem_id,rating,source'");
            have_header = true;
            continue;
        }
        const auto fields = split_csv_line(line);
        if (fields.size() != 3)
            throw FormatError("labels CSV line " + std::to_string(line_no) + ": expected 3 fields");
        const LabelSource source = parse_label_source(fields[2]);
        if (have_source && source != labels.source)
            throw FormatError("labels CSV mixes sources (line " + std::to_string(line_no) + ")");
        labels.source = source;
        have_source = true;
        const double rating = parse_double(fields[1], "rating");
        if (!labels.ratings.emplace(fields[0], rating).second)
            throw FormatError("duplicate problem id '" + fields[0] + "' in labels CSV");
    }
    if (!have_header) throw FormatError("labels CSV is empty");
    validate(labels);
    return labels;
}

DifficultyLabels load_labels_csv(const std::filesystem::path& path, std::string dataset_name) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    if (dataset_name.empty()) dataset_name = path.stem().string();
    return read_labels_csv(in, std::move(dataset_name));
}

void write_labels_csv(const DifficultyLabels& labels, std::ostream& out) {
    out << "problem_id,rating,source\n";
    for (const auto& [id, rating] : labels.ratings) {
        if (id.find(',') != std::string::npos)
            throw Error("problem id '" + id + "' contains a comma");
        out << id << ',' << format_double(rating) << ',' << to_string(labels.source) << '\n';
    }
}

}  // namespace diffprobe
