#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace diffprobe {

enum class LabelSource { human, llm };

std::string_view to_string(LabelSource source) noexcept;
LabelSource parse_label_source(std::string_view text);

/// Ground-truth difficulty (IRT scale, higher = harder) keyed by problem id.
struct DifficultyLabels {
    std::map<std::string, double> ratings;
    LabelSource source = LabelSource::human;
    std::string dataset_name;
};

/// Finite ratings with at least two distinct values.
void validate(const DifficultyLabels& labels);

/// Ratings ordered like `problem_ids`; throws listing every missing id.
Eigen::VectorXd label_vector(const DifficultyLabels& labels,
                             const std::vector<std::string>& problem_ids);

/// CSV with header `problem_id,rating,source`.
DifficultyLabels read_labels_csv(std::istream& in, std::string dataset_name);
DifficultyLabels load_labels_csv(const std::filesystem::path& path, std::string dataset_name = {});
void write_labels_csv(const DifficultyLabels& labels, std::ostream& out);

}  // namespace diffprobe
