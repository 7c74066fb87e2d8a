#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "diffprobe/activation_store.hpp"
#include "diffprobe/labels.hpp"

namespace diffprobe {

/// A standardized ridge probe for one (layer, position) cell.
///
/// predict(x) = bias + sum_j weights[j] * (x[j] - feature_means[j]) / feature_scales[j]
struct ProbeWeights {
    int layer = 0;
    int position = -1;
    Eigen::VectorXd weights;
    double bias = 0.0;
    Eigen::VectorXd feature_means;
    Eigen::VectorXd feature_scales;  // > 0; zero-variance columns get 1 and weight 0
    double ridge_lambda = 1.0;

    Eigen::Index dim() const noexcept { return weights.size(); }

    /// Gradient of the probe in raw activation units.
    Eigen::VectorXd raw_direction() const { return weights.cwiseQuotient(feature_scales); }
};

/// Fits ridge regression on per-column standardized features.
///
/// Columns are centered and divided by their population standard deviation
/// over the training rows. The intercept is the training label mean and is
/// not penalized. Uses the primal normal equations when d <= n and the dual
/// (kernel) form otherwise; both solve the same system.
ProbeWeights fit_ridge(const Eigen::Ref<const Eigen::MatrixXd>& X,
                       const Eigen::Ref<const Eigen::VectorXd>& y, double lambda);

inline ProbeWeights fit_ridge(const FeatureMatrix& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                              double lambda) {
    return fit_ridge(X.values, y, lambda);
}

Eigen::VectorXd predict(const ProbeWeights& probe, const Eigen::Ref<const Eigen::MatrixXd>& X);

struct CvScore {
    std::vector<double> fold_scores;
    double mean_score = 0.0;
    std::uint64_t seed = 0;

    friend bool operator==(const CvScore&, const CvScore&) = default;
};

/// Row indices of each fold after a seeded shuffle. The first n % k folds
/// receive one extra row.
std::vector<std::vector<Eigen::Index>> make_folds(Eigen::Index n, std::size_t k, std::uint64_t seed);

/// k-fold cross-validated Spearman correlation of ridge predictions.
/// Throws if any fold cannot be scored (e.g. constant validation labels).
CvScore cross_validate(const Eigen::Ref<const Eigen::MatrixXd>& X,
                       const Eigen::Ref<const Eigen::VectorXd>& y, std::size_t k,
                       std::uint64_t seed, double lambda);

inline CvScore cross_validate(const FeatureMatrix& X, const Eigen::Ref<const Eigen::VectorXd>& y,
                              std::size_t k, std::uint64_t seed, double lambda) {
    return cross_validate(X.values, y, k, seed, lambda);
}

/// (layer, position) grid coordinate. Ordered by layer ascending, then by
/// position nearest -1 first, which is also the tie-break preference.
struct CellKey {
    int layer = 0;
    int position = -1;

    friend bool operator==(const CellKey&, const CellKey&) = default;
    friend bool operator<(const CellKey& a, const CellKey& b) noexcept {
        if (a.layer != b.layer) return a.layer < b.layer;
        return a.position > b.position;
    }
};

struct CellResult {
    std::optional<CvScore> score;  // empty when the cell failed
    std::string failure;

    friend bool operator==(const CellResult&, const CellResult&) = default;
};

struct BestCell {
    CellKey cell;
    double mean_score = 0.0;

    friend bool operator==(const BestCell&, const BestCell&) = default;
};

struct ProbeGrid {
    std::string model_id;
    std::string dataset_name;
    std::map<CellKey, CellResult> cells;
    std::optional<BestCell> best;
    std::map<CellKey, ProbeWeights> refit_weights;
};

/// Argmax of mean_score over scored cells; ties go to the smaller layer,
/// then to the position nearer -1. Empty when no cell was scored.
std::optional<BestCell> select_best(const std::map<CellKey, CellResult>& cells);

struct SweepConfig {
    std::size_t k = 5;
    std::uint64_t seed = 0;
    double lambda = 1.0;
    std::size_t threads = 1;  // 0 = hardware concurrency
};

/// Fold-shuffle seed for one cell; independent of evaluation order.
std::uint64_t cell_seed(std::uint64_t seed, int layer, int position) noexcept;

ProbeGrid sweep_grid(const ActivationSet& set, const DifficultyLabels& labels,
                     const SweepConfig& config);

// Grid CSV: layer,position,fold1..foldk,mean (failed cells leave score fields empty).
void write_grid_csv(const ProbeGrid& grid, std::ostream& out);
ProbeGrid read_grid_csv(std::istream& in, std::string model_id, std::string dataset_name);
ProbeGrid load_grid_csv(const std::filesystem::path& path, std::string model_id,
                        std::string dataset_name);

// Weights JSON: array of {layer, position, lambda, bias, means, scales, weights}.
std::string weights_json(const std::map<CellKey, ProbeWeights>& weights);
std::map<CellKey, ProbeWeights> parse_weights_json(const std::string& text);

}  // namespace diffprobe
