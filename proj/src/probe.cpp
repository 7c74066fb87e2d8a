#include "diffprobe/probe.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

#include <Eigen/Cholesky>
#include <json.hpp>

#include "diffprobe/error.hpp"
#include "diffprobe/io.hpp"
#include "diffprobe/parallel.hpp"
#include "diffprobe/rng.hpp"
#include "diffprobe/stats.hpp"

namespace diffprobe {

ProbeWeights fit_ridge(const Eigen::Ref<const Eigen::MatrixXd>& X,
                       const Eigen::Ref<const Eigen::VectorXd>& y, double lambda) {
    const Eigen::Index n = X.rows();
    const Eigen::Index d = X.cols();
    if (n != y.size()) throw Error("probe input has " + std::to_string(n) + " rows but " +
                                   std::to_string(y.size()) + " labels");
    if (n < 2) throw Error("probe needs at least 2 rows");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw Error("ridge lambda must be positive");
    if (!X.allFinite()) throw Error("probe features contain non-finite values");
    if (!y.allFinite()) throw Error("probe labels contain non-finite values");
    if ((y.array() == y(0)).all()) throw Error("probe labels are constant");

    ProbeWeights probe;
    probe.ridge_lambda = lambda;
    probe.bias = y.mean();
    probe.feature_means = X.colwise().mean().transpose();
    probe.feature_scales = Eigen::VectorXd::Ones(d);
    probe.weights = Eigen::VectorXd::Zero(d);

    std::vector<Eigen::Index> active;
    active.reserve(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) {
        if (X.col(j).maxCoeff() == X.col(j).minCoeff()) continue;
        probe.feature_scales(j) = population_std(X.col(j));
        active.push_back(j);
    }
    if (active.empty()) return probe;

    const auto da = static_cast<Eigen::Index>(active.size());
    Eigen::MatrixXd Z(n, da);
    for (Eigen::Index c = 0; c < da; ++c) {
        const Eigen::Index j = active[static_cast<std::size_t>(c)];
        Z.col(c) = (X.col(j).array() - probe.feature_means(j)) / probe.feature_scales(j);
    }
    const Eigen::VectorXd yc = y.array() - probe.bias;

    Eigen::VectorXd w;
    if (da <= n) {
        Eigen::MatrixXd gram = Eigen::MatrixXd::Identity(da, da) * lambda;
        gram.selfadjointView<Eigen::Lower>().rankUpdate(Z.transpose());
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        if (llt.info() != Eigen::Success) throw Error("ridge system is not positive definite");
        w = llt.solve(Z.transpose() * yc);
    } else {
        Eigen::MatrixXd kernel = Eigen::MatrixXd::Identity(n, n) * lambda;
        kernel.selfadjointView<Eigen::Lower>().rankUpdate(Z);
        Eigen::LLT<Eigen::MatrixXd> llt(kernel);
        if (llt.info() != Eigen::Success) throw Error("ridge system is not positive definite");
        w = Z.transpose() * llt.solve(yc);
    }
    for (Eigen::Index c = 0; c < da; ++c) probe.weights(active[static_cast<std::size_t>(c)]) = w(c);
    return probe;
}

Eigen::VectorXd predict(const ProbeWeights& probe, const Eigen::Ref<const Eigen::MatrixXd>& X) {
    if (X.cols() != probe.dim())
        throw Error("probe expects " + std::to_string(probe.dim()) + " features, got " +
                    std::to_string(X.cols()));
    const Eigen::VectorXd scaled = probe.weights.cwiseQuotient(probe.feature_scales);
    return ((X.rowwise() - probe.feature_means.transpose()) * scaled).array() + probe.bias;
}

std::vector<std::vector<Eigen::Index>> make_folds(Eigen::Index n, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw Error("cross-validation needs k >= 2");
    if (n < static_cast<Eigen::Index>(2 * k))
        throw Error("cross-validation needs at least " + std::to_string(2 * k) + " rows, got " +
                    std::to_string(n));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(seed);
    rng.shuffle(std::span<Eigen::Index>(order));

    const auto un = static_cast<std::size_t>(n);
    const std::size_t base = un / k;
    const std::size_t extra = un % k;
    std::vector<std::vector<Eigen::Index>> folds(k);
    std::size_t cursor = 0;
    for (std::size_t f = 0; f < k; ++f) {
        const std::size_t size = base + (f < extra ? 1 : 0);
        folds[f].assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                        order.begin() + static_cast<std::ptrdiff_t>(cursor + size));
        cursor += size;
    }
    return folds;
}

CvScore cross_validate(const Eigen::Ref<const Eigen::MatrixXd>& X,
                       const Eigen::Ref<const Eigen::VectorXd>& y, std::size_t k,
                       std::uint64_t seed, double lambda) {
    if (X.rows() != y.size()) throw Error("feature rows and labels differ in length");
    const auto folds = make_folds(X.rows(), k, seed);

    CvScore score;
    score.seed = seed;
    score.fold_scores.reserve(k);
    for (std::size_t f = 0; f < k; ++f) {
        std::vector<Eigen::Index> train;
        train.reserve(static_cast<std::size_t>(X.rows()));
        for (std::size_t g = 0; g < k; ++g)
            if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
        const auto& test = folds[f];

        const Eigen::MatrixXd x_train = X(train, Eigen::all);
        const Eigen::VectorXd y_train = y(train);
        const Eigen::MatrixXd x_test = X(test, Eigen::all);
        const Eigen::VectorXd y_test = y(test);
        if ((y_test.array() == y_test(0)).all())
            throw Error("validation fold " + std::to_string(f + 1) + " has constant labels");

        const ProbeWeights probe = fit_ridge(x_train, y_train, lambda);
        const Eigen::VectorXd predicted = predict(probe, x_test);
        try {
            score.fold_scores.push_back(spearman(predicted, y_test));
        } catch (const Error& e) {
            throw Error("validation fold " + std::to_string(f + 1) + ": " + e.what());
        }
    }
    score.mean_score = std::accumulate(score.fold_scores.begin(), score.fold_scores.end(), 0.0) /
                       static_cast<double>(k);
    return score;
}

std::optional<BestCell> select_best(const std::map<CellKey, CellResult>& cells) {
    std::optional<BestCell> best;
    // Map order is the tie-break preference, so only a strictly larger score replaces.
    for (const auto& [key, result] : cells) {
        if (!result.score) continue;
        if (!best || result.score->mean_score > best->mean_score)
            best = BestCell{key, result.score->mean_score};
    }
    return best;
}

std::uint64_t cell_seed(std::uint64_t seed, int layer, int position) noexcept {
    return seed ^ derive_seed(0x6365'6c6cULL, layer, position);
}

ProbeGrid sweep_grid(const ActivationSet& set, const DifficultyLabels& labels,
                     const SweepConfig& config) {
    validate(labels);
    const Eigen::VectorXd y = label_vector(labels, set.problem_ids);

    std::vector<CellKey> keys;
    for (int layer : set.layer_ids)
        for (int position : set.position_offsets) keys.push_back({layer, position});

    std::vector<CellResult> results(keys.size());
    std::vector<std::optional<ProbeWeights>> refits(keys.size());
    parallel_for(keys.size(), config.threads, [&](std::size_t i) {
        const CellKey key = keys[i];
        const FeatureMatrix x = slice(set, key.layer, key.position);
        try {
            results[i].score = cross_validate(x, y, config.k,
                                              cell_seed(config.seed, key.layer, key.position),
                                              config.lambda);
        } catch (const Error& e) {
            results[i].failure = e.what();
        }
        try {
            ProbeWeights probe = fit_ridge(x, y, config.lambda);
            probe.layer = key.layer;
            probe.position = key.position;
            refits[i] = std::move(probe);
        } catch (const Error& e) {
            if (results[i].failure.empty()) results[i].failure = std::string("refit: ") + e.what();
        }
    });

    ProbeGrid grid;
    grid.model_id = set.model_id;
    grid.dataset_name = labels.dataset_name;
    for (std::size_t i = 0; i < keys.size(); ++i) {
        grid.cells.emplace(keys[i], std::move(results[i]));
        if (refits[i]) grid.refit_weights.emplace(keys[i], std::move(*refits[i]));
    }
    grid.best = select_best(grid.cells);
    return grid;
}

void write_grid_csv(const ProbeGrid& grid, std::ostream& out) {
    std::size_t k = 0;
    for (const auto& [key, result] : grid.cells)
        if (result.score) k = std::max(k, result.score->fold_scores.size());
    if (k == 0) k = 5;
    out << "layer,position";
    for (std::size_t f = 1; f <= k; ++f) out << ",fold" << f;
    out << ",mean\n";
    for (const auto& [key, result] : grid.cells) {
        out << key.layer << ',' << key.position;
        for (std::size_t f = 0; f < k; ++f) {
            out << ',';
            if (result.score) out << format_double(result.score->fold_scores.at(f));
        }
        out << ',';
        if (result.score) out << format_double(result.score->mean_score);
        out << '\n';
    }
}

ProbeGrid read_grid_csv(std::istream& in, std::string model_id, std::string dataset_name) {
    ProbeGrid grid;
    grid.model_id = std::move(model_id);
    grid.dataset_name = std::move(dataset_name);
    std::string line;
    std::size_t k = 0;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (k == 0) {
            if (fields.size() < 5 || fields[0] != "layer" || fields[1] != "position" ||
                fields.back() != "mean")
                throw FormatError("grid CSV header must be 'layer,position,fold1..foldk,mean'");
            k = fields.size() - 3;
            for (std::size_t f = 0; f < k; ++f)
                if (fields[2 + f] != "fold" + std::to_string(f + 1))
                    throw FormatError("grid CSV header has unexpected column '" + fields[2 + f] + "'");
            continue;
        }
        if (fields.size() != k + 3)
            throw FormatError("grid CSV line " + std::to_string(line_no) + ": wrong field count");
        CellKey key{static_cast<int>(parse_int(fields[0], "layer")),
                    static_cast<int>(parse_int(fields[1], "position"))};
        CellResult result;
        if (fields.back().empty()) {
            result.failure = "missing";
        } else {
            CvScore score;
            for (std::size_t f = 0; f < k; ++f)
                score.fold_scores.push_back(parse_double(fields[2 + f], "fold score"));
            score.mean_score = parse_double(fields.back(), "mean score");
            const double recomputed =
                std::accumulate(score.fold_scores.begin(), score.fold_scores.end(), 0.0) /
                static_cast<double>(k);
            if (std::abs(recomputed - score.mean_score) > 1e-12)
                throw FormatError("grid CSV line " + std::to_string(line_no) +
                                  ": mean disagrees with fold scores");
            result.score = std::move(score);
        }
        if (!grid.cells.emplace(key, std::move(result)).second)
            throw FormatError("grid CSV repeats cell (" + fields[0] + ", " + fields[1] + ")");
    }
    if (k == 0) throw FormatError("grid CSV is empty");
    grid.best = select_best(grid.cells);
    return grid;
}

ProbeGrid load_grid_csv(const std::filesystem::path& path, std::string model_id,
                        std::string dataset_name) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    return read_grid_csv(in, std::move(model_id), std::move(dataset_name));
}

namespace {

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd to_eigen(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string weights_json(const std::map<CellKey, ProbeWeights>& weights) {
    nlohmann::json cells = nlohmann::json::array();
    for (const auto& [key, probe] : weights) {
        cells.push_back({{"layer", key.layer},
                         {"position", key.position},
                         {"lambda", probe.ridge_lambda},
                         {"bias", probe.bias},
                         {"means", to_std(probe.feature_means)},
                         {"scales", to_std(probe.feature_scales)},
                         {"weights", to_std(probe.weights)}});
    }
    return cells.dump() + "\n";
}

std::map<CellKey, ProbeWeights> parse_weights_json(const std::string& text) {
    std::map<CellKey, ProbeWeights> out;
    try {
        const auto cells = nlohmann::json::parse(text);
        if (!cells.is_array()) throw FormatError("weights JSON must be an array of cells");
        for (const auto& cell : cells) {
            ProbeWeights probe;
            probe.layer = cell.at("layer").get<int>();
            probe.position = cell.at("position").get<int>();
            probe.ridge_lambda = cell.at("lambda").get<double>();
            probe.bias = cell.at("bias").get<double>();
            probe.feature_means = to_eigen(cell.at("means").get<std::vector<double>>());
            probe.feature_scales = to_eigen(cell.at("scales").get<std::vector<double>>());
            probe.weights = to_eigen(cell.at("weights").get<std::vector<double>>());
            if (probe.feature_means.size() != probe.dim() || probe.feature_scales.size() != probe.dim())
                throw FormatError("weights JSON cell has inconsistent vector lengths");
            if ((probe.feature_scales.array() <= 0.0).any())
                throw FormatError("weights JSON cell has a non-positive scale");
            out.emplace(CellKey{probe.layer, probe.position}, std::move(probe));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed weights JSON: ") + e.what());
    }
    return out;
}

}  // namespace diffprobe
