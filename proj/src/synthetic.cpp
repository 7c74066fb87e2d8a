#include "diffprobe/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include <json.hpp>

#include "diffprobe/error.hpp"
#include "diffprobe/rng.hpp"
#include "diffprobe/stats.hpp"

namespace diffprobe {

namespace {

enum Stream : std::uint64_t { kLabels = 1, kDirection = 2, kNoise = 3, kScaling = 4 };

std::vector<std::string> problem_ids(std::size_t n) {
    std::vector<std::string> ids;
    ids.reserve(n);
    char buf[32];
    for (std::size_t i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, "p%05zu", i);
        ids.emplace_back(buf);
    }
    return ids;
}

ActivationSet empty_set(const std::string& model_id, std::size_t n, std::size_t d, std::size_t L,
                        std::size_t P) {
    ActivationSet set;
    set.model_id = model_id;
    for (std::size_t l = 0; l < L; ++l) set.layer_ids.push_back(static_cast<int>(l));
    for (std::size_t p = 0; p < P; ++p) set.position_offsets.push_back(-static_cast<int>(p) - 1);
    set.hidden_dim = d;
    set.problem_ids = problem_ids(n);
    set.data.assign(n * L * P * d, 0.0f);
    return set;
}

Eigen::VectorXd standard_normal(Rng& rng, std::size_t size) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(size));
    for (auto& x : v) x = rng.normal();
    return v;
}

Eigen::VectorXd standardized(const Eigen::VectorXd& y) {
    return (y.array() - y.mean()) / population_std(y);
}

Eigen::VectorXd random_unit(std::uint64_t seed, std::size_t d) {
    Rng rng(seed);
    Eigen::VectorXd u = standard_normal(rng, d);
    return u / u.norm();
}

DifficultyLabels make_labels(const Eigen::VectorXd& y, const std::vector<std::string>& ids,
                             std::string dataset_name, LabelSource source) {
    DifficultyLabels labels;
    labels.dataset_name = std::move(dataset_name);
    labels.source = source;
    for (std::size_t i = 0; i < ids.size(); ++i) labels.ratings.emplace(ids[i], y(static_cast<Eigen::Index>(i)));
    return labels;
}

}  // namespace

void validate(const PlantSpec& spec) {
    if (spec.n < 2 || spec.d == 0 || spec.L == 0 || spec.P == 0)
        throw Error("plant spec needs n >= 2 and positive d, L, P");
    if (!(spec.snr > 0.0) || !std::isfinite(spec.snr)) throw Error("plant spec snr must be positive");
    if (spec.target_cell.layer < 0 || spec.target_cell.layer >= static_cast<int>(spec.L) ||
        spec.target_cell.position > -1 || spec.target_cell.position < -static_cast<int>(spec.P))
        throw Error("target cell (" + std::to_string(spec.target_cell.layer) + ", " +
                    std::to_string(spec.target_cell.position) + ") outside the planted grid");
}

PlantedSet plant_direction_set(const PlantSpec& spec) {
    validate(spec);
    PlantedSet out;
    out.set = empty_set(spec.model_id, spec.n, spec.d, spec.L, spec.P);
    out.set.notes = "synthetic planted-direction set";

    Rng label_rng(derive_seed(spec.seed, kLabels));
    const Eigen::VectorXd y = standard_normal(label_rng, spec.n);
    const Eigen::VectorXd z = standardized(y);
    out.labels = make_labels(y, out.set.problem_ids, spec.dataset_name, spec.source);
    out.direction = random_unit(derive_seed(spec.seed, kDirection, spec.target_cell.layer,
                                            spec.target_cell.position),
                                spec.d);

    for (std::size_t l = 0; l < spec.L; ++l) {
        for (std::size_t p = 0; p < spec.P; ++p) {
            const int layer = out.set.layer_ids[l];
            const int position = out.set.position_offsets[p];
            const bool target = CellKey{layer, position} == spec.target_cell;
            Rng noise(derive_seed(spec.seed, kNoise, layer, position));
            for (std::size_t i = 0; i < spec.n; ++i) {
                const double signal = target ? z(static_cast<Eigen::Index>(i)) * spec.snr : 0.0;
                for (std::size_t k = 0; k < spec.d; ++k) {
                    double v = noise.normal();
                    if (target) v += signal * out.direction(static_cast<Eigen::Index>(k));
                    out.set.at(i, l, p, k) = static_cast<float>(v);
                }
            }
        }
    }
    return out;
}

std::vector<double> log_spaced(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi >= lo) || count == 0) throw Error("log_spaced needs 0 < lo <= hi and count > 0");
    std::vector<double> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count > 1 ? static_cast<double>(i) / static_cast<double>(count - 1) : 0.0;
        out.push_back(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))));
    }
    return out;
}

std::vector<ScalingPoint> plant_scaling_points(double C, double alpha, const std::vector<double>& sizes,
                                               double noise_sigma, std::uint64_t seed) {
    if (!(C > 0.0)) throw Error("C must be positive");
    if (noise_sigma < 0.0) throw Error("noise sigma must be non-negative");
    Rng rng(derive_seed(seed, kScaling));
    std::vector<ScalingPoint> points;
    for (std::size_t i = 0; i < sizes.size(); ++i) {
        if (!(sizes[i] > 0.0)) throw Error("model sizes must be positive");
        const double eps = noise_sigma * rng.normal();
        points.push_back({"m" + std::to_string(i), sizes[i], 1.0 - C * std::pow(sizes[i], -alpha) * std::exp(eps)});
    }
    return points;
}

double planted_snr(const CheckpointPlantSpec& spec, const DatasetDrift& drift, int step, int layer) {
    const bool drifts = !drift.layer_limit || layer < *drift.layer_limit;
    return drifts ? spec.snr * std::pow(drift.factor, step) : spec.snr;
}

PlantedSeries plant_checkpoint_series(const CheckpointPlantSpec& spec) {
    if (spec.n < 2 || spec.d == 0 || spec.L == 0 || spec.P == 0)
        throw Error("checkpoint plant spec needs n >= 2 and positive d, L, P");
    if (!(spec.snr > 0.0)) throw Error("checkpoint plant snr must be positive");
    if (spec.datasets.empty()) throw Error("checkpoint plant spec needs at least one dataset");
    std::set<std::string> names;
    for (const auto& ds : spec.datasets) {
        if (!(ds.factor > 0.0)) throw Error("drift factor for '" + ds.name + "' must be positive");
        if (!names.insert(ds.name).second) throw Error("duplicate dataset '" + ds.name + "'");
    }

    PlantedSeries out;
    const auto ids = problem_ids(spec.n);
    std::vector<Eigen::VectorXd> z;
    for (std::size_t k = 0; k < spec.datasets.size(); ++k) {
        Rng rng(derive_seed(spec.seed, kLabels, k));
        const Eigen::VectorXd y = standard_normal(rng, spec.n);
        z.push_back(standardized(y));
        out.labels.emplace(spec.datasets[k].name,
                           make_labels(y, ids, spec.datasets[k].name, spec.datasets[k].source));
    }

    for (std::size_t s = 0; s <= spec.steps; ++s) {
        const int step = static_cast<int>(s);
        ActivationSet set = empty_set(spec.model_id, spec.n, spec.d, spec.L, spec.P);
        set.notes = "synthetic checkpoint step " + std::to_string(step);
        for (std::size_t l = 0; l < spec.L; ++l) {
            for (std::size_t p = 0; p < spec.P; ++p) {
                const int layer = set.layer_ids[l];
                const int position = set.position_offsets[p];
                Eigen::MatrixXd cell(static_cast<Eigen::Index>(spec.n), static_cast<Eigen::Index>(spec.d));
                Rng noise(derive_seed(spec.seed, kNoise, step, layer, position));
                for (Eigen::Index i = 0; i < cell.rows(); ++i)
                    for (Eigen::Index k = 0; k < cell.cols(); ++k) cell(i, k) = noise.normal();
                for (std::size_t k = 0; k < spec.datasets.size(); ++k) {
                    const Eigen::VectorXd u =
                        random_unit(derive_seed(spec.seed, kDirection, k, layer, position), spec.d);
                    cell += planted_snr(spec, spec.datasets[k], step, layer) * z[k] * u.transpose();
                }
                for (std::size_t i = 0; i < spec.n; ++i)
                    for (std::size_t k = 0; k < spec.d; ++k)
                        set.at(i, l, p, k) =
                            static_cast<float>(cell(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)));
            }
        }
        out.steps.push_back(step);
        out.sets.push_back(std::move(set));
    }
    return out;
}

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || key == a;
        if (!known) throw Error("unknown synth spec key '" + key + "'");
    }
}

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

SynthSpec parse_synth_spec(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(std::string("synth spec is not valid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("kind")) throw Error("synth spec needs a \"kind\"");
    const auto kind = j.at("kind").get<std::string>();
    try {
        if (kind == "direction") {
            reject_unknown(j, {"kind", "n", "d", "L", "P", "target_layer", "target_position", "snr", "seed",
                               "model_id", "dataset_name", "source"});
            PlantSpec spec;
            read_opt(j, "n", spec.n);
            read_opt(j, "d", spec.d);
            read_opt(j, "L", spec.L);
            read_opt(j, "P", spec.P);
            read_opt(j, "target_layer", spec.target_cell.layer);
            read_opt(j, "target_position", spec.target_cell.position);
            read_opt(j, "snr", spec.snr);
            read_opt(j, "seed", spec.seed);
            read_opt(j, "model_id", spec.model_id);
            read_opt(j, "dataset_name", spec.dataset_name);
            if (j.contains("source")) spec.source = parse_label_source(j.at("source").get<std::string>());
            validate(spec);
            return spec;
        }
        if (kind == "scaling") {
            reject_unknown(j, {"kind", "C", "alpha", "sizes", "min_size", "max_size", "count", "noise_sigma", "seed"});
            ScalingPlantSpec spec;
            read_opt(j, "C", spec.C);
            read_opt(j, "alpha", spec.alpha);
            read_opt(j, "noise_sigma", spec.noise_sigma);
            read_opt(j, "seed", spec.seed);
            if (j.contains("sizes")) {
                spec.sizes = j.at("sizes").get<std::vector<double>>();
            } else {
                spec.sizes = log_spaced(j.value("min_size", 1e8), j.value("max_size", 1e11),
                                        j.value("count", std::size_t{20}));
            }
            return spec;
        }
        if (kind == "checkpoints") {
            reject_unknown(j, {"kind", "n", "d", "L", "P", "snr", "steps", "datasets", "seed", "model_id"});
            CheckpointPlantSpec spec;
            read_opt(j, "n", spec.n);
            read_opt(j, "d", spec.d);
            read_opt(j, "L", spec.L);
            read_opt(j, "P", spec.P);
            read_opt(j, "snr", spec.snr);
            read_opt(j, "steps", spec.steps);
            read_opt(j, "seed", spec.seed);
            read_opt(j, "model_id", spec.model_id);
            if (!j.contains("datasets")) throw Error("checkpoint synth spec needs \"datasets\"");
            for (const auto& ds : j.at("datasets")) {
                reject_unknown(ds, {"name", "source", "drift", "layer_limit"});
                DatasetDrift drift;
                drift.name = ds.at("name").get<std::string>();
                if (ds.contains("source")) drift.source = parse_label_source(ds.at("source").get<std::string>());
                read_opt(ds, "drift", drift.factor);
                if (ds.contains("layer_limit")) drift.layer_limit = ds.at("layer_limit").get<int>();
                spec.datasets.push_back(std::move(drift));
            }
            return spec;
        }
    } catch (const json::exception& e) {
        throw Error(std::string("synth spec has a wrong type: ") + e.what());
    }
    throw Error("unknown synth kind '" + kind + "'");
}

}  // namespace diffprobe
