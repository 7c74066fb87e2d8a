#pragma once

// Synthetic inputs with planted ground truth. Every generator is a pure
// function of its spec; each (dataset, step, layer, position) cell draws from
// its own seed-derived substream.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "diffprobe/activation_store.hpp"
#include "diffprobe/labels.hpp"
#include "diffprobe/probe.hpp"
#include "diffprobe/scaling.hpp"

namespace diffprobe {

/// Layers are numbered 0..L-1 and positions -1..-P.
struct PlantSpec {
    std::size_t n = 100;
    std::size_t d = 16;
    std::size_t L = 1;
    std::size_t P = 1;
    CellKey target_cell{0, -1};
    double snr = 1.0;  // signal std / noise std along the planted direction
    std::uint64_t seed = 0;
    std::string model_id = "synthetic";
    std::string dataset_name = "synthetic";
    LabelSource source = LabelSource::human;
};

void validate(const PlantSpec& spec);

struct PlantedSet {
    ActivationSet set;
    DifficultyLabels labels;
    Eigen::VectorXd direction;  // unit vector planted at target_cell
};

/// Labels y ~ N(0, 1). At the target cell x_i = z_i * snr * u + e_i with
/// z the standardized labels, u a random unit vector and e ~ N(0, I);
/// every other cell is pure noise.
PlantedSet plant_direction_set(const PlantSpec& spec);

/// perf_i = 1 - C * N_i^(-alpha) * exp(eps_i), eps_i ~ N(0, noise_sigma^2).
std::vector<ScalingPoint> plant_scaling_points(double C, double alpha, const std::vector<double>& sizes,
                                               double noise_sigma, std::uint64_t seed);

/// `count` sizes evenly spaced in log between lo and hi inclusive.
std::vector<double> log_spaced(double lo, double hi, std::size_t count);

struct DatasetDrift {
    std::string name;
    LabelSource source = LabelSource::human;
    double factor = 1.0;                 // per-step multiplicative snr change
    std::optional<int> layer_limit;      // drift only layers < limit; all layers if empty
};

/// Checkpoints 0..steps. Every cell carries every dataset's signal; the
/// planted snr of dataset k at step s and layer l is snr * factor_k^s when
/// the drift applies to l, and snr otherwise. Directions and labels are fixed
/// across steps; noise is redrawn per step.
struct CheckpointPlantSpec {
    std::size_t n = 200;
    std::size_t d = 16;
    std::size_t L = 4;
    std::size_t P = 2;
    double snr = 1.0;
    std::size_t steps = 10;
    std::vector<DatasetDrift> datasets;
    std::uint64_t seed = 0;
    std::string model_id = "synthetic";
};

struct PlantedSeries {
    std::vector<int> steps;
    std::vector<ActivationSet> sets;                  // one per step
    std::map<std::string, DifficultyLabels> labels;   // per dataset
};

PlantedSeries plant_checkpoint_series(const CheckpointPlantSpec& spec);

/// Planted snr for a dataset at (step, layer).
double planted_snr(const CheckpointPlantSpec& spec, const DatasetDrift& drift, int step, int layer);

struct ScalingPlantSpec {
    double C = 0.5;
    double alpha = 0.045;
    std::vector<double> sizes;
    double noise_sigma = 0.0;
    std::uint64_t seed = 0;
};

using SynthSpec = std::variant<PlantSpec, ScalingPlantSpec, CheckpointPlantSpec>;

/// JSON with "kind": "direction" | "scaling" | "checkpoints". Unknown keys are rejected.
SynthSpec parse_synth_spec(const std::string& text);

}  // namespace diffprobe
