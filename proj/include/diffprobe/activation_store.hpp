#pragma once

// ACTV1 activation container and per-cell slicing.
//
// Layout (all integers little-endian):
//   [0, 4)        magic "ACTV"
//   [4, 8)        u32 version = 1
//   [8, 16)       u64 header length H
//   [16, 16 + H)  UTF-8 JSON header
//   rest          n*L*P*d float32 values, row-major (problem, layer, position, dim)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace diffprobe {

inline constexpr char kActvMagic[4] = {'A', 'C', 'T', 'V'};
inline constexpr std::uint32_t kActvVersion = 1;

/// Dense activation dump: [problems x layers x positions x hidden_dim].
struct ActivationSet {
    std::string model_id;
    std::vector<int> layer_ids;         // strictly increasing
    std::vector<int> position_offsets;  // -1, -2, ... strictly decreasing
    std::size_t hidden_dim = 0;
    std::vector<std::string> problem_ids;
    std::string notes;
    std::vector<float> data;

    std::size_t n_problems() const noexcept { return problem_ids.size(); }
    std::size_t n_layers() const noexcept { return layer_ids.size(); }
    std::size_t n_positions() const noexcept { return position_offsets.size(); }

    std::size_t offset(std::size_t problem, std::size_t layer, std::size_t position,
                       std::size_t dim = 0) const noexcept {
        return ((problem * n_layers() + layer) * n_positions() + position) * hidden_dim + dim;
    }
    float at(std::size_t problem, std::size_t layer, std::size_t position,
             std::size_t dim) const noexcept {
        return data[offset(problem, layer, position, dim)];
    }
    float& at(std::size_t problem, std::size_t layer, std::size_t position,
              std::size_t dim) noexcept {
        return data[offset(problem, layer, position, dim)];
    }

    std::size_t layer_index(int layer) const;        // throws listing available layers
    std::size_t position_index(int position) const;  // throws listing available offsets

    friend bool operator==(const ActivationSet&, const ActivationSet&) = default;
};

/// Throws diffprobe::Error describing the first violated invariant.
void validate(const ActivationSet& set);

/// One (layer, position) slice widened to double; rows follow problem_ids.
struct FeatureMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> row_ids;

    Eigen::Index rows() const noexcept { return values.rows(); }
    Eigen::Index cols() const noexcept { return values.cols(); }
};

void write_activation_set(const ActivationSet& set, std::ostream& sink);
ActivationSet read_activation_set(std::istream& source);

/// Exact byte image of write_activation_set.
std::vector<char> encode_activation_set(const ActivationSet& set);

void save_activation_set(const ActivationSet& set, const std::filesystem::path& path);
ActivationSet load_activation_set(const std::filesystem::path& path);

/// Header JSON exactly as stored (compact, keys sorted).
std::string header_json(const ActivationSet& set);

FeatureMatrix slice(const ActivationSet& set, int layer, int position);

}  // namespace diffprobe
