#include "diffprobe/activation_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "diffprobe/error.hpp"
#include "diffprobe/io.hpp"

namespace diffprobe {

namespace {

using nlohmann::json;

template <typename Int>
void put_le(std::vector<char>& out, Int value) {
    using U = std::make_unsigned_t<Int>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(U); ++i) {
        out.push_back(static_cast<char>(u & 0xffu));
        u = static_cast<U>(u >> 8);
    }
}

template <typename U>
U get_le(const unsigned char* bytes) {
    U value = 0;
    for (std::size_t i = sizeof(U); i-- > 0;) value = static_cast<U>((value << 8) | bytes[i]);
    return value;
}

std::string join_ints(const std::vector<int>& values) {
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ", ";
        out += std::to_string(values[i]);
    }
    return out;
}

std::string index_tuple(const ActivationSet& set, std::size_t flat) {
    const std::size_t k = flat % set.hidden_dim;
    std::size_t rest = flat / set.hidden_dim;
    const std::size_t p = rest % set.n_positions();
    rest /= set.n_positions();
    const std::size_t l = rest % set.n_layers();
    const std::size_t i = rest / set.n_layers();
    return "(" + std::to_string(i) + "," + std::to_string(l) + "," + std::to_string(p) + "," +
           std::to_string(k) + ")";
}

void check_finite(const ActivationSet& set) {
    const auto bad = std::find_if(set.data.begin(), set.data.end(),
                                  [](float v) { return !std::isfinite(v); });
    if (bad != set.data.end())
        throw Error("non-finite value at " +
                    index_tuple(set, static_cast<std::size_t>(bad - set.data.begin())));
}

void check_shape(const ActivationSet& set) {
    if (set.problem_ids.empty()) throw Error("activation set has no problems");
    if (set.layer_ids.empty()) throw Error("activation set has no layers");
    if (set.position_offsets.empty()) throw Error("activation set has no positions");
    if (set.hidden_dim == 0) throw Error("activation set has zero hidden_dim");
    for (std::size_t i = 1; i < set.layer_ids.size(); ++i)
        if (set.layer_ids[i] <= set.layer_ids[i - 1])
            throw Error("layer_ids must be strictly increasing");
    if (set.position_offsets.front() > -1)
        throw Error("position offsets must be negative (-1 = final prompt token)");
    for (std::size_t i = 1; i < set.position_offsets.size(); ++i)
        if (set.position_offsets[i] >= set.position_offsets[i - 1])
            throw Error("position_offsets must be strictly decreasing");
    std::set<std::string_view> seen;
    for (const auto& id : set.problem_ids)
        if (!seen.insert(id).second) throw Error("duplicate problem id '" + id + "'");
    const std::size_t expected =
        set.n_problems() * set.n_layers() * set.n_positions() * set.hidden_dim;
    if (set.data.size() != expected)
        throw Error("data holds " + std::to_string(set.data.size()) + " values, expected " +
                    std::to_string(expected));
}

json header_object(const ActivationSet& set) {
    return json{{"model_id", set.model_id},
                {"n", set.n_problems()},
                {"L", set.n_layers()},
                {"P", set.n_positions()},
                {"d", set.hidden_dim},
                {"dtype", "f32"},
                {"layer_ids", set.layer_ids},
                {"position_offsets", set.position_offsets},
                {"problem_ids", set.problem_ids},
                {"notes", set.notes}};
}

template <typename T>
T require(const json& header, const char* key) {
    if (!header.contains(key)) throw FormatError(std::string("ACTV1 header missing key '") + key + "'");
    try {
        return header.at(key).get<T>();
    } catch (const json::exception&) {
        throw FormatError(std::string("ACTV1 header key '") + key + "' has the wrong type");
    }
}

}  // namespace

std::size_t ActivationSet::layer_index(int layer) const {
    const auto it = std::find(layer_ids.begin(), layer_ids.end(), layer);
    if (it == layer_ids.end())
        throw Error("layer " + std::to_string(layer) + " not present; available layers: " +
                    join_ints(layer_ids));
    return static_cast<std::size_t>(it - layer_ids.begin());
}

std::size_t ActivationSet::position_index(int position) const {
    const auto it = std::find(position_offsets.begin(), position_offsets.end(), position);
    if (it == position_offsets.end())
        throw Error("position " + std::to_string(position) + " not present; available positions: " +
                    join_ints(position_offsets));
    return static_cast<std::size_t>(it - position_offsets.begin());
}

void validate(const ActivationSet& set) {
    check_shape(set);
    check_finite(set);
}

std::string header_json(const ActivationSet& set) { return header_object(set).dump(); }

std::vector<char> encode_activation_set(const ActivationSet& set) {
    validate(set);
    const std::string header = header_json(set);
    std::vector<char> bytes;
    bytes.reserve(16 + header.size() + set.data.size() * 4);
    for (char c : kActvMagic) bytes.push_back(c);
    put_le<std::uint32_t>(bytes, kActvVersion);
    put_le<std::uint64_t>(bytes, header.size());
    bytes.insert(bytes.end(), header.begin(), header.end());
    for (float v : set.data) put_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(v));
    return bytes;
}

void write_activation_set(const ActivationSet& set, std::ostream& sink) {
    const std::vector<char> bytes = encode_activation_set(set);
    constexpr std::size_t kChunk = 1 << 16;
    std::size_t written = 0;
    while (written < bytes.size()) {
        const std::size_t len = std::min(kChunk, bytes.size() - written);
        sink.write(bytes.data() + written, static_cast<std::streamsize>(len));
        if (!sink) throw Error("partial write: sink failed at byte offset " + std::to_string(written));
        written += len;
    }
    sink.flush();
    if (!sink) throw Error("partial write: sink failed at byte offset " + std::to_string(written));
}

ActivationSet read_activation_set(std::istream& source) {
    unsigned char prefix[16];
    source.read(reinterpret_cast<char*>(prefix), 4);
    if (source.gcount() != 4 || std::memcmp(prefix, kActvMagic, 4) != 0)
        throw FormatError("not an ACTV1 file");
    source.read(reinterpret_cast<char*>(prefix + 4), 12);
    if (source.gcount() != 12) throw FormatError("truncated ACTV1 preamble");
    const auto version = get_le<std::uint32_t>(prefix + 4);
    if (version != kActvVersion)
        throw FormatError("unsupported ACTV version " + std::to_string(version));
    const auto header_len = get_le<std::uint64_t>(prefix + 8);

    std::string header_text;
    if (header_len > (std::uint64_t{1} << 32)) throw FormatError("implausible ACTV1 header length");
    header_text.resize(static_cast<std::size_t>(header_len));
    source.read(header_text.data(), static_cast<std::streamsize>(header_len));
    if (static_cast<std::uint64_t>(source.gcount()) != header_len)
        throw FormatError("truncated ACTV1 header");

    json header;
    try {
        header = json::parse(header_text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("ACTV1 header is not valid JSON: ") + e.what());
    }
    if (require<std::string>(header, "dtype") != "f32")
        throw FormatError("unsupported dtype '" + header.at("dtype").get<std::string>() + "'");

    ActivationSet set;
    set.model_id = require<std::string>(header, "model_id");
    set.layer_ids = require<std::vector<int>>(header, "layer_ids");
    set.position_offsets = require<std::vector<int>>(header, "position_offsets");
    set.problem_ids = require<std::vector<std::string>>(header, "problem_ids");
    set.notes = require<std::string>(header, "notes");
    set.hidden_dim = require<std::size_t>(header, "d");
    const auto n = require<std::size_t>(header, "n");
    const auto L = require<std::size_t>(header, "L");
    const auto P = require<std::size_t>(header, "P");
    if (n != set.problem_ids.size() || L != set.layer_ids.size() || P != set.position_offsets.size())
        throw FormatError("ACTV1 header counts disagree with its id lists");

    const std::uint64_t expected = std::uint64_t{n} * L * P * set.hidden_dim * 4;
    std::vector<char> payload{std::istreambuf_iterator<char>(source), std::istreambuf_iterator<char>()};
    if (payload.size() != expected)
        throw FormatError("truncated payload, expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(payload.size()));

    set.data.resize(static_cast<std::size_t>(expected / 4));
    const auto* raw = reinterpret_cast<const unsigned char*>(payload.data());
    for (std::size_t i = 0; i < set.data.size(); ++i)
        set.data[i] = std::bit_cast<float>(get_le<std::uint32_t>(raw + 4 * i));
    try {
        validate(set);
    } catch (const FormatError&) {
        throw;
    } catch (const Error& e) {
        throw FormatError(e.what());
    }
    return set;
}

void save_activation_set(const ActivationSet& set, const std::filesystem::path& path) {
    const std::vector<char> bytes = encode_activation_set(set);
    write_file_atomic(path, std::string_view(bytes.data(), bytes.size()));
}

ActivationSet load_activation_set(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    return read_activation_set(in);
}

FeatureMatrix slice(const ActivationSet& set, int layer, int position) {
    const std::size_t l = set.layer_index(layer);
    const std::size_t p = set.position_index(position);
    FeatureMatrix out;
    out.values.resize(static_cast<Eigen::Index>(set.n_problems()),
                      static_cast<Eigen::Index>(set.hidden_dim));
    for (std::size_t i = 0; i < set.n_problems(); ++i) {
        const float* row = set.data.data() + set.offset(i, l, p);
        out.values.row(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::VectorXf>(row, static_cast<Eigen::Index>(set.hidden_dim))
                .cast<double>()
                .transpose();
    }
    out.row_ids = set.problem_ids;
    return out;
}

}  // namespace diffprobe
