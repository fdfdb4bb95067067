#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "lacuna/core/errors.hpp"
#include "lacuna/core/tensor.hpp"
#include "lacuna/io/pgm.hpp"

namespace lacuna {

/// Binary feature tensor: "LACF", N C H W as little-endian u32, then the
/// values as little-endian f64 in NCHW order.
inline constexpr std::array<char, 4> kFeatureMagic = {'L', 'A', 'C', 'F'};

namespace detail {

inline void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t get_le(const std::vector<unsigned char>& in, std::size_t at, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(in[at + static_cast<std::size_t>(i)]) << (8 * i);
    return v;
}

}  // namespace detail

inline std::string encode_features(const FeatureMap& x) {
    std::string out(kFeatureMagic.begin(), kFeatureMagic.end());
    for (int d : {x.batch(), x.channels(), x.height(), x.width()}) detail::put_le(out, static_cast<std::uint32_t>(d), 4);
    for (double v : x.data()) detail::put_le(out, std::bit_cast<std::uint64_t>(v), 8);
    return out;
}

inline FeatureMap decode_features(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 20 || std::memcmp(bytes.data(), kFeatureMagic.data(), 4) != 0) {
        throw FormatError("features: missing LACF header");
    }
    std::array<int, 4> dims{};
    for (std::size_t i = 0; i < 4; ++i) {
        const auto d = detail::get_le(bytes, 4 + 4 * i, 4);
        if (d < 1 || d > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
            throw FormatError("features: invalid dimension");
        }
        dims[i] = static_cast<int>(d);
    }
    const Shape shape{dims[0], dims[1], dims[2], dims[3]};
    const auto count = static_cast<std::size_t>(shape.numel());
    if ((bytes.size() - 20) / 8 < count) throw FormatError("features: truncated payload");
    if (bytes.size() - 20 != count * 8) throw FormatError("features: trailing bytes after payload");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = std::bit_cast<double>(detail::get_le(bytes, 20 + 8 * i, 8));
    return FeatureMap(shape, std::move(values));
}

inline void write_features(const FeatureMap& x, const std::filesystem::path& path) {
    detail::write_all_bytes(path, encode_features(x));
}

inline FeatureMap read_features(const std::filesystem::path& path) {
    return decode_features(detail::read_all_bytes(path));
}

/// Labels sidecar: one integer per line.
inline void write_labels(std::span<const int> labels, const std::filesystem::path& path) {
    std::string out;
    for (int y : labels) out += std::to_string(y) + "\n";
    detail::write_all_bytes(path, out);
}

inline std::vector<int> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<int> labels;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        int y = 0;
        std::string rest;
        if (!(ls >> y) || (ls >> rest) || y < 0) throw FormatError("labels: bad line '" + line + "'");
        labels.push_back(y);
    }
    return labels;
}

}  // namespace lacuna
