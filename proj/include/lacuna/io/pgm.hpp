#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lacuna/core/errors.hpp"
#include "lacuna/core/tensor.hpp"

namespace lacuna {

namespace detail {

/// Cursor over PGM bytes that skips whitespace and '#' comments between
/// header tokens.
class PgmCursor {
public:
    explicit PgmCursor(const std::vector<unsigned char>& bytes) : bytes_(bytes) {}

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            const unsigned char c = bytes_[pos_];
            if (c == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(c)) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    /// Reads a decimal integer; returns false if none is present.
    bool read_int(long& out) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        long v = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            v = v * 10 + (bytes_[pos_] - '0');
            if (v > 1'000'000'000L) return false;
            ++pos_;
        }
        out = v;
        return pos_ > start;
    }

    [[nodiscard]] std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }
    [[nodiscard]] bool at_end() const { return pos_ >= bytes_.size(); }
    [[nodiscard]] unsigned char peek() const { return bytes_[pos_]; }

private:
    const std::vector<unsigned char>& bytes_;
    std::size_t pos_ = 0;
};

inline std::vector<unsigned char> read_all_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_all_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace detail

/// Parses P2 (ASCII) or P5 (binary) PGM bytes into a 1x1xHxW map holding the
/// raw pixel values.
inline FeatureMap parse_pgm(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '2' && bytes[1] != '5')) {
        throw FormatError("pgm: malformed header (expected P2 or P5 magic)");
    }
    const bool binary = bytes[1] == '5';
    detail::PgmCursor cur(bytes);
    cur.advance(2);
    long width = 0;
    long height = 0;
    long maxval = 0;
    if (!cur.read_int(width) || !cur.read_int(height) || !cur.read_int(maxval)) {
        throw FormatError("pgm: malformed header");
    }
    if (width < 1 || height < 1 || width > 65535 || height > 65535) throw FormatError("pgm: malformed header (size)");
    if (maxval < 1 || maxval > 255) throw FormatError("pgm: unsupported maxval " + std::to_string(maxval));

    const auto count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    std::vector<double> values;
    values.reserve(count);
    if (binary) {
        if (cur.at_end() || !std::isspace(cur.peek())) throw FormatError("pgm: malformed header");
        cur.advance(1);
        if (bytes.size() - cur.pos() < count) throw FormatError("pgm: truncated payload");
        for (std::size_t i = 0; i < count; ++i) {
            const unsigned char v = bytes[cur.pos() + i];
            if (v > maxval) throw FormatError("pgm: pixel exceeds maxval");
            values.push_back(v);
        }
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            long v = 0;
            if (!cur.read_int(v)) {
                cur.skip_space_and_comments();
                if (cur.at_end()) throw FormatError("pgm: truncated payload");
                throw FormatError("pgm: malformed pixel value");
            }
            if (v > maxval) throw FormatError("pgm: pixel exceeds maxval");
            values.push_back(static_cast<double>(v));
        }
    }
    return FeatureMap({1, 1, static_cast<int>(height), static_cast<int>(width)}, std::move(values));
}

inline FeatureMap read_pgm(const std::filesystem::path& path) { return parse_pgm(detail::read_all_bytes(path)); }

/// Linear rescale of [min, max] to [0, 255] with round-half-up; a constant
/// map becomes all zeros.
inline std::vector<unsigned char> quantize_to_bytes(std::span<const double> values) {
    for (double v : values) {
        if (!std::isfinite(v)) throw NonFiniteError("pgm: cannot write non-finite values");
    }
    const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
    const double lo = *lo_it;
    const double hi = *hi_it;
    std::vector<unsigned char> out;
    out.reserve(values.size());
    for (double v : values) {
        const double scaled = hi > lo ? (v - lo) / (hi - lo) * 255.0 : 0.0;
        out.push_back(static_cast<unsigned char>(std::clamp(std::floor(scaled + 0.5), 0.0, 255.0)));
    }
    return out;
}

/// P5 encoding of a single-plane map.
inline std::string encode_pgm(const FeatureMap& map) {
    if (map.batch() != 1 || map.channels() != 1) throw ShapeError("pgm: expects a 1x1xHxW map");
    const auto pixels = quantize_to_bytes(map.data());
    std::ostringstream os;
    os << "P5\n" << map.width() << ' ' << map.height() << "\n255\n";
    std::string out = os.str();
    out.append(pixels.begin(), pixels.end());
    return out;
}

inline void write_pgm(const FeatureMap& map, const std::filesystem::path& path) {
    detail::write_all_bytes(path, encode_pgm(map));
}

namespace detail {

inline void require_pixel_values(const FeatureMap& map) {
    if (map.batch() != 1 || map.channels() != 1) throw ShapeError("pgm: expects a 1x1xHxW map");
    for (double v : map.data()) {
        if (!(v >= 0.0 && v <= 255.0) || v != std::floor(v)) {
            throw FormatError("pgm: verbatim values must be integers in [0, 255]");
        }
    }
}

}  // namespace detail

/// P2 encoding of integer pixel values already in [0, 255] (no rescale).
inline std::string encode_pgm_ascii(const FeatureMap& map) {
    detail::require_pixel_values(map);
    std::ostringstream os;
    os << "P2\n" << map.width() << ' ' << map.height() << "\n255\n";
    for (int y = 0; y < map.height(); ++y) {
        for (int x = 0; x < map.width(); ++x) {
            os << static_cast<int>(map(0, 0, y, x)) << (x + 1 < map.width() ? ' ' : '\n');
        }
    }
    return os.str();
}

/// P5 encoding of integer pixel values already in [0, 255] (no rescale).
inline std::string encode_pgm_verbatim(const FeatureMap& map) {
    detail::require_pixel_values(map);
    std::ostringstream os;
    os << "P5\n" << map.width() << ' ' << map.height() << "\n255\n";
    std::string out = os.str();
    for (double v : map.data()) out.push_back(static_cast<char>(static_cast<unsigned char>(v)));
    return out;
}

inline void write_pgm_verbatim(const FeatureMap& map, const std::filesystem::path& path) {
    detail::write_all_bytes(path, encode_pgm_verbatim(map));
}

}  // namespace lacuna
