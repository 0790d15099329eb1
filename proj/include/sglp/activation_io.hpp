// SPDX-License-Identifier: Apache-2.0
//
// Persistence for activation dumps (ACTV1 binary), similarity matrices
// (CSV text) and externally computed score tables (TSV text).
//
// ACTV1 layout, all integers little-endian:
//   "SGLPACT1"                      8 bytes
//   u32 layer count L
//   per layer:
//     u16 name byte length, name bytes (UTF-8)
//     u32 n (samples), u32 d (features)
//     n*d binary32 values, sample-major
#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "sglp/error.hpp"
#include "sglp/matrix.hpp"

namespace sglp {

struct LayerActivations {
    std::string name;
    Matrix matrix;  // samples x features

    friend bool operator==(const LayerActivations&, const LayerActivations&) = default;
};

/// Per-layer activations from one forward pass, in forward order.
struct ActivationSet {
    std::vector<LayerActivations> layers;

    [[nodiscard]] std::size_t layer_count() const noexcept { return layers.size(); }
    [[nodiscard]] std::size_t sample_count() const noexcept {
        return layers.empty() ? 0 : layers.front().matrix.rows();
    }
    [[nodiscard]] std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(layers.size());
        for (const auto& l : layers) out.push_back(l.name);
        return out;
    }

    friend bool operator==(const ActivationSet&, const ActivationSet&) = default;
};

/// Checks the structural invariants. `min_layers` is 1 for the file format
/// and 2 for similarity analysis.
inline void validate(const ActivationSet& set, std::size_t min_layers = 2) {
    if (set.layers.size() < min_layers)
        fail_data("activation set needs at least " + std::to_string(min_layers) + " layers, got " +
                  std::to_string(set.layers.size()));
    const std::size_t n = set.sample_count();
    if (n < 2) fail_data("activation set needs at least 2 samples");
    for (const auto& layer : set.layers) {
        if (layer.matrix.rows() != n)
            fail_data("layer '" + layer.name + "' has " + std::to_string(layer.matrix.rows()) +
                      " samples, expected " + std::to_string(n));
        if (layer.matrix.cols() < 1) fail_data("layer '" + layer.name + "' has no features");
        if (layer.name.size() > std::numeric_limits<std::uint16_t>::max())
            fail_data("layer name too long");
        for (double v : layer.matrix.values())
            if (!std::isfinite(v)) fail_data("layer '" + layer.name + "' has a non-finite value");
    }
}

/// Averages a channel-major flattened (c*h*w) layer down to n x c.
inline Matrix channel_mean_pool(const Matrix& flat, std::size_t channels) {
    if (channels == 0 || flat.cols() % channels != 0)
        fail_usage("feature count " + std::to_string(flat.cols()) + " is not divisible by " +
                   std::to_string(channels) + " channels");
    const std::size_t spatial = flat.cols() / channels;
    Matrix out(flat.rows(), channels);
    for (std::size_t i = 0; i < flat.rows(); ++i) {
        auto row = flat.row(i);
        for (std::size_t c = 0; c < channels; ++c) {
            double sum = 0.0;
            for (std::size_t s = 0; s < spatial; ++s) sum += row[c * spatial + s];
            out(i, c) = sum / static_cast<double>(spatial);
        }
    }
    return out;
}

namespace detail {

inline constexpr std::array<char, 8> kActivationMagic = {'S', 'G', 'L', 'P', 'A', 'C', 'T', '1'};

template <typename T>
void put_le(std::string& buf, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf.push_back(static_cast<char>(u & 0xffu));
        u = static_cast<U>(u >> 8);
    }
}

inline void put_f32(std::string& buf, float v) { put_le(buf, std::bit_cast<std::uint32_t>(v)); }
inline void put_f64(std::string& buf, double v) { put_le(buf, std::bit_cast<std::uint64_t>(v)); }

/// Bounds-checked little-endian reader over an input stream.
class ByteReader {
public:
    explicit ByteReader(std::istream& in) : in_(in) {}

    void read(char* dst, std::size_t count) {
        in_.read(dst, static_cast<std::streamsize>(count));
        if (static_cast<std::size_t>(in_.gcount()) != count) fail_data("unexpected end of stream");
    }

    template <typename T>
    T get_le() {
        std::array<unsigned char, sizeof(T)> raw{};
        read(reinterpret_cast<char*>(raw.data()), raw.size());
        std::make_unsigned_t<T> u = 0;
        for (std::size_t i = sizeof(T); i-- > 0;) u = static_cast<decltype(u)>((u << 8) | raw[i]);
        return static_cast<T>(u);
    }

    float get_f32() { return std::bit_cast<float>(get_le<std::uint32_t>()); }
    double get_f64() { return std::bit_cast<double>(get_le<std::uint64_t>()); }

    std::string get_string(std::size_t len) {
        std::string s(len, '\0');
        if (len > 0) read(s.data(), len);
        return s;
    }

    [[nodiscard]] bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

private:
    std::istream& in_;
};

inline std::string format_double(double v) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v,
                                   std::chars_format::general, 17);
    if (ec != std::errc{}) fail_internal("failed to format number");
    return {buf.data(), end};
}

inline bool parse_double(std::string_view text, double& out) {
    while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
    while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r'))
        text.remove_suffix(1);
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    if (text.empty()) return false;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(line.substr(start));
            return parts;
        }
        parts.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

}  // namespace detail

/// Serializes `set` as ACTV1. Values are stored as binary32, so a round trip
/// is bit-exact only for values that are representable as float.
/// Returns the number of bytes written; nothing is written on error.
inline std::uint64_t write_activations(const ActivationSet& set, std::ostream& out) {
    validate(set, 1);
    if (set.layers.size() > std::numeric_limits<std::uint32_t>::max())
        fail_data("too many layers for ACTV1");
    std::string buf(detail::kActivationMagic.begin(), detail::kActivationMagic.end());
    detail::put_le(buf, static_cast<std::uint32_t>(set.layers.size()));
    for (const auto& layer : set.layers) {
        const auto& m = layer.matrix;
        if (m.rows() > std::numeric_limits<std::uint32_t>::max() ||
            m.cols() > std::numeric_limits<std::uint32_t>::max())
            fail_data("layer '" + layer.name + "' is too large for ACTV1");
        detail::put_le(buf, static_cast<std::uint16_t>(layer.name.size()));
        buf += layer.name;
        detail::put_le(buf, static_cast<std::uint32_t>(m.rows()));
        detail::put_le(buf, static_cast<std::uint32_t>(m.cols()));
        for (double v : m.values()) {
            const auto f = static_cast<float>(v);
            if (!std::isfinite(f))
                fail_data("layer '" + layer.name + "' has a value outside binary32 range");
            detail::put_f32(buf, f);
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) fail_data("write failed");
    return buf.size();
}

/// Size in bytes of the ACTV1 encoding of `set`.
inline std::uint64_t encoded_size(const ActivationSet& set) {
    std::uint64_t total = 12;
    for (const auto& l : set.layers)
        total += 2 + l.name.size() + 8 + 4 * static_cast<std::uint64_t>(l.matrix.size());
    return total;
}

inline ActivationSet read_activations(std::istream& in) {
    detail::ByteReader reader(in);
    std::array<char, 8> magic{};
    try {
        reader.read(magic.data(), magic.size());
    } catch (const Error&) {
        fail_data("unrecognized format: stream too short for ACTV1 header");
    }
    if (magic != detail::kActivationMagic) fail_data("unrecognized format: bad ACTV1 magic");

    ActivationSet set;
    const auto layer_count = reader.get_le<std::uint32_t>();
    std::size_t shared_n = 0;
    for (std::uint32_t l = 0; l < layer_count; ++l) {
        LayerActivations layer;
        const auto name_len = reader.get_le<std::uint16_t>();
        layer.name = reader.get_string(name_len);
        const auto n = reader.get_le<std::uint32_t>();
        const auto d = reader.get_le<std::uint32_t>();
        if (l == 0) shared_n = n;
        if (n != shared_n)
            fail_data("corrupt data: layer '" + layer.name + "' sample count " + std::to_string(n) +
                      " differs from " + std::to_string(shared_n));
        if (n < 2 || d < 1) fail_data("corrupt data: layer '" + layer.name + "' has empty shape");
        layer.matrix = Matrix(n, d);
        // Read in chunks so a lying header cannot force a huge allocation
        // before the stream runs dry.
        auto values = layer.matrix.values();
        std::vector<char> chunk;
        std::size_t done = 0;
        while (done < values.size()) {
            const std::size_t count = std::min<std::size_t>(values.size() - done, 1u << 16);
            chunk.resize(count * 4);
            reader.read(chunk.data(), chunk.size());
            for (std::size_t i = 0; i < count; ++i) {
                std::uint32_t bits = 0;
                for (int b = 3; b >= 0; --b)
                    bits = (bits << 8) | static_cast<unsigned char>(chunk[i * 4 + b]);
                const float f = std::bit_cast<float>(bits);
                if (!std::isfinite(f))
                    fail_data("corrupt data: non-finite value in layer '" + layer.name + "'");
                values[done + i] = static_cast<double>(f);
            }
            done += count;
        }
        set.layers.push_back(std::move(layer));
    }
    if (!reader.at_end()) fail_data("corrupt data: trailing bytes after ACTV1 payload");
    return set;
}

// ---------------------------------------------------------------------------
// Similarity matrix text: L lines of L comma-separated values, 17 significant
// digits. A row of all zeros marks a degenerate layer, whose diagonal is 0.
// ---------------------------------------------------------------------------

inline constexpr double kWriteSymmetryTolerance = 1e-9;
inline constexpr double kReadSymmetryTolerance = 1e-6;

namespace detail {

inline bool is_zero_row(const Matrix& m, std::size_t i) {
    for (std::size_t j = 0; j < m.cols(); ++j)
        if (m(i, j) != 0.0) return false;
    return true;
}

inline void check_similarity_values(const Matrix& m, double tol) {
    if (m.rows() != m.cols())
        fail_data("non-square similarity matrix: " + std::to_string(m.rows()) + "x" +
                  std::to_string(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (!std::isfinite(m(i, j))) fail_data("similarity matrix has a non-finite entry");
            if (std::abs(m(i, j) - m(j, i)) > tol)
                fail_data("similarity matrix is not symmetric at (" + std::to_string(i + 1) + "," +
                          std::to_string(j + 1) + ")");
        }
        if (std::abs(m(i, i) - 1.0) > tol && !is_zero_row(m, i))
            fail_data("similarity matrix diagonal entry " + std::to_string(i + 1) + " is " +
                      format_double(m(i, i)) + ", expected 1");
    }
}

}  // namespace detail

inline void write_similarity(const Matrix& m, std::ostream& out) {
    detail::check_similarity_values(m, kWriteSymmetryTolerance);
    std::string text;
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            if (j > 0) text.push_back(',');
            text += detail::format_double(m(i, j));
        }
        text.push_back('\n');
    }
    out << text;
    if (!out) fail_data("write failed");
}

inline Matrix read_similarity(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        for (auto field : detail::split(line, ',')) {
            double v = 0.0;
            if (!detail::parse_double(field, v))
                fail_data("similarity line " + std::to_string(line_no) + ": unparseable value '" +
                          std::string(field) + "'");
            row.push_back(v);
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) fail_data("similarity matrix is empty");
    const std::size_t n = rows.size();
    for (std::size_t i = 0; i < n; ++i)
        if (rows[i].size() != n)
            fail_data("non-square similarity matrix: line " + std::to_string(i + 1) + " has " +
                      std::to_string(rows[i].size()) + " columns, expected " + std::to_string(n));
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) m(i, j) = rows[i][j];
    detail::check_similarity_values(m, kReadSymmetryTolerance);
    return m;
}

// ---------------------------------------------------------------------------
// Score tables: `segment_index<TAB>keep_mask_hex<TAB>score` per line.
// Blank lines and `#` comments are skipped. The comment `# status: partial`
// marks a file an exporter could not finish; planners refuse such tables.
// ---------------------------------------------------------------------------

struct ScoreRecord {
    std::uint32_t segment_index = 0;
    std::uint64_t keep_mask = 0;
    double score = 0.0;

    friend bool operator==(const ScoreRecord&, const ScoreRecord&) = default;
};

struct ScoreTable {
    std::vector<ScoreRecord> records;
    bool partial = false;

    [[nodiscard]] const ScoreRecord* find(std::uint32_t segment, std::uint64_t mask) const {
        for (const auto& r : records)
            if (r.segment_index == segment && r.keep_mask == mask) return &r;
        return nullptr;
    }
};

inline constexpr std::string_view kPartialMarker = "# status: partial";

inline ScoreTable read_score_table(std::istream& in) {
    ScoreTable table;
    std::map<std::pair<std::uint32_t, std::uint64_t>, std::size_t> seen;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos) continue;
        if (line[first] == '#') {
            if (std::string_view(line).substr(first) == kPartialMarker) table.partial = true;
            continue;
        }
        const std::string where = "score table line " + std::to_string(line_no);
        auto fields = detail::split(line, '\t');
        if (fields.size() != 3)
            fail_data(where + ": expected 3 tab-separated fields, got " +
                      std::to_string(fields.size()));
        ScoreRecord rec;
        {
            auto f = fields[0];
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), rec.segment_index);
            if (ec != std::errc{} || p != f.data() + f.size() || f.empty())
                fail_data(where + ": unparseable segment index '" + std::string(f) + "'");
        }
        {
            auto f = fields[1];
            if (f.size() > 2 && f[0] == '0' && (f[1] == 'x' || f[1] == 'X')) f.remove_prefix(2);
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), rec.keep_mask, 16);
            if (ec != std::errc{} || p != f.data() + f.size() || f.empty())
                fail_data(where + ": unparseable keep mask '" + std::string(fields[1]) + "'");
        }
        if (!detail::parse_double(fields[2], rec.score) || !std::isfinite(rec.score))
            fail_data(where + ": unparseable score '" + std::string(fields[2]) + "'");
        if (rec.keep_mask == 0) fail_data(where + ": empty keep mask");
        const auto key = std::make_pair(rec.segment_index, rec.keep_mask);
        if (auto it = seen.find(key); it != seen.end())
            fail_data(where + ": duplicate entry for segment " + std::to_string(rec.segment_index) +
                      " mask " + std::string(fields[1]) + " (first seen on line " +
                      std::to_string(it->second) + ")");
        seen.emplace(key, line_no);
        table.records.push_back(rec);
    }
    return table;
}

inline void write_score_table(const ScoreTable& table, std::ostream& out) {
    std::ostringstream text;
    if (table.partial) text << kPartialMarker << '\n';
    for (const auto& r : table.records) {
        if (r.keep_mask == 0) fail_data("score table record with empty keep mask");
        std::array<char, 32> hex{};
        auto [end, ec] = std::to_chars(hex.data(), hex.data() + hex.size(), r.keep_mask, 16);
        text << r.segment_index << '\t' << std::string_view(hex.data(), end - hex.data()) << '\t'
             << detail::format_double(r.score) << '\n';
    }
    out << text.str();
    if (!out) fail_data("write failed");
}

/// Layer count a score table implies: per segment, the bit length of the
/// union of its masks, summed over segments 0..max index.
inline std::size_t implied_layer_count(const ScoreTable& table) {
    std::map<std::uint32_t, std::uint64_t> unions;
    for (const auto& r : table.records) unions[r.segment_index] |= r.keep_mask;
    std::size_t total = 0;
    std::uint32_t expected = 0;
    for (const auto& [seg, bits] : unions) {
        if (seg != expected) fail_data("score table skips segment " + std::to_string(expected));
        total += static_cast<std::size_t>(std::bit_width(bits));
        ++expected;
    }
    return total;
}

}  // namespace sglp
