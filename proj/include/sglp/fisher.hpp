// SPDX-License-Identifier: Apache-2.0
//
// Fisher optimal segmentation of an ordered sequence into k contiguous
// segments that minimize the total within-segment sum of squared deviations.
//
// Indices are 0-based in this API; serialized segmentations use 1-based
// split starts.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "sglp/error.hpp"
#include "sglp/matrix.hpp"

namespace sglp {

/// Row sums of a similarity matrix, the ordered sequence being segmented.
inline std::vector<double> row_sums(const Matrix& m) {
    if (m.rows() != m.cols()) fail_data("row_sums: similarity matrix is not square");
    std::vector<double> sums(m.rows(), 0.0);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) sums[i] += m(i, j);
    return sums;
}

namespace detail {

inline void check_sequence(const std::vector<double>& a) {
    if (a.size() < 1) fail_data("ordered sequence is empty");
    for (double v : a)
        if (!std::isfinite(v)) fail_data("ordered sequence has a non-finite entry");
}

}  // namespace detail

/// Sum of squared deviations of a[first..last] from their own mean.
inline double diameter(const std::vector<double>& a, std::size_t first, std::size_t last) {
    if (first > last) fail_usage("diameter: first index after last index");
    if (last >= a.size()) fail_usage("diameter: index out of range");
    double sum = 0.0;
    for (std::size_t i = first; i <= last; ++i) sum += a[i];
    const double mean = sum / static_cast<double>(last - first + 1);
    double ssd = 0.0;
    for (std::size_t i = first; i <= last; ++i) ssd += (a[i] - mean) * (a[i] - mean);
    return ssd;
}

/// All diameters D(r, s), r <= s, from prefix sums of the globally centered
/// sequence. Entries are clamped at 0 against cancellation.
class DiameterTable {
public:
    explicit DiameterTable(const std::vector<double>& a) : n_(a.size()), table_(n_ * n_, 0.0) {
        detail::check_sequence(a);
        double mean = 0.0;
        for (double v : a) mean += v;
        mean /= static_cast<double>(n_);
        std::vector<double> s1(n_ + 1, 0.0), s2(n_ + 1, 0.0);
        for (std::size_t i = 0; i < n_; ++i) {
            const double c = a[i] - mean;
            s1[i + 1] = s1[i] + c;
            s2[i + 1] = s2[i] + c * c;
        }
        for (std::size_t r = 0; r < n_; ++r) {
            for (std::size_t s = r + 1; s < n_; ++s) {
                const double cnt = static_cast<double>(s - r + 1);
                const double sum = s1[s + 1] - s1[r];
                const double sq = s2[s + 1] - s2[r];
                table_[r * n_ + s] = std::max(0.0, sq - sum * sum / cnt);
            }
        }
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_; }

    [[nodiscard]] double operator()(std::size_t first, std::size_t last) const {
        if (first > last || last >= n_) fail_usage("diameter table: invalid range");
        return table_[first * n_ + last];
    }

private:
    std::size_t n_;
    std::vector<double> table_;
};

struct Segmentation {
    std::size_t layer_count = 0;
    std::vector<std::size_t> starts;  // 0-based; starts[0] == 0, strictly increasing
    double loss = 0.0;

    [[nodiscard]] std::size_t k() const noexcept { return starts.size(); }
    [[nodiscard]] std::size_t segment_begin(std::size_t seg) const { return starts.at(seg); }
    [[nodiscard]] std::size_t segment_end(std::size_t seg) const {  // exclusive
        return seg + 1 < starts.size() ? starts[seg + 1] : layer_count;
    }
    [[nodiscard]] std::size_t segment_size(std::size_t seg) const {
        return segment_end(seg) - segment_begin(seg);
    }
    [[nodiscard]] std::vector<std::size_t> sizes() const {
        std::vector<std::size_t> out;
        for (std::size_t s = 0; s < k(); ++s) out.push_back(segment_size(s));
        return out;
    }
    [[nodiscard]] std::size_t segment_of(std::size_t layer) const {
        auto it = std::upper_bound(starts.begin(), starts.end(), layer);
        return static_cast<std::size_t>(it - starts.begin()) - 1;
    }

    friend bool operator==(const Segmentation&, const Segmentation&) = default;
};

/// Checks that `seg` tiles 0..layer_count-1 contiguously.
inline void validate(const Segmentation& seg) {
    if (seg.layer_count == 0) fail_data("segmentation covers no layers");
    if (seg.starts.empty() || seg.starts.front() != 0)
        fail_data("segmentation must start at the first layer");
    for (std::size_t i = 1; i < seg.starts.size(); ++i)
        if (seg.starts[i] <= seg.starts[i - 1])
            fail_data("segmentation split starts are not strictly increasing");
    if (seg.starts.back() >= seg.layer_count) fail_data("segmentation split start beyond last layer");
}

/// Σ over segments of D, accumulated left to right.
inline double segmentation_loss(const DiameterTable& table, const std::vector<std::size_t>& starts) {
    double loss = 0.0;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        const std::size_t end = i + 1 < starts.size() ? starts[i + 1] : table.size();
        loss += table(starts[i], end - 1);
    }
    return loss;
}

/// Binomial C(L-1, k-1): number of ways to cut L ordered items into k
/// non-empty contiguous segments.
inline std::uint64_t count_segmentations(std::uint64_t layers, std::uint64_t k) {
    if (k < 1 || k > layers)
        fail_usage("count_segmentations: need 1 <= k <= L (k=" + std::to_string(k) +
                   ", L=" + std::to_string(layers) + ")");
    const std::uint64_t n = layers - 1;
    std::uint64_t r = std::min(k - 1, n - (k - 1));
    unsigned __int128 acc = 1;
    for (std::uint64_t i = 0; i < r; ++i) {
        acc = acc * (n - i) / (i + 1);
        if (acc > std::numeric_limits<std::uint64_t>::max())
            fail_usage("count_segmentations: result exceeds 64 bits");
    }
    return static_cast<std::uint64_t>(acc);
}

namespace detail {

inline void check_k(std::size_t L, std::size_t k) {
    if (k < 1 || k > L)
        fail_usage("segment count k=" + std::to_string(k) + " must be between 1 and L=" +
                   std::to_string(L));
}

}  // namespace detail

/// Exact dynamic program. best[m][s] holds the optimal loss of cutting the
/// prefix 0..s into m+1 segments; losses accumulate left to right exactly as
/// segmentation_loss does. Ties resolve to the lexicographically smallest
/// split starts.
inline Segmentation fisher_segment(const std::vector<double>& a, std::size_t k) {
    detail::check_sequence(a);
    const std::size_t L = a.size();
    detail::check_k(L, k);
    const DiameterTable table(a);

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> best(k, std::vector<double>(L, inf));
    // starts_of[m][s]: split starts (excluding the leading 0) of the chosen
    // optimum for state (m, s).
    std::vector<std::vector<std::vector<std::size_t>>> starts_of(
        k, std::vector<std::vector<std::size_t>>(L));

    for (std::size_t s = 0; s < L; ++s) best[0][s] = table(0, s);
    for (std::size_t m = 1; m < k; ++m) {
        for (std::size_t s = m; s < L; ++s) {
            // last segment is j..s, prefix 0..j-1 has m segments
            for (std::size_t j = m; j <= s; ++j) {
                const double prev = best[m - 1][j - 1];
                if (prev == inf) continue;
                const double cand = prev + table(j, s);
                std::vector<std::size_t> cand_starts = starts_of[m - 1][j - 1];
                cand_starts.push_back(j);
                if (cand < best[m][s] ||
                    (cand == best[m][s] && cand_starts < starts_of[m][s])) {
                    best[m][s] = cand;
                    starts_of[m][s] = std::move(cand_starts);
                }
            }
        }
    }

    Segmentation seg;
    seg.layer_count = L;
    seg.starts.push_back(0);
    const auto& tail = starts_of[k - 1][L - 1];
    seg.starts.insert(seg.starts.end(), tail.begin(), tail.end());
    seg.loss = best[k - 1][L - 1];
    return seg;
}

inline constexpr std::uint64_t kBruteForceLimit = 1'000'000;

struct BruteForceResult {
    Segmentation best;
    std::uint64_t enumerated = 0;
};

/// Exhaustive search over all C(L-1, k-1) placements in lexicographic order;
/// a later candidate replaces the incumbent only when strictly better.
inline BruteForceResult brute_force_segment(const std::vector<double>& a, std::size_t k) {
    detail::check_sequence(a);
    const std::size_t L = a.size();
    detail::check_k(L, k);
    if (count_segmentations(L, k) > kBruteForceLimit)
        fail_usage("brute force would enumerate more than " + std::to_string(kBruteForceLimit) +
                   " segmentations; use fisher_segment instead");
    const DiameterTable table(a);

    BruteForceResult result;
    result.best.layer_count = L;
    result.best.loss = std::numeric_limits<double>::infinity();

    // Split starts 1..L-1 choose k-1, enumerated lexicographically.
    std::vector<std::size_t> starts(k);
    starts[0] = 0;
    for (std::size_t i = 1; i < k; ++i) starts[i] = i;
    while (true) {
        ++result.enumerated;
        const double loss = segmentation_loss(table, starts);
        if (loss < result.best.loss) {
            result.best.loss = loss;
            result.best.starts = starts;
        }
        std::size_t i = k - 1;
        while (i >= 1 && starts[i] == L - (k - i)) --i;
        if (i == 0) break;
        ++starts[i];
        for (std::size_t j = i + 1; j < k; ++j) starts[j] = starts[j - 1] + 1;
    }
    return result;
}

}  // namespace sglp
