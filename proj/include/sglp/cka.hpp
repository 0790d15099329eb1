// SPDX-License-Identifier: Apache-2.0
//
// Linear centered kernel alignment between layer representations.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sglp/activation_io.hpp"
#include "sglp/error.hpp"
#include "sglp/matrix.hpp"

namespace sglp {

/// Denominator guard; a centered representation whose Frobenius norm is at
/// or below this is treated as constant.
inline constexpr double kCkaEpsilon = 1e-12;

struct SimilarityMatrix {
    Matrix values;
    std::vector<std::string> layer_names;
    std::vector<std::size_t> degenerate_layers;  // 0-based, constant activations

    [[nodiscard]] std::size_t size() const noexcept { return values.rows(); }
};

/// H G H with H = I - (1/n) 11ᵀ, computed as G minus row/column means plus
/// the grand mean.
inline Matrix center_gram(const Matrix& gram) {
    if (gram.rows() != gram.cols())
        fail_usage("center_gram: matrix is " + std::to_string(gram.rows()) + "x" +
                   std::to_string(gram.cols()) + ", expected square");
    const std::size_t n = gram.rows();
    if (n == 0) return gram;
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> row_mean(n, 0.0), col_mean(n, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            row_mean[i] += gram(i, j);
            col_mean[j] += gram(i, j);
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        grand += row_mean[i];
        row_mean[i] *= inv_n;
        col_mean[i] *= inv_n;
    }
    grand *= inv_n * inv_n;
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            out(i, j) = gram(i, j) - row_mean[i] - col_mean[j] + grand;
    return out;
}

namespace detail {

inline void check_pair(const Matrix& x, const Matrix& y) {
    if (x.rows() != y.rows())
        fail_data("cka: sample count mismatch (" + std::to_string(x.rows()) + " vs " +
                  std::to_string(y.rows()) + ")");
    if (x.rows() < 2) fail_data("cka: need at least 2 samples");
}

inline double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace detail

/// Feature-space linear CKA:
///   ‖XcᵀYc‖_F² / (‖XcᵀXc‖_F ‖YcᵀYc‖_F)
/// with column-centered Xc, Yc. Returns 0 when either side is constant.
inline double cka_pair(const Matrix& x, const Matrix& y) {
    detail::check_pair(x, y);
    const Matrix xc = center_columns(x);
    const Matrix yc = center_columns(y);
    if (frobenius(xc) <= kCkaEpsilon || frobenius(yc) <= kCkaEpsilon) return 0.0;
    const double cross = frobenius_squared(matmul_tn(xc, yc));
    const double self_x = frobenius(matmul_tn(xc, xc));
    const double self_y = frobenius(matmul_tn(yc, yc));
    const double denom = self_x * self_y;
    if (denom <= kCkaEpsilon) return 0.0;
    return detail::clamp_unit(cross / denom);
}

/// Kernel-space route to the same quantity: HSIC(K,L) / sqrt(HSIC(K,K) HSIC(L,L))
/// on n x n linear Gram matrices. O(n²d); used as a cross-check.
inline double cka_pair_gram(const Matrix& x, const Matrix& y) {
    detail::check_pair(x, y);
    const Matrix kc = center_gram(matmul_nt(x, x));
    const Matrix lc = center_gram(matmul_nt(y, y));
    double kl = 0.0, kk = 0.0, ll = 0.0;
    const auto kv = kc.values();
    const auto lv = lc.values();
    for (std::size_t i = 0; i < kv.size(); ++i) {
        kl += kv[i] * lv[i];
        kk += kv[i] * kv[i];
        ll += lv[i] * lv[i];
    }
    if (std::sqrt(std::abs(kk)) <= kCkaEpsilon || std::sqrt(std::abs(ll)) <= kCkaEpsilon)
        return 0.0;
    const double denom = std::sqrt(kk) * std::sqrt(ll);
    if (denom <= kCkaEpsilon) return 0.0;
    return detail::clamp_unit(kl / denom);
}

inline bool is_degenerate(const Matrix& x) { return frobenius(center_columns(x)) <= kCkaEpsilon; }

/// Pairwise CKA over every layer pair. Degenerate (constant) layers get 0 in
/// their whole row and column, diagonal included, and are listed in
/// `degenerate_layers`.
inline SimilarityMatrix similarity_matrix(const ActivationSet& set) {
    validate(set, 2);
    const std::size_t L = set.layer_count();
    SimilarityMatrix out;
    out.values = Matrix(L, L);
    out.layer_names = set.names();
    for (std::size_t i = 0; i < L; ++i)
        if (is_degenerate(set.layers[i].matrix)) out.degenerate_layers.push_back(i);
    for (std::size_t i = 0; i < L; ++i) {
        for (std::size_t j = i; j < L; ++j) {
            const double v = cka_pair(set.layers[i].matrix, set.layers[j].matrix);
            out.values(i, j) = v;
            out.values(j, i) = v;
        }
    }
    return out;
}

}  // namespace sglp
