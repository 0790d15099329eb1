// SPDX-License-Identifier: Apache-2.0
//
// Embedded oracle suites behind `sglp selfcheck`. Each suite cross-checks an
// implementation path against an independent computation on seeded inputs.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "sglp/cka.hpp"
#include "sglp/fisher.hpp"
#include "sglp/matrix.hpp"
#include "sglp/planner.hpp"
#include "sglp/rng.hpp"
#include "sglp/toynet.hpp"

namespace sglp {

struct SuiteResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

inline Matrix random_normal_matrix(std::size_t rows, std::size_t cols, CounterRng& rng) {
    Matrix m(rows, cols);
    for (double& v : m.values()) v = rng.normal();
    return m;
}

/// Random orthogonal matrix from modified Gram-Schmidt on Gaussian columns.
inline Matrix random_orthogonal(std::size_t d, CounterRng& rng) {
    Matrix q = random_normal_matrix(d, d, rng);
    for (std::size_t j = 0; j < d; ++j) {
        for (std::size_t p = 0; p < j; ++p) {
            double dot = 0.0;
            for (std::size_t i = 0; i < d; ++i) dot += q(i, j) * q(i, p);
            for (std::size_t i = 0; i < d; ++i) q(i, j) -= dot * q(i, p);
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < d; ++i) norm += q(i, j) * q(i, j);
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < d; ++i) q(i, j) /= norm;
    }
    return q;
}

/// Smallest |pre-activation| over every hidden unit and row. Central
/// differences are only meaningful when no ReLU sits within a step of its
/// kink.
inline double relu_margin(const Network& net, const Matrix& batch) {
    const auto trace = detail::run_forward(net, batch);
    double m = std::numeric_limits<double>::infinity();
    for (const auto& pre : trace.pre)
        for (double v : pre.values()) m = std::min(m, std::abs(v));
    return m;
}

/// Gaussian batch redrawn until every pre-activation clears `margin`.
inline Matrix smooth_batch(const Network& net, std::size_t rows, CounterRng& rng, double margin = 1e-3) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Matrix batch = random_normal_matrix(rows, net.spec.input_dim, rng);
        if (relu_margin(net, batch) > margin) return batch;
    }
    fail_internal("could not draw a batch away from ReLU kinks");
}

/// Largest relative error between reverse-mode and central-difference
/// gradients, with relative error |a-b| / max(1e-6, |a|+|b|).
inline double max_gradient_error(const Network& net, const Matrix& batch,
                                 const std::vector<std::size_t>& labels, double step = 1e-5) {
    const GradientSet analytic = backward(net, batch, labels);
    std::vector<double> exact = analytic.tensors.flatten();
    Network probe = net;
    std::vector<std::span<double>> tensors;
    probe.params.for_each_tensor([&](std::span<double> s) { tensors.push_back(s); });
    double worst = 0.0;
    std::size_t flat = 0;
    for (auto tensor : tensors) {
        for (std::size_t i = 0; i < tensor.size(); ++i, ++flat) {
            const double saved = tensor[i];
            tensor[i] = saved + step;
            const double up = loss(forward(probe, batch).logits, labels);
            tensor[i] = saved - step;
            const double down = loss(forward(probe, batch).logits, labels);
            tensor[i] = saved;
            const double numeric = (up - down) / (2.0 * step);
            const double err = std::abs(numeric - exact[flat]) /
                               std::max(1e-6, std::abs(numeric) + std::abs(exact[flat]));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

inline SuiteResult selfcheck_fisher() {
    SuiteResult r{"fisher-dp-vs-brute-force", true, ""};
    CounterRng rng(20240501, 0);
    int instances = 0;
    for (int t = 0; t < 200; ++t) {
        const std::size_t L = 2 + rng.below(9);
        const std::size_t k = 1 + rng.below(std::min<std::size_t>(L, 5));
        std::vector<double> a(L);
        for (double& v : a) v = rng.uniform(0.0, 10.0);
        const auto dp = fisher_segment(a, k);
        const auto bf = brute_force_segment(a, k);
        if (dp.loss != bf.best.loss || dp.starts != bf.best.starts) {
            r.passed = false;
            r.detail = "mismatch at instance " + std::to_string(t);
            return r;
        }
        ++instances;
    }
    r.detail = std::to_string(instances) + " instances agree";
    return r;
}

inline SuiteResult selfcheck_counting() {
    SuiteResult r{"segmentation-count", true, ""};
    std::vector<double> a;
    for (std::size_t L = 1; L <= 10; ++L) {
        a.push_back(static_cast<double>(L * 7 % 5));
        for (std::size_t k = 1; k <= L; ++k) {
            const auto bf = brute_force_segment(a, k);
            if (bf.enumerated != count_segmentations(L, k)) {
                r.passed = false;
                r.detail = "L=" + std::to_string(L) + " k=" + std::to_string(k);
                return r;
            }
        }
    }
    r.detail = "C(L-1,k-1) matches enumeration for L<=10";
    return r;
}

inline SuiteResult selfcheck_cka() {
    SuiteResult r{"cka-invariance", true, ""};
    CounterRng rng(77, 0);
    auto fail = [&](const std::string& what) {
        r.passed = false;
        r.detail = what;
        return r;
    };
    for (int t = 0; t < 10; ++t) {
        const std::size_t n = 12, dx = 4, dy = 3;
        const Matrix x = random_normal_matrix(n, dx, rng);
        const Matrix y = random_normal_matrix(n, dy, rng);
        const double base = cka_pair(x, y);
        if (std::abs(cka_pair(x, x) - 1.0) > 1e-9) return fail("self-similarity");
        if (std::abs(base - cka_pair(y, x)) > 1e-9) return fail("symmetry");
        if (std::abs(base - cka_pair_gram(x, y)) > 1e-9) return fail("gram vs feature form");
        Matrix scaled = x;
        for (double& v : scaled.values()) v *= -2.0;
        if (std::abs(base - cka_pair(scaled, y)) > 1e-9) return fail("isotropic scale");
        if (std::abs(base - cka_pair(matmul(x, random_orthogonal(dx, rng)), y)) > 1e-6)
            return fail("orthogonal transform");
        Matrix xp(n, dx), yp(n, dy);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t src = (i * 5 + 3) % n;
            for (std::size_t j = 0; j < dx; ++j) xp(i, j) = x(src, j);
            for (std::size_t j = 0; j < dy; ++j) yp(i, j) = y(src, j);
        }
        if (std::abs(base - cka_pair(xp, yp)) > 1e-9) return fail("sample permutation");
    }
    if (cka_pair(Matrix(5, 2, 3.0), random_normal_matrix(5, 2, rng)) != 0.0)
        return fail("degenerate layer not pinned to 0");
    r.detail = "self, symmetry, scale, rotation, permutation, gram form, degenerate";
    return r;
}

inline SuiteResult selfcheck_gradients() {
    SuiteResult r{"gradient-oracle", true, ""};
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 5; ++s) {
        NetworkSpec spec{3, 4, 3, 3, s % 2 == 0, 900 + s};
        const Network net = build_network(spec);
        CounterRng rng(s, 1);
        const Matrix batch = smooth_batch(net, 6, rng);
        std::vector<std::size_t> labels;
        for (int i = 0; i < 6; ++i) labels.push_back(rng.below(3));
        worst = std::max(worst, max_gradient_error(net, batch, labels));
    }
    r.passed = worst <= 1e-4;
    r.detail = "max relative error " + detail::format_double(worst);
    return r;
}

inline SuiteResult selfcheck_search_space() {
    SuiteResult r{"search-space-reduction", true, ""};
    for (std::size_t L = 2; L <= 14; ++L) {
        for (std::size_t k = 2; k <= L; ++k) {
            Segmentation seg;
            seg.layer_count = L;
            for (std::size_t i = 0; i < k; ++i) seg.starts.push_back(i * L / k);
            std::uint64_t expected = 0;
            for (auto size : seg.sizes()) expected += (std::uint64_t{1} << size) - 1;
            const auto got = candidate_count(seg, Budget::free_choice());
            if (got != expected || got >= (std::uint64_t{1} << L) - 1) {
                r.passed = false;
                r.detail = "L=" + std::to_string(L) + " k=" + std::to_string(k);
                return r;
            }
        }
    }
    r.detail = "segment-wise count below 2^L-1 for every k>=2, L<=14";
    return r;
}

inline std::vector<SuiteResult> run_selfcheck() {
    return {selfcheck_fisher(), selfcheck_counting(), selfcheck_cka(), selfcheck_gradients(),
            selfcheck_search_space()};
}

}  // namespace sglp
