// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "support.hpp"

namespace sglp {
namespace {

using testing::random_matrix;

// Oracle: HSIC via explicit centering matrix H = I - 11ᵀ/n and linear kernels,
// with no shortcuts shared with the library.
double hsic_oracle(const Matrix& x, const Matrix& y) {
    const std::size_t n = x.rows();
    auto gram = [n](const Matrix& a) {
        std::vector<double> g(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t c = 0; c < a.cols(); ++c) g[i * n + j] += a(i, c) * a(j, c);
        return g;
    };
    auto h = [n](std::size_t i, std::size_t j) { return (i == j ? 1.0 : 0.0) - 1.0 / static_cast<double>(n); };
    auto center = [&](const std::vector<double>& g) {
        std::vector<double> tmp(n * n, 0.0), out(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t m = 0; m < n; ++m) tmp[i * n + j] += h(i, m) * g[m * n + j];
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t m = 0; m < n; ++m) out[i * n + j] += tmp[i * n + m] * h(m, j);
        return out;
    };
    const auto kx = center(gram(x));
    const auto ly = gram(y);
    double tr = 0.0;  // tr(H K H L)
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) tr += kx[i * n + j] * ly[j * n + i];
    return tr / static_cast<double>((n - 1) * (n - 1));
}

double cka_oracle(const Matrix& x, const Matrix& y) {
    return hsic_oracle(x, y) / std::sqrt(hsic_oracle(x, x) * hsic_oracle(y, y));
}

Matrix rotate(const Matrix& x, CounterRng& rng) {
    return matmul(x, random_orthogonal(x.cols(), rng));
}

TEST(CenterGram, TwoByTwoIdentity) {
    const Matrix c = center_gram(Matrix::identity(2));
    EXPECT_DOUBLE_EQ(c(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(c(0, 1), -0.5);
    EXPECT_DOUBLE_EQ(c(1, 0), -0.5);
    EXPECT_DOUBLE_EQ(c(1, 1), 0.5);
}

TEST(CenterGram, RowsAndColumnsSumToZero) {
    CounterRng rng(1, 0);
    const Matrix x = random_matrix(7, 3, rng);
    const Matrix c = center_gram(matmul_nt(x, x));
    for (std::size_t i = 0; i < 7; ++i) {
        double row = 0.0, col = 0.0;
        for (std::size_t j = 0; j < 7; ++j) {
            row += c(i, j);
            col += c(j, i);
        }
        EXPECT_NEAR(row, 0.0, 1e-10);
        EXPECT_NEAR(col, 0.0, 1e-10);
    }
}

TEST(CenterGram, NonSquareIsUsageError) {
    EXPECT_TRUE(testing::throws_error([] { center_gram(Matrix(2, 3)); }, ErrorKind::usage, ""));
}

TEST(Cka, MatchesExplicitHsicOracle) {
    CounterRng rng(11, 0);
    std::vector<Matrix> layers;
    for (int l = 0; l < 4; ++l) layers.push_back(random_matrix(8, 3, rng));
    for (std::size_t a = 0; a < 4; ++a)
        for (std::size_t b = 0; b < 4; ++b) {
            const double expected = cka_oracle(layers[a], layers[b]);
            EXPECT_NEAR(cka_pair(layers[a], layers[b]), expected, 1e-12);
            EXPECT_NEAR(cka_pair_gram(layers[a], layers[b]), expected, 1e-12);
        }
}

TEST(Cka, SelfSimilarityIsOne) {
    CounterRng rng(2, 0);
    for (int t = 0; t < 20; ++t) {
        const Matrix x = random_matrix(10 + t, 1 + t % 6, rng);
        EXPECT_NEAR(cka_pair(x, x), 1.0, 1e-9);
    }
}

TEST(Cka, SymmetricAndBounded) {
    CounterRng rng(3, 0);
    for (int t = 0; t < 20; ++t) {
        const Matrix x = random_matrix(12, 4, rng), y = random_matrix(12, 2 + t % 5, rng);
        const double xy = cka_pair(x, y);
        EXPECT_NEAR(xy, cka_pair(y, x), 1e-9);
        EXPECT_GE(xy, 0.0);
        EXPECT_LE(xy, 1.0);
    }
}

TEST(Cka, InvariantToIsotropicScaleAndRotation) {
    CounterRng rng(4, 0);
    for (int t = 0; t < 20; ++t) {
        const Matrix x = random_matrix(30, 5, rng), y = random_matrix(30, 4, rng);
        const double base = cka_pair(x, y);
        Matrix scaled = x;
        const double s = rng.uniform(0.01, 100.0);
        for (auto& v : scaled.values()) v *= s;
        EXPECT_NEAR(cka_pair(scaled, y), base, 1e-6);
        EXPECT_NEAR(cka_pair(rotate(x, rng), rotate(y, rng)), base, 1e-6);
    }
}

TEST(Cka, InvariantToJointSamplePermutation) {
    CounterRng rng(5, 0);
    const Matrix x = random_matrix(25, 3, rng), y = random_matrix(25, 6, rng);
    std::vector<std::size_t> perm(25);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
    Matrix px(25, 3), py(25, 6);
    for (std::size_t i = 0; i < 25; ++i) {
        for (std::size_t c = 0; c < 3; ++c) px(i, c) = x(perm[i], c);
        for (std::size_t c = 0; c < 6; ++c) py(i, c) = y(perm[i], c);
    }
    EXPECT_NEAR(cka_pair(px, py), cka_pair(x, y), 1e-9);
}

TEST(Cka, InvariantToColumnOffsets) {
    CounterRng rng(6, 0);
    const Matrix x = random_matrix(20, 3, rng), y = random_matrix(20, 3, rng);
    Matrix shifted = x;
    for (std::size_t i = 0; i < 20; ++i)
        for (std::size_t c = 0; c < 3; ++c) shifted(i, c) += 5.0 * static_cast<double>(c + 1);
    EXPECT_NEAR(cka_pair(shifted, y), cka_pair(x, y), 1e-9);
}

TEST(Cka, IndependentGaussiansAreDissimilar) {
    CounterRng rng(7, 0);
    const Matrix x = random_matrix(1000, 4, rng), y = random_matrix(1000, 4, rng);
    EXPECT_LT(cka_pair(x, y), 0.05);
}

TEST(Cka, SampleCountMismatchIsDataError) {
    EXPECT_TRUE(testing::throws_error([] { cka_pair(Matrix(3, 2), Matrix(4, 2)); }, ErrorKind::data, ""));
}

TEST(SimilarityMatrix, DegenerateLayerPinnedToZero) {
    CounterRng rng(8, 0);
    ActivationSet set;
    set.layers.push_back({"a", random_matrix(16, 3, rng)});
    Matrix constant(16, 3);
    for (auto& v : constant.values()) v = 2.5;
    set.layers.push_back({"flat", constant});
    set.layers.push_back({"c", random_matrix(16, 2, rng)});
    const auto sim = similarity_matrix(set);
    ASSERT_EQ(sim.degenerate_layers, std::vector<std::size_t>{1});
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_EQ(sim.values(1, j), 0.0);
        EXPECT_EQ(sim.values(j, 1), 0.0);
    }
    EXPECT_NEAR(sim.values(0, 0), 1.0, 1e-9);
    EXPECT_NEAR(sim.values(2, 2), 1.0, 1e-9);
    EXPECT_EQ(sim.layer_names, (std::vector<std::string>{"a", "flat", "c"}));
}

TEST(SimilarityMatrix, SymmetricWithUnitDiagonalAndMatchesPairs) {
    CounterRng rng(9, 0);
    ActivationSet set;
    for (int l = 0; l < 6; ++l) set.layers.push_back({"l" + std::to_string(l), random_matrix(20, 2 + l, rng)});
    const auto sim = similarity_matrix(set);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
            EXPECT_EQ(sim.values(i, j), sim.values(j, i));
            EXPECT_NEAR(sim.values(i, j), cka_pair(set.layers[i].matrix, set.layers[j].matrix), 1e-12);
        }
    // Written and re-read without tripping the invariant checks.
    std::stringstream io;
    write_similarity(sim.values, io);
    EXPECT_NO_THROW(read_similarity(io));
}

TEST(SimilarityMatrix, NeedsTwoLayers) {
    CounterRng rng(10, 0);
    ActivationSet set;
    set.layers.push_back({"only", random_matrix(5, 2, rng)});
    EXPECT_THROW(similarity_matrix(set), Error);
}

}  // namespace
}  // namespace sglp
