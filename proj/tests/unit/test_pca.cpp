#include <gtest/gtest.h>

#include <random>

#include "kjm/error.hpp"
#include "kjm/pca.hpp"

using namespace kjm;

namespace {

std::vector<double> gaussian_rows(std::size_t n, std::size_t length, unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> rows(n * length);
    for (auto& v : rows) v = d(gen);
    return rows;
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

TEST(Pca, DeinterlaceTakesContiguousColumns) {
    const std::size_t rows = 3;
    std::vector<double> y(rows * 270);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<double>(i);
    const auto blocks = deinterlace(y, rows, 3, 90);
    ASSERT_EQ(blocks.size(), 3u);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < 90; ++j) {
            EXPECT_EQ(blocks[2][r * 90 + j], y[r * 270 + 180 + j]);
        }
    }
    EXPECT_EQ(interlace(blocks, rows, 90), y);
}

TEST(Pca, HandComputedAxes) {
    // points (+-2,0,0), (0,+-1,0): covariance diag(8/3, 2/3, 0)
    const std::vector<double> rows = {2, 0, 0, -2, 0, 0, 0, 1, 0, 0, -1, 0};
    const auto one = fit_pca(rows, 3, 0.75);
    ASSERT_EQ(one.k, 1u);
    EXPECT_NEAR(one.eigenvalues[0], 8.0 / 3.0, 1e-12);
    EXPECT_NEAR(one.explained[0], 0.8, 1e-12);
    EXPECT_NEAR(one.basis[0], 1.0, 1e-12);

    const auto two = fit_pca(rows, 3, 0.999);
    ASSERT_EQ(two.k, 2u);
    EXPECT_NEAR(two.eigenvalues[1], 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(two.explained[1], 1.0, 1e-12);
    EXPECT_NEAR(std::abs(two.basis[3 + 1]), 1.0, 1e-12);

    const std::vector<double> x = {2.0, -1.0, 0.0};
    const auto z = project(two, x);
    EXPECT_NEAR(z[0], 2.0, 1e-12);
    EXPECT_NEAR(std::abs(z[1]), 1.0, 1e-12);
    const auto back = reconstruct(two, z);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(back[i], x[i], 1e-12);
}

TEST(Pca, FullThresholdKeepsRank) {
    EXPECT_EQ(fit_pca(gaussian_rows(10, 90, 1), 90, 1.0).k, 9u);
    EXPECT_EQ(fit_pca(gaussian_rows(200, 90, 2), 90, 1.0).k, 90u);
}

TEST(Pca, BasisIsOrthonormalAndExplainedMonotone) {
    const auto model = fit_pca(gaussian_rows(120, 40, 3), 40, 0.95);
    ASSERT_GT(model.k, 1u);
    for (std::size_t a = 0; a < model.k; ++a) {
        for (std::size_t b = 0; b < model.k; ++b) {
            EXPECT_NEAR(dot(model.column(a), model.column(b)), a == b ? 1.0 : 0.0, 1e-10);
        }
        if (a > 0) {
            EXPECT_GE(model.explained[a], model.explained[a - 1]);
            EXPECT_LE(model.eigenvalues[a], model.eigenvalues[a - 1]);
        }
    }
    EXPECT_GE(model.explained.back(), 0.95 - 1e-12);
    EXPECT_LT(model.explained[model.k - 2], 0.95);
}

TEST(Pca, FullBasisRoundTrips) {
    const auto rows = gaussian_rows(200, 30, 4);
    const auto model = fit_pca(rows, 30, 1.0);
    ASSERT_EQ(model.k, 30u);
    const std::span<const double> first(rows.data(), 30);
    const auto back = reconstruct(model, project(model, first));
    for (std::size_t i = 0; i < 30; ++i) EXPECT_NEAR(back[i], first[i], 1e-10);
    const auto z = project(model, model.mean);
    for (double v : z) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Pca, ConstantDataKeepsNothing) {
    const std::vector<double> rows(5 * 4, 3.0);
    const auto model = fit_pca(rows, 4);
    EXPECT_EQ(model.k, 0u);
    EXPECT_EQ(reconstruct(model, {}), model.mean);
}

TEST(Pca, Preconditions) {
    auto code = [](auto fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::IoError;
    };
    EXPECT_EQ(code([] { fit_pca(std::vector<double>(4, 1.0), 4); }), ErrorCode::TooFewSamples);
    EXPECT_EQ(code([] { fit_pca(gaussian_rows(4, 4, 1), 4, 0.0); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code([] { fit_pca(std::vector<double>(7, 1.0), 4); }), ErrorCode::ShapeMismatch);
    EXPECT_EQ(code([] { deinterlace(std::vector<double>(10, 0.0), 1, 3, 3); }), ErrorCode::ShapeMismatch);
}
