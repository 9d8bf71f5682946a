#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "regen/error.hpp"
#include "regen/infonce.hpp"
#include "test_util.hpp"

using namespace regen;
using regen::testing::central_difference;
using regen::testing::max_relative_error;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double sd = 1.0) {
    std::normal_distribution<double> g(0.0, sd);
    Matrix m(rows, cols);
    for (auto& v : m.data()) v = g(rng);
    return m;
}

Matrix from_flat(const std::vector<double>& flat, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    m.data() = flat;
    return m;
}

}  // namespace

TEST(InfoNce, SingleRowIsZero) {
    std::mt19937_64 rng(1);
    const auto a = random_matrix(1, 5, rng);
    const auto p = random_matrix(1, 5, rng);
    const auto r = infonce_loss(a, p, 0.7);
    EXPECT_EQ(r.loss, 0.0);
    for (double v : r.grad_anchors.data()) EXPECT_EQ(v, 0.0);
    for (double v : r.grad_positives.data()) EXPECT_EQ(v, 0.0);
}

TEST(InfoNce, EqualSimilaritiesGiveLogN) {
    // All anchors and positives identical -> every logit equal.
    Matrix a(4, 3, 0.5);
    Matrix p(4, 3, -1.25);
    EXPECT_NEAR(infonce_loss(a, p, 1.0).loss, std::log(4.0), 1e-12);
    Matrix zeros(4, 3, 0.0);
    EXPECT_NEAR(infonce_loss(zeros, zeros, 0.3).loss, std::log(4.0), 1e-12);
}

TEST(InfoNce, TwoRowsHandValue) {
    Matrix eye(2, 2);
    eye(0, 0) = eye(1, 1) = 1.0;
    // Each row: -log(e / (e + 1)) = log(1 + e^-1).
    EXPECT_NEAR(infonce_loss(eye, eye, 1.0).loss, std::log1p(std::exp(-1.0)), 1e-12);
    EXPECT_NEAR(infonce_loss(eye, eye, 1.0).loss, 0.31326, 1e-5);
}

TEST(InfoNce, RowLossesShiftInvariant) {
    std::mt19937_64 rng(2);
    const auto logits = random_matrix(5, 5, rng, 3.0);
    auto shifted = logits;
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) shifted(i, j) += 100.0 * static_cast<double>(i + 1);
    const auto a = infonce_row_losses(logits);
    const auto b = infonce_row_losses(shifted);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(a[i], b[i], 1e-10);
    // Large logits do not overflow.
    for (auto& v : shifted.data()) v *= 1e3;
    for (double l : infonce_row_losses(shifted)) EXPECT_TRUE(std::isfinite(l));
}

TEST(InfoNce, TemperatureEquivalentToScaling) {
    std::mt19937_64 rng(3);
    const auto a = random_matrix(6, 4, rng);
    const auto p = random_matrix(6, 4, rng);
    auto scaled = a;
    for (auto& v : scaled.data()) v /= 0.25;
    EXPECT_NEAR(infonce_loss(a, p, 0.25).loss, infonce_loss(scaled, p, 1.0).loss, 1e-10);
}

TEST(InfoNce, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 25; ++trial) {
        const std::size_t n = 1 + rng() % 8;
        const std::size_t dim = 1 + rng() % 16;
        const double tau = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
        const auto a = random_matrix(n, dim, rng);
        const auto p = random_matrix(n, dim, rng);
        const auto r = infonce_loss(a, p, tau);
        const auto na = central_difference(
            [&](const std::vector<double>& x) { return infonce_loss(from_flat(x, n, dim), p, tau).loss; }, a.data());
        const auto np = central_difference(
            [&](const std::vector<double>& x) { return infonce_loss(a, from_flat(x, n, dim), tau).loss; }, p.data());
        EXPECT_LT(max_relative_error(r.grad_anchors.data(), na), 1e-4) << "trial " << trial;
        EXPECT_LT(max_relative_error(r.grad_positives.data(), np), 1e-4) << "trial " << trial;
    }
}

TEST(InfoNce, RejectsBadInput) {
    Matrix a(2, 3), b(3, 3), c(2, 2);
    EXPECT_THROW(infonce_loss(a, b, 1.0), ConfigError);
    EXPECT_THROW(infonce_loss(a, a, 0.0), ConfigError);
    EXPECT_THROW(infonce_loss(Matrix(), Matrix(), 1.0), ConfigError);
    a(0, 0) = std::nan("");
    EXPECT_THROW(infonce_loss(a, a, 1.0), Error);
    EXPECT_THROW(infonce_row_losses(Matrix(2, 3)), ConfigError);
}
