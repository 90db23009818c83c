#include "altersgd/errors.hpp"
#include "altersgd/losses.hpp"

#include "doctest.h"
#include "test_support.hpp"

#include <cmath>

using namespace altersgd;

TEST_CASE("quadratic value and gradient") {
    const QuadraticLoss q({2.0}, ParamVector{0.0});
    const LossEvaluation e = q.evaluate(ParamVector{1.0}, BatchRef{});
    CHECK(e.value == 1.0);
    CHECK(e.gradient == ParamVector{2.0});
}

TEST_CASE("quadratic minimum is exact") {
    std::mt19937_64 rng(11);
    for (std::size_t n = 1; n <= 8; ++n) {
        const auto a = testing::random_spd(n, rng);
        const ParamVector offset = testing::random_point(n, rng);
        const QuadraticLoss q(testing::row_major(a), offset);
        const LossEvaluation e = q.evaluate(offset, BatchRef{});
        CHECK(std::abs(e.value) <= 1e-12);
        CHECK(altersgd::norm(e.gradient) <= 1e-12);
    }
}

TEST_CASE("quadratic rejects bad input") {
    CHECK_THROWS_AS(QuadraticLoss({1.0, 2.0, 2.5, 1.0}, ParamVector{0.0, 0.0}), ContractViolation);
    CHECK_THROWS_AS(QuadraticLoss({1.0, 0.0, 0.0}, ParamVector{0.0, 0.0}), ContractViolation);
    const auto q = QuadraticLoss::diagonal({1.0, 4.0});
    CHECK_THROWS_AS((void)q.evaluate(ParamVector{1.0}, BatchRef{}), ContractViolation);
    CHECK_THROWS_AS((void)q.hessian_vector_product(ParamVector{1.0, 1.0}, ParamVector{1.0}, BatchRef{}),
                    ContractViolation);
    CHECK_THROWS_AS((void)q.hessian_vector_product(ParamVector{}, ParamVector{}, BatchRef{}), ContractViolation);
}

TEST_CASE("quadratic hessian vector product") {
    const auto q = QuadraticLoss::diagonal({1.0, 4.0});
    for (const ParamVector &at : {ParamVector{0.0, 0.0}, ParamVector{3.0, -7.0}}) {
        CHECK(q.hessian_vector_product(at, ParamVector{1.0, 1.0}, BatchRef{}) == ParamVector{1.0, 4.0});
        CHECK(q.hessian_vector_product(at, ParamVector{0.0, 0.0}, BatchRef{}) == ParamVector{0.0, 0.0});
    }
}

TEST_CASE("finite difference hvp matches closed form") {
    std::mt19937_64 rng(5);
    const auto a = testing::random_spd(5, rng);
    const QuadraticLoss q(testing::row_major(a), testing::random_point(5, rng));
    const ParamVector at = testing::random_point(5, rng);
    const ParamVector v = testing::random_point(5, rng);
    const double step = std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + altersgd::norm(at));
    const ParamVector fd = finite_difference_hvp(q, at, v, BatchRef{}, step);
    const ParamVector exact = q.hessian_vector_product(at, v, BatchRef{});
    CHECK(altersgd::norm(fd - exact) <= 1e-6 * altersgd::norm(exact));
    CHECK(finite_difference_hvp(q, at, ParamVector(5), BatchRef{}, step) == ParamVector(5));
}

// Reference values from tests/oracles/double_well.py (60-digit arithmetic).
TEST_CASE("double well closed form") {
    const DoubleWellLoss dw;
    const LossEvaluation e = dw.evaluate(ParamVector{-2.0}, BatchRef{});
    CHECK(std::abs(e.gradient[0]) <= 1e-12);
    CHECK(e.value == doctest::Approx(1.0).epsilon(1e-15));
    const ParamVector hv = dw.hessian_vector_product(ParamVector{-2.0}, ParamVector{1.0}, BatchRef{});
    CHECK(hv[0] == doctest::Approx(0.44444444444444444444).epsilon(1e-14));
    CHECK(dw.second_derivative_at(2.0) == doctest::Approx(11.033525800338258247).epsilon(1e-13));
    CHECK(dw.second_derivative_at(2.0) > dw.second_derivative_at(-2.0));
}

TEST_CASE("double well validates its shape") {
    DoubleWellLoss::Params p;
    p.widths = {0.3, 1.5};
    CHECK_THROWS_AS(DoubleWellLoss{p}, ContractViolation);
    p = {};
    p.depths[1] = 0.0;
    CHECK_THROWS_AS(DoubleWellLoss{p}, ContractViolation);
}

TEST_CASE("double well derivatives against finite differences") {
    const DoubleWellLoss dw;
    for (double t = -5.0; t <= 5.0; t += 0.37) {
        CHECK(testing::gradient_check(dw, ParamVector{t}, BatchRef{}) < 1e-5);
        const double h = 1e-5;
        const double fd = (dw.derivative_at(t + h) - dw.derivative_at(t - h)) / (2 * h);
        CHECK(dw.second_derivative_at(t) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
    }
}

TEST_CASE("gradient check over random points") {
    std::mt19937_64 rng(2024);
    const DoubleWellLoss dw;
    std::uniform_real_distribution<double> u(-5.0, 5.0);
    for (int k = 0; k < 100; ++k) {
        const std::size_t n = 1 + static_cast<std::size_t>(k % 8);
        const QuadraticLoss q(testing::row_major(testing::random_spd(n, rng)), testing::random_point(n, rng));
        CHECK(testing::gradient_check(q, testing::random_point(n, rng, 2.0), BatchRef{}) < 1e-5);
        CHECK(testing::gradient_check(dw, ParamVector{u(rng)}, BatchRef{}) < 1e-5);
    }
}

TEST_CASE("hvp symmetry") {
    std::mt19937_64 rng(77);
    const DoubleWellLoss dw;
    for (int k = 0; k < 20; ++k) {
        const std::size_t n = 1 + static_cast<std::size_t>(k % 8);
        const QuadraticLoss q(testing::row_major(testing::random_spd(n, rng)), testing::random_point(n, rng));
        const ParamVector at = testing::random_point(n, rng);
        const ParamVector u = testing::random_point(n, rng);
        const ParamVector v = testing::random_point(n, rng);
        const double uhv = dot(u, q.hessian_vector_product(at, v, BatchRef{}));
        const double vhu = dot(v, q.hessian_vector_product(at, u, BatchRef{}));
        CHECK(std::abs(uhv - vhu) <= 1e-6 * std::max(1.0, std::abs(uhv)));
    }
}

TEST_CASE("noisy gradient is a pure function of the batch") {
    const auto q = QuadraticLoss::diagonal({1.0, 4.0});
    const NoisyGradientLoss noisy(q, 0.3, 9);
    const ParamVector at{1.0, 1.0};
    const auto a = noisy.evaluate(at, BatchRef{{}, 3});
    const auto b = noisy.evaluate(at, BatchRef{{}, 3});
    const auto c = noisy.evaluate(at, BatchRef{{}, 4});
    CHECK(a.gradient == b.gradient);
    CHECK_FALSE(a.gradient == c.gradient);
    CHECK(a.value == q.evaluate(at, BatchRef{}).value);
    const NoisyGradientLoss silent(q, 0.0, 9);
    CHECK(silent.evaluate(at, BatchRef{{}, 3}).gradient == q.evaluate(at, BatchRef{}).gradient);
}

TEST_CASE("noisy gradient has the requested spread") {
    const auto q = QuadraticLoss::diagonal({1.0});
    const NoisyGradientLoss noisy(q, 0.3, 1);
    double sum = 0.0;
    double sq = 0.0;
    const int n = 20000;
    for (int k = 0; k < n; ++k) {
        const double xi = noisy.evaluate(ParamVector{0.0}, BatchRef{{}, static_cast<std::uint64_t>(k)}).gradient[0];
        sum += xi;
        sq += xi * xi;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean) < 4 * 0.3 / std::sqrt(n));
    CHECK(std::sqrt(sq / n - mean * mean) == doctest::Approx(0.3).epsilon(0.03));
}

TEST_CASE("losses are safe to call concurrently") {
    const DoubleWellLoss dw;
    std::vector<double> out(256);
#pragma omp parallel for
    for (int i = 0; i < 256; ++i) {
        out[static_cast<std::size_t>(i)] = dw.evaluate(ParamVector{-5.0 + 0.04 * i}, BatchRef{}).value;
    }
    for (int i = 0; i < 256; ++i) {
        CHECK(out[static_cast<std::size_t>(i)] == dw.value_at(-5.0 + 0.04 * i));
    }
}
