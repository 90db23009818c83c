#include "altersgd/errors.hpp"
#include "altersgd/landscape.hpp"

#include "doctest.h"
#include "test_support.hpp"

#include <omp.h>

#include <cmath>

using namespace altersgd;

TEST_CASE("grad norm flatness") {
    const QuadraticLoss q({2.0}, ParamVector{0.0});
    CHECK(grad_norm_flatness(q, ParamVector{1.0}, BatchRef{}) == 4.0);
    CHECK(grad_norm_flatness(q, ParamVector{0.0}, BatchRef{}) <= 1e-10);
    const DoubleWellLoss dw;
    CHECK(grad_norm_flatness(dw, ParamVector{-2.0}, BatchRef{}) <= 1e-10);
    // the sharp centre is not a stationary point: the flat well's tail still pulls
    CHECK(grad_norm_flatness(dw, ParamVector{2.0}, BatchRef{}) > 1e-3);
}

// Oracle values (tests/oracles/double_well.py): |L'|^2 at m1 +- 0.1 is
// 0.00196654897281, at m2 + 0.1 is 1.19802687049 and at m2 - 0.1 is 0.984164171448.
TEST_CASE("double well gradient norm near each center") {
    const DoubleWellLoss dw;
    const double flat = grad_norm_flatness(dw, ParamVector{-1.9}, BatchRef{});
    const double sharp_hi = grad_norm_flatness(dw, ParamVector{2.1}, BatchRef{});
    const double sharp_lo = grad_norm_flatness(dw, ParamVector{1.9}, BatchRef{});
    CHECK(flat == doctest::Approx(0.00196654897281).epsilon(1e-10));
    CHECK(sharp_hi == doctest::Approx(1.19802687049).epsilon(1e-10));
    CHECK(sharp_lo == doctest::Approx(0.984164171448).epsilon(1e-10));
    CHECK(flat < sharp_lo);
    CHECK(grad_norm_flatness(dw, ParamVector{-2.1}, BatchRef{}) < sharp_lo);
}

TEST_CASE("top eigenvalue") {
    const auto d = QuadraticLoss::diagonal({1.0, 4.0});
    const EigenEstimate e = hessian_top_eigenvalue(d, ParamVector{0.0, 0.0}, BatchRef{});
    CHECK(e.converged);
    CHECK(e.value == doctest::Approx(4.0).epsilon(1e-9));
    const auto id = QuadraticLoss::diagonal({1.0, 1.0, 1.0});
    const EigenEstimate one = hessian_top_eigenvalue(id, ParamVector(3), BatchRef{});
    CHECK(one.value == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(one.iterations <= 2);
    const DoubleWellLoss dw;
    const double sharp = hessian_top_eigenvalue(dw, ParamVector{2.0}, BatchRef{}).value;
    CHECK(sharp == doctest::Approx(11.033525800338258).epsilon(1e-12));
    CHECK(std::abs(sharp - 1.0 / 0.09) / (1.0 / 0.09) < 0.01);
    CHECK(sharp > hessian_top_eigenvalue(dw, ParamVector{-2.0}, BatchRef{}).value);
    CHECK_THROWS_AS((void)hessian_top_eigenvalue(d, ParamVector{0.0, 0.0}, BatchRef{}, 0), ContractViolation);
    CHECK_THROWS_AS((void)hessian_top_eigenvalue(d, ParamVector{0.0, 0.0}, BatchRef{}, 10, 0.0), ContractViolation);
}

TEST_CASE("top eigenvalue flags non-convergence") {
    // nearly tied magnitudes of opposite sign: the Rayleigh quotient creeps
    const auto q = QuadraticLoss::diagonal({4.0, -3.999999});
    const EigenEstimate e = hessian_top_eigenvalue(q, ParamVector{0.0, 0.0}, BatchRef{}, 50);
    CHECK_FALSE(e.converged);
    CHECK(e.iterations == 50);
    CHECK(std::isfinite(e.value));
}

TEST_CASE("power iteration agrees with a dense eigendecomposition") {
    std::mt19937_64 rng(123);
    for (int k = 0; k < 24; ++k) {
        const std::size_t n = 1 + static_cast<std::size_t>(k % 8);
        const Eigen::MatrixXd a = testing::random_spd(n, rng, 0.1, 5.0);
        const QuadraticLoss q(testing::row_major(a), testing::random_point(n, rng));
        const double dense = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().maxCoeff();
        const EigenEstimate e = hessian_top_eigenvalue(q, testing::random_point(n, rng), BatchRef{}, 20000, 1e-14);
        CHECK(std::abs(e.value - dense) <= 1e-6 * dense);
    }
}

TEST_CASE("sphere directions") {
    const auto dirs = sphere_directions(5, 200, 3);
    CHECK(dirs.size() == 200);
    ParamVector mean(5);
    for (const auto &u : dirs) {
        CHECK(norm(u) == doctest::Approx(1.0).epsilon(1e-14));
        axpy(1.0 / 200, u, mean);
    }
    CHECK(norm(mean) < 0.25);
    CHECK(sphere_directions(5, 200, 3) == dirs);
}

TEST_CASE("perturbation sharpness") {
    const DoubleWellLoss dw;
    const auto q = QuadraticLoss::diagonal({2.0, 2.0});
    CHECK(std::abs(perturbation_sharpness(dw, ParamVector{-2.0}, 1e-6, 64, 1, BatchRef{})) < 1e-8);
    CHECK(std::abs(perturbation_sharpness(dw, ParamVector{2.0}, 1e-6, 64, 1, BatchRef{})) < 1e-8);
    CHECK(std::abs(perturbation_sharpness(q, ParamVector{0.0, 0.0}, 1e-6, 64, 1, BatchRef{})) < 1e-8);
    // away from stationary points the first-order term bounds it: |mean| <= rho |grad| + O(rho^2)
    for (const auto &[loss, at] : {std::pair<const LossOracle *, ParamVector>{&dw, ParamVector{0.7}},
                                   std::pair<const LossOracle *, ParamVector>{&q, ParamVector{0.3, 0.2}}}) {
        const double g = norm(loss->evaluate(at, BatchRef{}).gradient);
        CHECK(std::abs(perturbation_sharpness(*loss, at, 1e-6, 64, 1, BatchRef{})) <= 1e-6 * g + 1e-11);
    }
    // isotropic A: u^T A u = 2 for every unit u, so the mean is exactly rho^2
    CHECK(perturbation_sharpness(q, ParamVector{0.0, 0.0}, 0.1, 64, 9, BatchRef{}) ==
          doctest::Approx(0.01).epsilon(1e-12));
    const double flat = perturbation_sharpness(dw, ParamVector{-2.0}, 0.1, 128, 2, BatchRef{});
    const double sharp = perturbation_sharpness(dw, ParamVector{2.0}, 0.1, 128, 2, BatchRef{});
    CHECK(flat > 0.0);
    CHECK(sharp > flat);
    CHECK_THROWS_AS((void)perturbation_sharpness(q, ParamVector{0.0, 0.0}, 0.0, 64, 1, BatchRef{}),
                    ContractViolation);
    CHECK_THROWS_AS((void)perturbation_sharpness(q, ParamVector{0.0, 0.0}, 0.1, 0, 1, BatchRef{}),
                    ContractViolation);
}

// Monte-Carlo oracle: an independent Eigen evaluation of 1/2 rho^2 u^T A u
// over 1e5 Gaussian-normalized directions, compared within 3 standard errors.
TEST_CASE("perturbation sharpness against a Monte-Carlo oracle") {
    std::mt19937_64 rng(5);
    for (int k = 0; k < 5; ++k) {
        const std::size_t n = 2 + static_cast<std::size_t>(k);
        const Eigen::MatrixXd a = testing::random_spd(n, rng, 0.5, 6.0);
        const QuadraticLoss q(testing::row_major(a), ParamVector(n));
        const double rho = 0.1;
        std::mt19937_64 mc(1000 + k);
        std::normal_distribution<double> normal;
        const int draws = 100000;
        double sum = 0.0;
        double sq = 0.0;
        for (int d = 0; d < draws; ++d) {
            Eigen::VectorXd u(n);
            for (Eigen::Index i = 0; i < u.size(); ++i) {
                u(i) = normal(mc);
            }
            u.normalize();
            const double v = 0.5 * rho * rho * u.dot(a * u);
            sum += v;
            sq += v * v;
        }
        const double mean = sum / draws;
        const double sd = std::sqrt(sq / draws - mean * mean);
        const int ours_draws = 4096;
        const double ours = perturbation_sharpness(q, ParamVector(n), rho, ours_draws, 77 + k, BatchRef{});
        const double se = sd * std::sqrt(1.0 / draws + 1.0 / ours_draws);
        CHECK(std::abs(ours - mean) <= 3.0 * se);
        CHECK(mean == doctest::Approx(rho * rho * a.trace() / (2.0 * n)).epsilon(0.02));
    }
}

TEST_CASE("parallel sharpness matches the serial reference") {
    const SessionSequence seq = make_split_blobs({3}, 60, 1, {8});
    const MlpLoss loss(seq.shared_spec, std::make_shared<const TaskDataset>(seq.tasks[0]), true);
    const ParamVector p = init_params(seq.shared_spec);
    for (int threads : {1, 3}) {
        omp_set_num_threads(threads);
        CHECK(perturbation_sharpness(loss, p, 0.05, 40, 4, loss.full_batch()) ==
              reference::perturbation_sharpness(loss, p, 0.05, 40, 4, loss.full_batch()));
    }
    omp_set_num_threads(omp_get_num_procs());
}

TEST_CASE("flatness report") {
    const DoubleWellLoss dw;
    const FlatnessReport flat = flatness_report(dw, ParamVector{-2.0}, BatchRef{}, 0.1);
    const FlatnessReport sharp = flatness_report(dw, ParamVector{2.0}, BatchRef{}, 0.1);
    CHECK(sharp.top_hessian_eigenvalue > flat.top_hessian_eigenvalue);
    CHECK(sharp.perturbation_sharpness > flat.perturbation_sharpness);
    CHECK(flat.rho == 0.1);
    CHECK(flat.point == ParamVector{-2.0});
    CHECK_THROWS_AS((void)flatness_report(dw, ParamVector{-2.0}, BatchRef{}, 0.1, 31), ContractViolation);
    const nlohmann::json j = flat;
    for (const char *key : {"grad_norm_sq", "top_hessian_eigenvalue", "perturbation_sharpness", "point", "rho"}) {
        CHECK(j.contains(key));
    }
}

TEST_CASE("log-log slope") {
    const std::vector<double> x{0.01, 0.02, 0.04};
    const std::vector<double> y{2e-6, 1.6e-5, 1.28e-4};
    CHECK(log_log_slope(x, y) == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("theorem1 exact on quadratics") {
    std::mt19937_64 rng(17);
    for (int k = 0; k < 20; ++k) {
        const std::size_t n = 1 + static_cast<std::size_t>(k % 8);
        const Eigen::MatrixXd a = testing::random_spd(n, rng);
        const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(a).eigenvalues().maxCoeff();
        const ParamVector offset = testing::random_point(n, rng);
        const QuadraticLoss q(testing::row_major(a), offset);
        const ParamVector theta = testing::random_point(n, rng);
        const double top = 0.5 / lmax;
        const std::vector<double> etas{top / 4, top / 2, top};
        const Theorem1Report r = theorem1_check(q, theta, etas, BatchRef{});
        CHECK(r.exact_match);
        CHECK_FALSE(r.fitted_order.has_value());
        REQUIRE(r.errors.size() == 3);
        for (std::size_t i = 0; i < 3; ++i) {
            CHECK(r.errors[i] <= 1e-10);
            // both sides against the dense (I - eta^2 A^2) oracle
            const Eigen::MatrixXd m = Eigen::MatrixXd::Identity(n, n) - etas[i] * etas[i] * a * a;
            const Eigen::VectorXd expect =
                m * (testing::to_eigen(theta) - testing::to_eigen(offset)) + testing::to_eigen(offset);
            CHECK((testing::to_eigen(r.composite_points[i]) - expect).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK((testing::to_eigen(r.surrogate_points[i]) - expect).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("theorem1 at a minimizer is trivially exact") {
    const DoubleWellLoss dw;
    const std::vector<double> etas{0.02, 0.04, 0.08};
    const Theorem1Report r = theorem1_check(dw, ParamVector{-2.0}, etas, BatchRef{});
    CHECK(r.exact_match);
    for (double e : r.errors) {
        CHECK(e <= 1e-12);
    }
}

// Oracle slopes (60-digit arithmetic): 2.9950 at -1.5, 2.9204 at 1.8, 3.0096 at 0, 3.0018 at -3.3;
// errors at -1.5: 4.7598963e-8, 3.7991951e-7, 3.0253439e-6.
TEST_CASE("theorem1 order on the double well") {
    const DoubleWellLoss dw;
    const std::vector<double> etas{0.02, 0.04, 0.08};
    const Theorem1Report r = theorem1_check(dw, ParamVector{-1.5}, etas, BatchRef{});
    CHECK_FALSE(r.exact_match);
    REQUIRE(r.fitted_order.has_value());
    CHECK(*r.fitted_order == doctest::Approx(2.9950126).epsilon(1e-5));
    CHECK(r.errors[0] == doctest::Approx(4.7598963e-8).epsilon(1e-5));
    CHECK(r.errors[2] == doctest::Approx(3.0253439e-6).epsilon(1e-6));
    const std::vector<std::pair<double, double>> more{{1.8, 2.9204334}, {0.0, 3.009602}, {-3.3, 3.0017512}};
    for (const auto &[t, slope] : more) {
        const Theorem1Report s = theorem1_check(dw, ParamVector{t}, etas, BatchRef{});
        REQUIRE(s.fitted_order.has_value());
        CHECK(*s.fitted_order == doctest::Approx(slope).epsilon(1e-5));
    }
}

TEST_CASE("theorem1 argument checks") {
    const DoubleWellLoss dw;
    const ParamVector p{0.0};
    CHECK_THROWS_AS((void)theorem1_check(dw, p, std::vector<double>{0.02, 0.04}, BatchRef{}), ContractViolation);
    CHECK_THROWS_AS((void)theorem1_check(dw, p, std::vector<double>{0.04, 0.02, 0.08}, BatchRef{}),
                    ContractViolation);
    CHECK_THROWS_AS((void)theorem1_check(dw, p, std::vector<double>{0.02, 0.03, 0.04}, BatchRef{}),
                    ContractViolation);
    CHECK_THROWS_AS((void)theorem1_check(dw, p, std::vector<double>{-0.02, 0.04, 0.08}, BatchRef{}),
                    ContractViolation);
    const nlohmann::json j = theorem1_check(dw, p, std::vector<double>{0.02, 0.04, 0.08}, BatchRef{});
    for (const char *key :
         {"eta_values", "composite_points", "surrogate_points", "errors", "fitted_order", "exact_match"}) {
        CHECK(j.contains(key));
    }
}
