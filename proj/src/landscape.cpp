#include "altersgd/landscape.hpp"

#include "altersgd/errors.hpp"
#include "altersgd/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace altersgd {

double grad_norm_flatness(const LossOracle &loss, const ParamVector &point, const BatchRef &batch) {
    const ParamVector g = loss.evaluate(point, batch).gradient;
    return dot(g, g);
}

EigenEstimate hessian_top_eigenvalue(const LossOracle &loss, const ParamVector &point, const BatchRef &batch,
                                     std::size_t max_iters, double tol) {
    require(max_iters >= 1, "hessian_top_eigenvalue: max_iters must be at least 1");
    require(tol > 0.0, "hessian_top_eigenvalue: tol must be positive");
    require(point.dim() == loss.dim(), "hessian_top_eigenvalue: point dimension does not match the loss");

    ParamVector v = sphere_directions(point.dim(), 1, kPowerIterationSeed).front();
    EigenEstimate est;
    double previous = 0.0;
    for (std::size_t it = 1; it <= max_iters; ++it) {
        const ParamVector hv = loss.hessian_vector_product(point, v, batch);
        est.value = dot(v, hv);
        est.iterations = it;
        const double hv_norm = norm(hv);
        if (hv_norm == 0.0) {
            est.converged = true;
            break;
        }
        if (it > 1 && std::abs(est.value - previous) < tol) {
            est.converged = true;
            break;
        }
        previous = est.value;
        v = scaled(hv, 1.0 / hv_norm);
    }
    return est;
}

std::vector<ParamVector> sphere_directions(std::size_t dim, std::size_t draws, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<ParamVector> dirs;
    dirs.reserve(draws);
    for (std::size_t k = 0; k < draws; ++k) {
        ParamVector u(dim);
        double n = 0.0;
        do {
            for (double &x : u) {
                x = normal(rng);
            }
            n = norm(u);
        } while (n == 0.0);
        dirs.push_back(scaled(u, 1.0 / n));
    }
    return dirs;
}

namespace {

void check_sharpness_args(const LossOracle &loss, const ParamVector &point, double rho, std::size_t draws) {
    require(rho > 0.0, "perturbation_sharpness: rho must be positive");
    require(draws >= 1, "perturbation_sharpness: need at least one draw");
    require(point.dim() == loss.dim(), "perturbation_sharpness: point dimension does not match the loss");
}

}  // namespace

double perturbation_sharpness(const LossOracle &loss, const ParamVector &point, double rho, std::size_t draws,
                              std::uint64_t seed, const BatchRef &batch) {
    check_sharpness_args(loss, point, rho, draws);
    const double base = loss.evaluate(point, batch).value;
    const std::vector<ParamVector> dirs = sphere_directions(point.dim(), draws, seed);
    std::vector<double> increases(draws);

#pragma omp parallel for schedule(dynamic) default(none) shared(loss, point, rho, batch, dirs, increases, base, draws)
    for (std::size_t k = 0; k < draws; ++k) {
        ParamVector shifted = point;
        axpy(rho, dirs[k], shifted);
        increases[k] = loss.evaluate(shifted, batch).value - base;
    }

    double sum = 0.0;
    for (double d : increases) {
        sum += d;
    }
    return sum / static_cast<double>(draws);
}

double reference::perturbation_sharpness(const LossOracle &loss, const ParamVector &point, double rho,
                                         std::size_t draws, std::uint64_t seed, const BatchRef &batch) {
    check_sharpness_args(loss, point, rho, draws);
    const double base = loss.evaluate(point, batch).value;
    double sum = 0.0;
    for (const ParamVector &u : sphere_directions(point.dim(), draws, seed)) {
        ParamVector shifted = point;
        axpy(rho, u, shifted);
        sum += loss.evaluate(shifted, batch).value - base;
    }
    return sum / static_cast<double>(draws);
}

FlatnessReport flatness_report(const LossOracle &loss, const ParamVector &point, const BatchRef &batch, double rho,
                               std::size_t draws, std::uint64_t seed) {
    require(draws >= kMinSharpnessDraws, "flatness_report: need at least 32 perturbation draws");
    FlatnessReport report;
    report.grad_norm_sq = grad_norm_flatness(loss, point, batch);
    report.top_hessian_eigenvalue = hessian_top_eigenvalue(loss, point, batch).value;
    report.perturbation_sharpness = perturbation_sharpness(loss, point, rho, draws, seed, batch);
    report.point = point;
    report.rho = rho;
    return report;
}

double log_log_slope(std::span<const double> etas, std::span<const double> errors) {
    require(etas.size() == errors.size() && etas.size() >= 2, "log_log_slope: need matching series of length >= 2");
    const auto n = static_cast<double>(etas.size());
    double sx = 0.0;
    double sy = 0.0;
    double sxx = 0.0;
    double sxy = 0.0;
    for (std::size_t i = 0; i < etas.size(); ++i) {
        const double x = std::log(etas[i]);
        const double y = std::log(errors[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

Theorem1Report theorem1_check(const LossOracle &loss, const ParamVector &point, std::span<const double> eta_values,
                              const BatchRef &batch) {
    require(eta_values.size() >= 3, "theorem1_check: need at least 3 learning rates");
    for (std::size_t i = 0; i < eta_values.size(); ++i) {
        require(eta_values[i] > 0.0, "theorem1_check: learning rates must be positive");
        require(i == 0 || eta_values[i] > eta_values[i - 1], "theorem1_check: learning rates must be ascending");
    }
    require(eta_values.back() >= 4.0 * eta_values.front(), "theorem1_check: learning rates must span at least 4x");
    require(point.dim() == loss.dim(), "theorem1_check: point dimension does not match the loss");

    const ParamVector grad = loss.evaluate(point, batch).gradient;
    // grad |grad L|^2 = 2 H grad L. Model losses use a wider difference step than
    // the default so the surrogate's own error stays far below the O(eta^3) signal.
    const ParamVector hg = loss.exact_hessian()
                               ? loss.hessian_vector_product(point, grad, batch)
                               : finite_difference_hvp(loss, point, grad, batch, 1e-5 * (1.0 + norm(point)));

    Theorem1Report report;
    const double scale = std::max(1.0, norm(point));
    bool all_exact = true;
    bool any_zero = false;
    for (double eta : eta_values) {
        ParamVector composite = alternating_pair(loss, point, eta, batch);
        ParamVector surrogate = point;
        axpy(-eta * eta, hg, surrogate);  // (eta^2 / 2) * 2 H g
        const double err = norm(composite - surrogate);
        all_exact = all_exact && err <= kExactMatchTolerance * scale;
        any_zero = any_zero || err == 0.0;
        report.eta_values.push_back(eta);
        report.composite_points.push_back(std::move(composite));
        report.surrogate_points.push_back(std::move(surrogate));
        report.errors.push_back(err);
    }
    report.exact_match = all_exact;
    if (!all_exact && !any_zero) {
        report.fitted_order = log_log_slope(report.eta_values, report.errors);
    }
    return report;
}

void to_json(nlohmann::json &j, const FlatnessReport &r) {
    j = nlohmann::json{{"grad_norm_sq", r.grad_norm_sq},
                       {"top_hessian_eigenvalue", r.top_hessian_eigenvalue},
                       {"perturbation_sharpness", r.perturbation_sharpness},
                       {"point", r.point.values()},
                       {"rho", r.rho}};
}

void to_json(nlohmann::json &j, const Theorem1Report &r) {
    std::vector<std::vector<double>> composite;
    std::vector<std::vector<double>> surrogate;
    for (const auto &p : r.composite_points) {
        composite.push_back(p.values());
    }
    for (const auto &p : r.surrogate_points) {
        surrogate.push_back(p.values());
    }
    j = nlohmann::json{{"eta_values", r.eta_values},
                       {"composite_points", composite},
                       {"surrogate_points", surrogate},
                       {"errors", r.errors},
                       {"fitted_order", r.fitted_order ? nlohmann::json(*r.fitted_order) : nlohmann::json(nullptr)},
                       {"exact_match", r.exact_match}};
}

void to_json(nlohmann::json &j, const EigenEstimate &e) {
    j = nlohmann::json{{"value", e.value}, {"converged", e.converged}, {"iterations", e.iterations}};
}

}  // namespace altersgd
