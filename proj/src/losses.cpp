#include "altersgd/losses.hpp"

#include "altersgd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

namespace altersgd {

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void LossOracle::check_point(const ParamVector &point) const {
    if (point.dim() != dim()) {
        throw ContractViolation("point has dimension " + std::to_string(point.dim()) + ", loss expects " +
                                std::to_string(dim()));
    }
}

ParamVector finite_difference_hvp(const LossOracle &loss, const ParamVector &point, const ParamVector &direction,
                                  const BatchRef &batch, double step) {
    require(point.dim() > 0, "hessian_vector_product: zero-dimensional input");
    require(direction.dim() == point.dim(), "hessian_vector_product: direction and point dimensions differ");
    const double dir_norm = norm(direction);
    if (dir_norm == 0.0) {
        return ParamVector(point.dim());
    }
    const double eps = step / std::max(dir_norm, 1e-12);
    ParamVector plus = point;
    ParamVector minus = point;
    axpy(eps, direction, plus);
    axpy(-eps, direction, minus);
    const ParamVector g_plus = loss.evaluate(plus, batch).gradient;
    const ParamVector g_minus = loss.evaluate(minus, batch).gradient;
    ParamVector out(point.dim());
    for (std::size_t i = 0; i < out.dim(); ++i) {
        out[i] = (g_plus[i] - g_minus[i]) / (2.0 * eps);
    }
    return out;
}

ParamVector LossOracle::hessian_vector_product(const ParamVector &point, const ParamVector &direction,
                                               const BatchRef &batch) const {
    const double step = std::sqrt(std::numeric_limits<double>::epsilon()) * (1.0 + norm(point));
    return finite_difference_hvp(*this, point, direction, batch, step);
}

// ---------------------------------------------------------------------------

QuadraticLoss::QuadraticLoss(std::vector<double> matrix, ParamVector offset)
    : matrix_(std::move(matrix)), offset_(std::move(offset)) {
    const std::size_t n = offset_.dim();
    require(n > 0, "QuadraticLoss: empty offset");
    require(matrix_.size() == n * n, "QuadraticLoss: matrix must be n x n with n = offset dimension");
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            require(std::abs(matrix_[i * n + j] - matrix_[j * n + i]) <= 1e-12, "QuadraticLoss: matrix not symmetric");
        }
    }
}

QuadraticLoss QuadraticLoss::diagonal(const std::vector<double> &diag, ParamVector offset) {
    const std::size_t n = diag.size();
    std::vector<double> m(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        m[i * n + i] = diag[i];
    }
    return QuadraticLoss(std::move(m), std::move(offset));
}

QuadraticLoss QuadraticLoss::diagonal(const std::vector<double> &diag) {
    return diagonal(diag, ParamVector(diag.size()));
}

ParamVector QuadraticLoss::apply(const ParamVector &v) const {
    const std::size_t n = dim();
    ParamVector out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            acc += matrix_[i * n + j] * v[j];
        }
        out[i] = acc;
    }
    return out;
}

LossEvaluation QuadraticLoss::evaluate(const ParamVector &point, const BatchRef &batch) const {
    check_point(point);
    const ParamVector delta = point - offset_;
    ParamVector grad = apply(delta);
    const double value = 0.5 * dot(delta, grad);
    return {value, std::move(grad), batch.id};
}

ParamVector QuadraticLoss::hessian_vector_product(const ParamVector &point, const ParamVector &direction,
                                                  const BatchRef &) const {
    require(point.dim() > 0, "hessian_vector_product: zero-dimensional input");
    check_point(point);
    require(direction.dim() == point.dim(), "hessian_vector_product: direction and point dimensions differ");
    return apply(direction);
}

// ---------------------------------------------------------------------------

DoubleWellLoss::DoubleWellLoss(Params params) : params_(params) {
    for (int k = 0; k < 2; ++k) {
        require(params_.depths[k] > 0.0, "DoubleWellLoss: depths must be positive");
        require(params_.widths[k] > 0.0, "DoubleWellLoss: widths must be positive");
    }
    require(params_.widths[0] > params_.widths[1], "DoubleWellLoss: well 1 must be the wider (flat) one");
}

double DoubleWellLoss::value_at(double theta) const {
    double value = params_.depths[0] + params_.depths[1];
    for (int k = 0; k < 2; ++k) {
        const double d = theta - params_.centers[k];
        const double s2 = params_.widths[k] * params_.widths[k];
        value -= params_.depths[k] * std::exp(-d * d / (2.0 * s2));
    }
    return value;
}

double DoubleWellLoss::derivative_at(double theta) const {
    double g = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double d = theta - params_.centers[k];
        const double s2 = params_.widths[k] * params_.widths[k];
        g += params_.depths[k] * d / s2 * std::exp(-d * d / (2.0 * s2));
    }
    return g;
}

double DoubleWellLoss::second_derivative_at(double theta) const {
    double h = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double d = theta - params_.centers[k];
        const double s2 = params_.widths[k] * params_.widths[k];
        h += params_.depths[k] / s2 * (1.0 - d * d / s2) * std::exp(-d * d / (2.0 * s2));
    }
    return h;
}

LossEvaluation DoubleWellLoss::evaluate(const ParamVector &point, const BatchRef &batch) const {
    check_point(point);
    return {value_at(point[0]), ParamVector{derivative_at(point[0])}, batch.id};
}

ParamVector DoubleWellLoss::hessian_vector_product(const ParamVector &point, const ParamVector &direction,
                                                   const BatchRef &) const {
    check_point(point);
    require(direction.dim() == 1, "hessian_vector_product: direction and point dimensions differ");
    return ParamVector{second_derivative_at(point[0]) * direction[0]};
}

// ---------------------------------------------------------------------------

NoisyGradientLoss::NoisyGradientLoss(const LossOracle &inner, double stddev, std::uint64_t seed)
    : inner_(inner), stddev_(stddev), seed_(seed) {
    require(stddev >= 0.0, "NoisyGradientLoss: negative stddev");
}

LossEvaluation NoisyGradientLoss::evaluate(const ParamVector &point, const BatchRef &batch) const {
    LossEvaluation eval = inner_.evaluate(point, batch);
    if (stddev_ > 0.0) {
        std::mt19937_64 rng(mix_seed(seed_, batch.id));
        std::normal_distribution<double> normal(0.0, stddev_);
        for (double &g : eval.gradient) {
            g += normal(rng);
        }
    }
    return eval;
}

}  // namespace altersgd
