#pragma once

#include "altersgd/param_vector.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace altersgd {

/// Indices of the samples that make up one mini-batch. `id` distinguishes draws;
/// two evaluations with equal ids see the same data (and the same injected noise).
struct BatchRef {
    std::vector<std::size_t> indices;
    std::uint64_t id = 0;
};

struct LossEvaluation {
    double value = 0.0;
    ParamVector gradient;
    std::uint64_t batch_id = 0;
};

/// A differentiable scalar objective over a parameter vector.
///
/// Implementations are immutable after construction; every member is a pure
/// function of its arguments and may be called concurrently.
class LossOracle {
public:
    virtual ~LossOracle() = default;

    [[nodiscard]] virtual std::size_t dim() const = 0;

    /// Number of samples the batch indices refer to. Zero for analytic losses,
    /// which ignore the batch argument entirely.
    [[nodiscard]] virtual std::size_t sample_count() const { return 0; }

    [[nodiscard]] virtual LossEvaluation evaluate(const ParamVector &point, const BatchRef &batch) const = 0;

    /// H(point) * direction. The default is a central difference of the gradient
    /// with step sqrt(machine eps) * (1 + |point|) / max(|direction|, 1e-12).
    [[nodiscard]] virtual ParamVector hessian_vector_product(const ParamVector &point, const ParamVector &direction,
                                                             const BatchRef &batch) const;

    /// True when hessian_vector_product is computed in closed form.
    [[nodiscard]] virtual bool exact_hessian() const { return false; }

protected:
    void check_point(const ParamVector &point) const;
};

/// Central finite difference of the gradient along `direction`, displacing the
/// point by `step / max(|direction|, 1e-12)` times the direction on each side.
[[nodiscard]] ParamVector finite_difference_hvp(const LossOracle &loss, const ParamVector &point,
                                                const ParamVector &direction, const BatchRef &batch, double step);

/// L(theta) = 1/2 (theta - offset)^T A (theta - offset), A symmetric PSD, row-major.
class QuadraticLoss final : public LossOracle {
public:
    QuadraticLoss(std::vector<double> matrix, ParamVector offset);

    static QuadraticLoss diagonal(const std::vector<double> &diag, ParamVector offset);
    static QuadraticLoss diagonal(const std::vector<double> &diag);

    [[nodiscard]] std::size_t dim() const override { return offset_.dim(); }
    [[nodiscard]] LossEvaluation evaluate(const ParamVector &point, const BatchRef &batch) const override;
    [[nodiscard]] ParamVector hessian_vector_product(const ParamVector &point, const ParamVector &direction,
                                                     const BatchRef &batch) const override;
    [[nodiscard]] bool exact_hessian() const override { return true; }

    [[nodiscard]] const std::vector<double> &matrix() const noexcept { return matrix_; }
    [[nodiscard]] const ParamVector &offset() const noexcept { return offset_; }

private:
    [[nodiscard]] ParamVector apply(const ParamVector &v) const;

    std::vector<double> matrix_;
    ParamVector offset_;
};

/// One-dimensional Gaussian double well:
///   L(theta) = a1 + a2 - a1 exp(-(theta-m1)^2 / (2 s1^2)) - a2 exp(-(theta-m2)^2 / (2 s2^2)).
/// Well 1 is the flat one (s1 > s2).
class DoubleWellLoss final : public LossOracle {
public:
    struct Params {
        std::array<double, 2> centers{-2.0, 2.0};
        std::array<double, 2> depths{1.0, 1.0};
        std::array<double, 2> widths{1.5, 0.3};
    };

    DoubleWellLoss() : DoubleWellLoss(Params{}) {}
    explicit DoubleWellLoss(Params params);

    [[nodiscard]] std::size_t dim() const override { return 1; }
    [[nodiscard]] LossEvaluation evaluate(const ParamVector &point, const BatchRef &batch) const override;
    [[nodiscard]] ParamVector hessian_vector_product(const ParamVector &point, const ParamVector &direction,
                                                     const BatchRef &batch) const override;
    [[nodiscard]] bool exact_hessian() const override { return true; }

    [[nodiscard]] const Params &params() const noexcept { return params_; }
    [[nodiscard]] double value_at(double theta) const;
    [[nodiscard]] double derivative_at(double theta) const;
    [[nodiscard]] double second_derivative_at(double theta) const;

private:
    Params params_;
};

/// Adds zero-mean Gaussian noise of the given std to the gradient of `inner`.
/// The noise is a pure function of (seed, batch id), so repeated evaluations
/// on the same batch see the same perturbation.
class NoisyGradientLoss final : public LossOracle {
public:
    NoisyGradientLoss(const LossOracle &inner, double stddev, std::uint64_t seed);

    [[nodiscard]] std::size_t dim() const override { return inner_.dim(); }
    [[nodiscard]] std::size_t sample_count() const override { return inner_.sample_count(); }
    [[nodiscard]] LossEvaluation evaluate(const ParamVector &point, const BatchRef &batch) const override;
    [[nodiscard]] ParamVector hessian_vector_product(const ParamVector &point, const ParamVector &direction,
                                                     const BatchRef &batch) const override {
        return inner_.hessian_vector_product(point, direction, batch);
    }
    [[nodiscard]] bool exact_hessian() const override { return inner_.exact_hessian(); }

private:
    const LossOracle &inner_;
    double stddev_;
    std::uint64_t seed_;
};

/// Mixes two 64-bit values into a well-distributed seed (splitmix64 finalizer).
[[nodiscard]] std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept;

}  // namespace altersgd
