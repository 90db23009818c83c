#pragma once

#include "altersgd/losses.hpp"
#include "altersgd/model.hpp"
#include "altersgd/optimizer.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

namespace altersgd {

/// R(theta) = 1/2 sum_i w_i (theta_i - anchor_i)^2.
class AnchorRegularizer final : public LossOracle {
public:
    explicit AnchorRegularizer(ParamVector anchor);  // unit weights
    AnchorRegularizer(ParamVector anchor, ParamVector weights);

    [[nodiscard]] std::size_t dim() const override { return anchor_.dim(); }
    [[nodiscard]] LossEvaluation evaluate(const ParamVector &point, const BatchRef &batch) const override;
    [[nodiscard]] ParamVector hessian_vector_product(const ParamVector &point, const ParamVector &direction,
                                                     const BatchRef &batch) const override;
    [[nodiscard]] bool exact_hessian() const override { return true; }

    [[nodiscard]] const ParamVector &anchor() const noexcept { return anchor_; }
    [[nodiscard]] const ParamVector &weights() const noexcept { return weights_; }

private:
    ParamVector anchor_;
    ParamVector weights_;
};

/// l(theta) + lambda R(theta). Holds references; both oracles must outlive it.
class RegularizedLoss final : public LossOracle {
public:
    RegularizedLoss(const LossOracle &task, const AnchorRegularizer &reg, double lambda);

    [[nodiscard]] std::size_t dim() const override { return task_.dim(); }
    [[nodiscard]] std::size_t sample_count() const override { return task_.sample_count(); }
    [[nodiscard]] LossEvaluation evaluate(const ParamVector &point, const BatchRef &batch) const override;
    [[nodiscard]] ParamVector hessian_vector_product(const ParamVector &point, const ParamVector &direction,
                                                     const BatchRef &batch) const override;
    [[nodiscard]] bool exact_hessian() const override { return task_.exact_hessian(); }

private:
    const LossOracle &task_;
    const AnchorRegularizer &reg_;
    double lambda_;
};

[[nodiscard]] RegularizedLoss regularized_loss(const LossOracle &task, const AnchorRegularizer &reg, double lambda);

/// entries(i, j): accuracy on task i after finishing session j, defined for j >= i.
class AccuracyMatrix {
public:
    explicit AccuracyMatrix(std::size_t sessions = 0);

    [[nodiscard]] std::size_t sessions() const noexcept { return sessions_; }
    [[nodiscard]] std::optional<double> at(std::size_t task, std::size_t after_session) const;
    void set(std::size_t task, std::size_t after_session, double accuracy);

    /// `task,after_session,accuracy` with absent entries omitted (0-based indices).
    void write_csv(std::ostream &out) const;

    bool operator==(const AccuracyMatrix &) const = default;

private:
    std::size_t sessions_;
    std::vector<std::optional<double>> entries_;
};

/// Historical best accuracy on `task` minus its accuracy after the final session.
/// Needs at least two sessions.
[[nodiscard]] double forgetting(const AccuracyMatrix &matrix, std::size_t task);

enum class OptimizerKind { PlainSgd, AlterSgd };

struct ContinualOptions {
    bool label_masking = true;
    /// Per-parameter importance for the anchor; unit weights when empty.
    std::optional<ParamVector> anchor_weights;
};

struct ContinualResult {
    ParamVector params;
    AccuracyMatrix accuracy;
};

/// Trains session 0 from freshly initialised parameters with `initial` (no
/// regularizer), then each later session with `continual` and an anchor at the
/// previous session's parameters. PlainSgd forces p = 1. After every session
/// each task seen so far is scored against its true labels, with predictions
/// restricted to the classes learned so far.
[[nodiscard]] ContinualResult run_continual(const SessionSequence &seq, const ScheduleConfig &initial,
                                            const ScheduleConfig &continual, OptimizerKind kind, std::uint64_t seed,
                                            RecordSink &log, const ContinualOptions &options = {});

}  // namespace altersgd
