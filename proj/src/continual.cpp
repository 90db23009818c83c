#include "altersgd/continual.hpp"

#include "altersgd/errors.hpp"
#include "altersgd/format.hpp"

#include <algorithm>
#include <memory>
#include <string>

namespace altersgd {

AnchorRegularizer::AnchorRegularizer(ParamVector anchor)
    : AnchorRegularizer(anchor, ParamVector(anchor.dim(), 1.0)) {}

AnchorRegularizer::AnchorRegularizer(ParamVector anchor, ParamVector weights)
    : anchor_(std::move(anchor)), weights_(std::move(weights)) {
    require(weights_.dim() == anchor_.dim(), "AnchorRegularizer: weights and anchor dimensions differ");
    for (double w : weights_) {
        require(w >= 0.0, "AnchorRegularizer: weights must be non-negative");
    }
}

LossEvaluation AnchorRegularizer::evaluate(const ParamVector &point, const BatchRef &batch) const {
    check_point(point);
    LossEvaluation out{0.0, ParamVector(dim()), batch.id};
    for (std::size_t i = 0; i < dim(); ++i) {
        const double d = point[i] - anchor_[i];
        out.value += 0.5 * weights_[i] * d * d;
        out.gradient[i] = weights_[i] * d;
    }
    return out;
}

ParamVector AnchorRegularizer::hessian_vector_product(const ParamVector &point, const ParamVector &direction,
                                                      const BatchRef &) const {
    check_point(point);
    require(direction.dim() == dim(), "hessian_vector_product: direction and point dimensions differ");
    ParamVector out(dim());
    for (std::size_t i = 0; i < dim(); ++i) {
        out[i] = weights_[i] * direction[i];
    }
    return out;
}

RegularizedLoss::RegularizedLoss(const LossOracle &task, const AnchorRegularizer &reg, double lambda)
    : task_(task), reg_(reg), lambda_(lambda) {
    require(lambda >= 0.0, "regularized_loss: lambda must be non-negative");
    require(task.dim() == reg.dim(), "regularized_loss: anchor dimension does not match the task loss");
}

LossEvaluation RegularizedLoss::evaluate(const ParamVector &point, const BatchRef &batch) const {
    LossEvaluation out = task_.evaluate(point, batch);
    const LossEvaluation r = reg_.evaluate(point, batch);
    out.value += lambda_ * r.value;
    axpy(lambda_, r.gradient, out.gradient);
    return out;
}

ParamVector RegularizedLoss::hessian_vector_product(const ParamVector &point, const ParamVector &direction,
                                                    const BatchRef &batch) const {
    ParamVector out = task_.hessian_vector_product(point, direction, batch);
    axpy(lambda_, reg_.hessian_vector_product(point, direction, batch), out);
    return out;
}

RegularizedLoss regularized_loss(const LossOracle &task, const AnchorRegularizer &reg, double lambda) {
    return RegularizedLoss(task, reg, lambda);
}

// ---------------------------------------------------------------------------

AccuracyMatrix::AccuracyMatrix(std::size_t sessions) : sessions_(sessions), entries_(sessions * sessions) {}

std::optional<double> AccuracyMatrix::at(std::size_t task, std::size_t after_session) const {
    require(task < sessions_ && after_session < sessions_, "AccuracyMatrix: index out of range");
    return entries_[task * sessions_ + after_session];
}

void AccuracyMatrix::set(std::size_t task, std::size_t after_session, double accuracy) {
    require(task < sessions_ && after_session < sessions_, "AccuracyMatrix: index out of range");
    require(after_session >= task, "AccuracyMatrix: entry undefined before the task is learned");
    require(accuracy >= 0.0 && accuracy <= 1.0, "AccuracyMatrix: accuracy must lie in [0, 1]");
    entries_[task * sessions_ + after_session] = accuracy;
}

void AccuracyMatrix::write_csv(std::ostream &out) const {
    out << "task,after_session,accuracy\n";
    for (std::size_t i = 0; i < sessions_; ++i) {
        for (std::size_t j = i; j < sessions_; ++j) {
            if (const auto v = at(i, j)) {
                out << i << ',' << j << ',' << format_real(*v) << '\n';
            }
        }
    }
}

double forgetting(const AccuracyMatrix &matrix, std::size_t task) {
    require(matrix.sessions() >= 2, "forgetting: undefined for a single session");
    require(task < matrix.sessions(), "forgetting: task index out of range");
    const std::size_t last = matrix.sessions() - 1;
    const auto final_acc = matrix.at(task, last);
    require(final_acc.has_value(), "forgetting: final accuracy undefined");
    double best = *final_acc;
    for (std::size_t j = task; j < last; ++j) {
        const auto v = matrix.at(task, j);
        require(v.has_value(), "forgetting: undefined accuracy entry");
        best = std::max(best, *v);
    }
    return best - *final_acc;
}

// ---------------------------------------------------------------------------

ContinualResult run_continual(const SessionSequence &seq, const ScheduleConfig &initial,
                              const ScheduleConfig &continual, OptimizerKind kind, std::uint64_t seed,
                              RecordSink &log, const ContinualOptions &options) {
    seq.validate();
    initial.validate();
    continual.validate();

    MlpSpec spec = seq.shared_spec;
    spec.seed = mix_seed(seed, 0x1417);
    ContinualResult result{init_params(spec), AccuracyMatrix(seq.sessions())};
    if (options.anchor_weights) {
        require(options.anchor_weights->dim() == result.params.dim(), "run_continual: anchor weights dimension mismatch");
    }

    std::vector<int> learned;
    for (std::size_t s = 0; s < seq.sessions(); ++s) {
        ScheduleConfig cfg = s == 0 ? initial : continual;
        if (kind == OptimizerKind::PlainSgd) {
            cfg.alternative_ratio = 1.0;
        }
        const auto task = std::make_shared<const TaskDataset>(seq.tasks[s]);
        const MlpLoss task_loss(spec, task, options.label_masking);
        const std::uint64_t session_seed = mix_seed(seed, s + 1);
        try {
            if (s == 0) {
                result.params = run_session(task_loss, nullptr, result.params, cfg, session_seed, log, s);
            } else {
                const AnchorRegularizer anchor = options.anchor_weights
                                                     ? AnchorRegularizer(result.params, *options.anchor_weights)
                                                     : AnchorRegularizer(result.params);
                result.params = run_session(task_loss, &anchor, result.params, cfg, session_seed, log, s);
            }
        } catch (const NumericError &e) {
            throw NumericError(std::string("run_continual: session ") + std::to_string(s) + " failed: " + e.what(), s,
                               e.iteration(), e.phase());
        }

        learned.insert(learned.end(), seq.tasks[s].class_set.begin(), seq.tasks[s].class_set.end());
        std::sort(learned.begin(), learned.end());
        for (std::size_t i = 0; i <= s; ++i) {
            result.accuracy.set(i, s, accuracy(spec, result.params, seq.tasks[i], std::span<const int>(learned)));
        }
    }
    return result;
}

}  // namespace altersgd
