#include "altersgd/optimizer.hpp"

#include "altersgd/errors.hpp"
#include "altersgd/format.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace altersgd {

std::string_view to_string(PhaseTag tag) noexcept {
    switch (tag) {
        case PhaseTag::Normal:
            return "normal";
        case PhaseTag::AlternativeDescent:
            return "alt_descent";
        case PhaseTag::AlternativeAscent:
            return "alt_ascent";
    }
    return "unknown";
}

void ScheduleConfig::validate() const {
    require(epochs ? *epochs > 0 : total_iterations > 0, "ScheduleConfig: iteration budget must be positive");
    require(alternative_ratio >= 0.0 && alternative_ratio <= 1.0, "ScheduleConfig: alternative ratio must be in [0, 1]");
    require(learning_rate > 0.0 && std::isfinite(learning_rate), "ScheduleConfig: learning rate must be positive");
    require(lambda_reg >= 0.0, "ScheduleConfig: lambda_reg must be non-negative");
    require(descent_lambda() >= 0.0 && ascent_lambda() >= 0.0, "ScheduleConfig: lambda_a/lambda_b must be non-negative");
    require(batch_size > 0, "ScheduleConfig: batch size must be positive");
}

std::size_t ScheduleConfig::resolved_iterations(std::size_t sample_count) const {
    if (epochs && sample_count > 0) {
        const std::size_t per_epoch = (sample_count + batch_size - 1) / batch_size;
        return *epochs * per_epoch;
    }
    return total_iterations;
}

std::size_t ScheduleConfig::normal_iterations(std::size_t total) const {
    // The small guard keeps ratios written as fractions (25/30 * 30) from flooring one short.
    const double scaled = alternative_ratio * static_cast<double>(total);
    const auto n = static_cast<std::size_t>(std::floor(scaled + 1e-9 * std::max(1.0, scaled)));
    return std::min(n, total);
}

CsvSink::CsvSink(std::ostream &out) : out_(out) {
    out_ << "session,iteration,phase,loss,grad_norm\n";
}

void CsvSink::record(const IterationRecord &rec) {
    out_ << rec.session << ',' << rec.iteration << ',' << to_string(rec.phase) << ',' << format_real(rec.loss) << ','
         << format_real(rec.grad_norm) << '\n';
}

BatchSampler::BatchSampler(std::size_t sample_count, std::size_t batch_size, std::uint64_t seed)
    : sample_count_(sample_count), batch_size_(batch_size), rng_(seed), order_(sample_count) {
    require(batch_size > 0, "BatchSampler: batch size must be positive");
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    cursor_ = sample_count_;  // forces a shuffle on the first draw
}

BatchRef BatchSampler::next() {
    BatchRef batch;
    batch.id = next_id_++;
    if (sample_count_ == 0) {
        return batch;
    }
    if (batch_size_ >= sample_count_) {
        batch.indices.resize(sample_count_);
        std::iota(batch.indices.begin(), batch.indices.end(), std::size_t{0});
        return batch;
    }
    if (cursor_ >= sample_count_) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        cursor_ = 0;
    }
    const std::size_t end = std::min(cursor_ + batch_size_, sample_count_);
    batch.indices.assign(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                         order_.begin() + static_cast<std::ptrdiff_t>(end));
    cursor_ = end;
    return batch;
}

ParamVector sgd_step(const ParamVector &point, const ParamVector &grad, double lr) {
    require(point.dim() == grad.dim(), "sgd_step: point and gradient dimensions differ");
    require(lr > 0.0, "sgd_step: learning rate must be positive");
    if (!grad.all_finite()) {
        throw NumericError("sgd_step: non-finite gradient entry");
    }
    ParamVector out = point;
    axpy(-lr, grad, out);
    return out;
}

namespace {

struct StepDirection {
    double objective;
    ParamVector direction;  // the step moves along -lr * direction
};

/// grad(sign * l + lambda * R) at `point`.
StepDirection step_direction(const LossOracle &task, const LossOracle *reg, const ParamVector &point, double sign,
                             double lambda, const BatchRef &batch) {
    LossEvaluation eval = task.evaluate(point, batch);
    StepDirection out{eval.value, std::move(eval.gradient)};
    if (sign < 0.0) {
        for (double &g : out.direction) {
            g = -g;
        }
    }
    if (reg != nullptr) {
        const LossEvaluation r = reg->evaluate(point, batch);
        out.objective += lambda * r.value;
        axpy(lambda, r.gradient, out.direction);
    }
    return out;
}

class SessionStepper {
public:
    SessionStepper(const LossOracle &task, const LossOracle *reg, const ScheduleConfig &cfg, RecordSink &log,
                   std::size_t session)
        : task_(task), reg_(reg), cfg_(cfg), log_(log), session_(session) {}

    void step(ParamVector &theta, PhaseTag tag, const BatchRef &batch) {
        ++iteration_;
        const bool ascent = tag == PhaseTag::AlternativeAscent;
        const double lambda = ascent ? cfg_.ascent_lambda() : cfg_.descent_lambda();
        StepDirection dir = step_direction(task_, reg_, theta, ascent ? -1.0 : 1.0, lambda, batch);
        if (!std::isfinite(dir.objective) || !dir.direction.all_finite()) {
            throw NumericError("non-finite loss in session " + std::to_string(session_) + " at iteration " +
                                   std::to_string(iteration_) + " (" + std::string(to_string(tag)) + ")",
                               session_, iteration_, std::string(to_string(tag)));
        }
        // Logged loss is l + lambda R at the step's start, for ascent steps too.
        log_.record({session_, iteration_, tag, dir.objective, norm(dir.direction)});
        theta = sgd_step(theta, dir.direction, cfg_.learning_rate);
    }

private:
    const LossOracle &task_;
    const LossOracle *reg_;
    const ScheduleConfig &cfg_;
    RecordSink &log_;
    std::size_t session_;
    std::size_t iteration_ = 0;
};

void check_start(const LossOracle &task, const LossOracle *reg, const ParamVector &theta0, const ScheduleConfig &cfg) {
    cfg.validate();
    require(theta0.dim() == task.dim(), "run_session: initial point dimension does not match the loss");
    require(reg == nullptr || reg->dim() == task.dim(), "run_session: regularizer dimension does not match the loss");
}

}  // namespace

ParamVector alternating_pair(const LossOracle &loss, const ParamVector &point, double lr,
                             const BatchRef &descent_batch, const BatchRef &ascent_batch) {
    require(lr > 0.0, "alternating_pair: learning rate must be positive");
    const ParamVector mid = sgd_step(point, loss.evaluate(point, descent_batch).gradient, lr);
    return sgd_step(mid, scaled(loss.evaluate(mid, ascent_batch).gradient, -1.0), lr);
}

ParamVector regularized_alternating_pair(const LossOracle &task_loss, const LossOracle &regularizer,
                                         const ParamVector &point, double lr, double lambda_a, double lambda_b,
                                         const BatchRef &descent_batch, const BatchRef &ascent_batch) {
    require(lr > 0.0, "regularized_alternating_pair: learning rate must be positive");
    require(lambda_a >= 0.0 && lambda_b >= 0.0, "regularized_alternating_pair: coefficients must be non-negative");
    const ParamVector mid =
        sgd_step(point, step_direction(task_loss, &regularizer, point, 1.0, lambda_a, descent_batch).direction, lr);
    return sgd_step(mid, step_direction(task_loss, &regularizer, mid, -1.0, lambda_b, ascent_batch).direction, lr);
}

ParamVector run_session(const LossOracle &task_loss, const LossOracle *regularizer, ParamVector theta0,
                        const ScheduleConfig &cfg, std::uint64_t seed, RecordSink &log, std::size_t session) {
    check_start(task_loss, regularizer, theta0, cfg);
    const std::size_t total = cfg.resolved_iterations(task_loss.sample_count());
    const std::size_t normal = cfg.normal_iterations(total);

    BatchSampler sampler(task_loss.sample_count(), cfg.batch_size, seed);
    SessionStepper stepper(task_loss, regularizer, cfg, log, session);
    ParamVector theta = std::move(theta0);

    for (std::size_t t = 0; t < normal; ++t) {
        stepper.step(theta, PhaseTag::Normal, sampler.next());
    }
    // Pairs while at least one iteration would remain after them; the last one
    // or two iterations are single descent steps so the session never ends on
    // an ascent.
    std::size_t remaining = total - normal;
    while (remaining >= 3) {
        const BatchRef first = sampler.next();
        stepper.step(theta, PhaseTag::AlternativeDescent, first);
        if (cfg.pair_batch_mode == PairBatchMode::SameBatch) {
            stepper.step(theta, PhaseTag::AlternativeAscent, first);
        } else {
            stepper.step(theta, PhaseTag::AlternativeAscent, sampler.next());
        }
        remaining -= 2;
    }
    for (; remaining > 0; --remaining) {
        stepper.step(theta, PhaseTag::AlternativeDescent, sampler.next());
    }
    return theta;
}

ParamVector run_plain_sgd(const LossOracle &task_loss, const LossOracle *regularizer, ParamVector theta0,
                          const ScheduleConfig &cfg, std::uint64_t seed, RecordSink &log, std::size_t session) {
    check_start(task_loss, regularizer, theta0, cfg);
    const std::size_t total = cfg.resolved_iterations(task_loss.sample_count());
    const double lambda = cfg.descent_lambda();
    BatchSampler sampler(task_loss.sample_count(), cfg.batch_size, seed);
    ParamVector theta = std::move(theta0);
    for (std::size_t t = 1; t <= total; ++t) {
        const BatchRef batch = sampler.next();
        LossEvaluation eval = task_loss.evaluate(theta, batch);
        if (regularizer != nullptr) {
            const LossEvaluation r = regularizer->evaluate(theta, batch);
            eval.value += lambda * r.value;
            axpy(lambda, r.gradient, eval.gradient);
        }
        if (!std::isfinite(eval.value) || !eval.gradient.all_finite()) {
            throw NumericError("non-finite loss in session " + std::to_string(session) + " at iteration " +
                                   std::to_string(t) + " (normal)",
                               session, t, "normal");
        }
        log.record({session, t, PhaseTag::Normal, eval.value, norm(eval.gradient)});
        theta = sgd_step(theta, eval.gradient, cfg.learning_rate);
    }
    return theta;
}

}  // namespace altersgd
