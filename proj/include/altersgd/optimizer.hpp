#pragma once

#include "altersgd/losses.hpp"
#include "altersgd/param_vector.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <random>
#include <string_view>
#include <vector>

namespace altersgd {

enum class PhaseTag { Normal, AlternativeDescent, AlternativeAscent };

[[nodiscard]] std::string_view to_string(PhaseTag tag) noexcept;

enum class PairBatchMode { SameBatch, FreshBatch };

/// Parameters of one training session.
///
/// The first floor(p * T) iterations are plain descent steps; the remaining
/// iterations are descent/ascent pairs. The session never finishes on an
/// ascent: an odd remainder ends with one single descent step, an even one
/// with two.
struct ScheduleConfig {
    std::size_t total_iterations = 100;
    /// When set, total iterations = epochs * ceil(samples / batch_size) for
    /// data-backed losses (overrides total_iterations).
    std::optional<std::size_t> epochs;
    /// Fraction of the budget spent in the normal phase. The recommended range is [0.8, 0.9].
    double alternative_ratio = 25.0 / 30.0;
    double learning_rate = 0.01;
    double lambda_reg = 0.0;
    std::optional<double> lambda_a;  ///< descent-step coefficient; defaults to lambda_reg
    std::optional<double> lambda_b;  ///< ascent-step coefficient; defaults to lambda_reg
    std::size_t batch_size = 32;
    PairBatchMode pair_batch_mode = PairBatchMode::SameBatch;

    void validate() const;
    [[nodiscard]] double descent_lambda() const { return lambda_a.value_or(lambda_reg); }
    [[nodiscard]] double ascent_lambda() const { return lambda_b.value_or(lambda_reg); }
    [[nodiscard]] std::size_t resolved_iterations(std::size_t sample_count) const;
    [[nodiscard]] std::size_t normal_iterations(std::size_t total) const;

    bool operator==(const ScheduleConfig &) const = default;
};

struct IterationRecord {
    std::size_t session = 0;
    std::size_t iteration = 0;  ///< 1-based within the session
    PhaseTag phase = PhaseTag::Normal;
    double loss = 0.0;       ///< objective of the step at its starting point
    double grad_norm = 0.0;  ///< norm of the direction the step moved along (before scaling by eta)
};

class RecordSink {
public:
    virtual ~RecordSink() = default;
    virtual void record(const IterationRecord &rec) = 0;
};

class MemorySink final : public RecordSink {
public:
    void record(const IterationRecord &rec) override { records_.push_back(rec); }
    [[nodiscard]] const std::vector<IterationRecord> &records() const noexcept { return records_; }

private:
    std::vector<IterationRecord> records_;
};

class NullSink final : public RecordSink {
public:
    void record(const IterationRecord &) override {}
};

/// Writes `session,iteration,phase,loss,grad_norm` rows (header first).
class CsvSink final : public RecordSink {
public:
    explicit CsvSink(std::ostream &out);
    void record(const IterationRecord &rec) override;

private:
    std::ostream &out_;
};

/// Mini-batches drawn without replacement within each pass over the data and
/// reshuffled at the start of every pass. Every draw gets a fresh batch id.
/// With sample_count == 0 (analytic losses) the index lists are empty.
class BatchSampler {
public:
    BatchSampler(std::size_t sample_count, std::size_t batch_size, std::uint64_t seed);
    BatchRef next();

private:
    std::size_t sample_count_;
    std::size_t batch_size_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::size_t cursor_ = 0;
    std::uint64_t next_id_ = 0;
};

/// point - lr * grad.
[[nodiscard]] ParamVector sgd_step(const ParamVector &point, const ParamVector &grad, double lr);

/// Descent step on `descent_batch` followed by an ascent step on `ascent_batch`.
[[nodiscard]] ParamVector alternating_pair(const LossOracle &loss, const ParamVector &point, double lr,
                                           const BatchRef &descent_batch, const BatchRef &ascent_batch);

[[nodiscard]] inline ParamVector alternating_pair(const LossOracle &loss, const ParamVector &point, double lr,
                                                  const BatchRef &batch) {
    return alternating_pair(loss, point, lr, batch, batch);
}

/// Pair on the regularized objective: the descent step follows grad(l + lambda_a R);
/// the ascent step follows grad(-l + lambda_b R), so only the task term is ascended.
[[nodiscard]] ParamVector regularized_alternating_pair(const LossOracle &task_loss, const LossOracle &regularizer,
                                                       const ParamVector &point, double lr, double lambda_a,
                                                       double lambda_b, const BatchRef &descent_batch,
                                                       const BatchRef &ascent_batch);

[[nodiscard]] inline ParamVector regularized_alternating_pair(const LossOracle &task_loss,
                                                              const LossOracle &regularizer, const ParamVector &point,
                                                              double lr, double lambda_a, double lambda_b,
                                                              const BatchRef &batch) {
    return regularized_alternating_pair(task_loss, regularizer, point, lr, lambda_a, lambda_b, batch, batch);
}

/// One full session: floor(pT) normal steps, then descent/ascent pairs, then one
/// or two closing descent steps (none when p = 1).
/// Throws NumericError (with iteration and phase) on a non-finite loss or gradient.
[[nodiscard]] ParamVector run_session(const LossOracle &task_loss, const LossOracle *regularizer, ParamVector theta0,
                                      const ScheduleConfig &cfg, std::uint64_t seed, RecordSink &log,
                                      std::size_t session = 0);

/// Plain mini-batch SGD for the whole budget, sharing run_session's batch stream.
[[nodiscard]] ParamVector run_plain_sgd(const LossOracle &task_loss, const LossOracle *regularizer,
                                        ParamVector theta0, const ScheduleConfig &cfg, std::uint64_t seed,
                                        RecordSink &log, std::size_t session = 0);

}  // namespace altersgd
