#pragma once

#include "altersgd/losses.hpp"
#include "altersgd/param_vector.hpp"

#include <cstddef>
#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <vector>

namespace altersgd {

enum class Activation { Tanh, Relu };

/// Fully connected network: layer_sizes = {input, hidden..., output}.
/// Hidden layers use `activation`; the output layer is linear and feeds a softmax.
struct MlpSpec {
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::Tanh;
    std::uint64_t seed = 0;

    void validate() const;
    [[nodiscard]] std::size_t parameter_count() const;
    [[nodiscard]] std::size_t input_size() const { return layer_sizes.front(); }
    [[nodiscard]] std::size_t output_size() const { return layer_sizes.back(); }

    bool operator==(const MlpSpec &) const = default;
};

struct TaskDataset {
    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
    std::set<int> class_set;
    int task_id = 0;

    [[nodiscard]] std::size_t size() const noexcept { return labels.size(); }
    [[nodiscard]] std::size_t feature_dim() const { return inputs.empty() ? 0 : inputs.front().size(); }
    void validate() const;
};

/// Ordered disjoint tasks plus the network shape shared by every session.
struct SessionSequence {
    std::vector<TaskDataset> tasks;
    MlpSpec shared_spec;

    [[nodiscard]] std::size_t sessions() const noexcept { return tasks.size(); }
    void validate() const;
};

/// Glorot-uniform weights, zero biases. Deterministic in `spec.seed`.
[[nodiscard]] ParamVector init_params(const MlpSpec &spec);

/// Mean softmax cross-entropy over `batch` and its reverse-mode gradient.
///
/// With `label_masking`, labels outside `data.class_set` are mapped to the
/// background class 0. Per-sample passes run in parallel; per-sample gradients
/// are summed in batch order so the result does not depend on the thread count.
[[nodiscard]] LossEvaluation batch_loss(const MlpSpec &spec, const ParamVector &params, const TaskDataset &data,
                                        const BatchRef &batch, bool label_masking);

/// Fraction of samples whose argmax logit matches the label. When `candidates`
/// is given, the argmax runs only over those classes. Ties go to the lower index.
[[nodiscard]] double accuracy(const MlpSpec &spec, const ParamVector &params, const TaskDataset &data,
                              std::optional<std::span<const int>> candidates = std::nullopt);

/// Output logits for a single input.
[[nodiscard]] std::vector<double> predict_logits(const MlpSpec &spec, const ParamVector &params,
                                                 std::span<const double> input);

namespace reference {
/// Serial single-sample-at-a-time implementation kept for testing the parallel kernel.
[[nodiscard]] LossEvaluation batch_loss(const MlpSpec &spec, const ParamVector &params, const TaskDataset &data,
                                        const BatchRef &batch, bool label_masking);
[[nodiscard]] double accuracy(const MlpSpec &spec, const ParamVector &params, const TaskDataset &data,
                              std::optional<std::span<const int>> candidates = std::nullopt);
}  // namespace reference

/// LossOracle adapter for an MLP over one dataset. Holds a shared handle to the data.
class MlpLoss final : public LossOracle {
public:
    MlpLoss(MlpSpec spec, std::shared_ptr<const TaskDataset> data, bool label_masking);

    [[nodiscard]] std::size_t dim() const override { return dim_; }
    [[nodiscard]] std::size_t sample_count() const override { return data_->size(); }
    [[nodiscard]] LossEvaluation evaluate(const ParamVector &point, const BatchRef &batch) const override;

    [[nodiscard]] const MlpSpec &spec() const noexcept { return spec_; }
    [[nodiscard]] const TaskDataset &data() const noexcept { return *data_; }
    [[nodiscard]] BatchRef full_batch() const;

private:
    MlpSpec spec_;
    std::shared_ptr<const TaskDataset> data_;
    bool label_masking_;
    std::size_t dim_;
};

/// Gaussian blobs on a ring of radius 3, one blob per class, blob std
/// 0.35 x (chord distance between neighbouring centres). Session k receives the
/// next `classes_per_session[k]` classes. The shared spec is {2, hidden..., K}.
[[nodiscard]] SessionSequence make_split_blobs(const std::vector<std::size_t> &classes_per_session,
                                               std::size_t samples_per_class, std::uint64_t seed,
                                               const std::vector<std::size_t> &hidden_layers = {16},
                                               Activation activation = Activation::Tanh);

/// Convenience form: `initial_classes` in session 0, then `classes_per_session` for each later session.
[[nodiscard]] SessionSequence make_split_blobs(std::size_t num_sessions, std::size_t initial_classes,
                                               std::size_t classes_per_session, std::size_t samples_per_class,
                                               std::uint64_t seed);

/// One sample per line: `f1,...,fd,label,task_id`.
void write_dataset(std::ostream &out, const std::vector<TaskDataset> &tasks);
/// Groups samples by task id (ascending). class_set is the set of labels seen per task.
/// Throws DatasetParseError naming the offending line.
[[nodiscard]] std::vector<TaskDataset> read_dataset(std::istream &in);

}  // namespace altersgd
