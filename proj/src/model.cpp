#include "altersgd/model.hpp"

#include "altersgd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include <omp.h>

namespace altersgd {

void MlpSpec::validate() const {
    require(layer_sizes.size() >= 2, "MlpSpec: need at least an input and an output layer");
    for (std::size_t n : layer_sizes) {
        require(n > 0, "MlpSpec: layer sizes must be positive");
    }
    require(layer_sizes.back() >= 2, "MlpSpec: output layer needs at least 2 classes");
}

std::size_t MlpSpec::parameter_count() const {
    std::size_t count = 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
        count += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
    }
    return count;
}

void TaskDataset::validate() const {
    require(!labels.empty(), "TaskDataset: empty dataset");
    require(inputs.size() == labels.size(), "TaskDataset: inputs and labels differ in length");
    const std::size_t d = inputs.front().size();
    for (const auto &x : inputs) {
        require(x.size() == d, "TaskDataset: inconsistent feature dimension");
    }
}

void SessionSequence::validate() const {
    shared_spec.validate();
    require(!tasks.empty(), "SessionSequence: no tasks");
    std::set<int> seen;
    for (const auto &task : tasks) {
        task.validate();
        require(task.feature_dim() == shared_spec.input_size(), "SessionSequence: feature dimension does not match spec");
        for (int c : task.class_set) {
            require(c >= 0 && static_cast<std::size_t>(c) < shared_spec.output_size(),
                    "SessionSequence: class outside the model output range");
            require(seen.insert(c).second, "SessionSequence: class sets of sessions are not disjoint");
        }
    }
}

ParamVector init_params(const MlpSpec &spec) {
    spec.validate();
    ParamVector params(spec.parameter_count());
    std::mt19937_64 rng(spec.seed);
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const std::size_t fan_in = spec.layer_sizes[l];
        const std::size_t fan_out = spec.layer_sizes[l + 1];
        const double half_width = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> uniform(-half_width, half_width);
        for (std::size_t i = 0; i < fan_in * fan_out; ++i) {
            params[offset++] = uniform(rng);
        }
        offset += fan_out;  // biases stay zero
    }
    return params;
}

namespace {

int effective_label(const TaskDataset &data, std::size_t index, bool label_masking, std::size_t classes) {
    int label = data.labels[index];
    if (label_masking && !data.class_set.contains(label)) {
        label = 0;
    }
    if (label < 0 || static_cast<std::size_t>(label) >= classes) {
        throw ContractViolation("label " + std::to_string(label) + " outside model output range");
    }
    return label;
}

void check_batch(const TaskDataset &data, const BatchRef &batch) {
    if (batch.indices.empty()) {
        throw InvalidBatch("empty batch");
    }
    for (std::size_t i : batch.indices) {
        if (i >= data.size()) {
            throw InvalidBatch("batch index " + std::to_string(i) + " out of range");
        }
    }
}

/// Per-thread scratch for one forward/backward pass.
struct Workspace {
    std::vector<std::vector<double>> activations;  // a_0 .. a_L (a_L holds logits)
    std::vector<std::vector<double>> deltas;

    explicit Workspace(const MlpSpec &spec) {
        for (std::size_t n : spec.layer_sizes) {
            activations.emplace_back(n, 0.0);
            deltas.emplace_back(n, 0.0);
        }
    }
};

void forward(const MlpSpec &spec, std::span<const double> params, std::span<const double> input, Workspace &ws) {
    std::copy(input.begin(), input.end(), ws.activations[0].begin());
    const std::size_t layers = spec.layer_sizes.size() - 1;
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t n_in = spec.layer_sizes[l];
        const std::size_t n_out = spec.layer_sizes[l + 1];
        const double *w = params.data() + offset;
        const double *b = w + n_in * n_out;
        const auto &a_in = ws.activations[l];
        auto &a_out = ws.activations[l + 1];
        const bool hidden = l + 1 < layers;
        for (std::size_t i = 0; i < n_out; ++i) {
            double z = b[i];
            for (std::size_t j = 0; j < n_in; ++j) {
                z += w[i * n_in + j] * a_in[j];
            }
            if (hidden) {
                z = spec.activation == Activation::Tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
            }
            a_out[i] = z;
        }
        offset += n_in * n_out + n_out;
    }
}

/// Loss of one sample; writes its gradient into `grad` (overwriting).
double sample_pass(const MlpSpec &spec, std::span<const double> params, std::span<const double> input, int label,
                   Workspace &ws, std::span<double> grad) {
    forward(spec, params, input, ws);
    const std::size_t layers = spec.layer_sizes.size() - 1;
    const auto &logits = ws.activations[layers];
    const double max_logit = *std::max_element(logits.begin(), logits.end());
    double denom = 0.0;
    for (double z : logits) {
        denom += std::exp(z - max_logit);
    }
    const double lse = max_logit + std::log(denom);
    auto &delta_out = ws.deltas[layers];
    for (std::size_t k = 0; k < logits.size(); ++k) {
        delta_out[k] = std::exp(logits[k] - lse);
    }
    delta_out[static_cast<std::size_t>(label)] -= 1.0;

    std::size_t offset = spec.parameter_count();
    for (std::size_t l = layers; l-- > 0;) {
        const std::size_t n_in = spec.layer_sizes[l];
        const std::size_t n_out = spec.layer_sizes[l + 1];
        offset -= n_in * n_out + n_out;
        const double *w = params.data() + offset;
        double *gw = grad.data() + offset;
        double *gb = gw + n_in * n_out;
        const auto &a_in = ws.activations[l];
        const auto &delta = ws.deltas[l + 1];
        for (std::size_t i = 0; i < n_out; ++i) {
            for (std::size_t j = 0; j < n_in; ++j) {
                gw[i * n_in + j] = delta[i] * a_in[j];
            }
            gb[i] = delta[i];
        }
        if (l == 0) {
            break;
        }
        auto &delta_in = ws.deltas[l];
        for (std::size_t j = 0; j < n_in; ++j) {
            double back = 0.0;
            for (std::size_t i = 0; i < n_out; ++i) {
                back += w[i * n_in + j] * delta[i];
            }
            const double a = a_in[j];
            const double slope = spec.activation == Activation::Tanh ? 1.0 - a * a : (a > 0.0 ? 1.0 : 0.0);
            delta_in[j] = back * slope;
        }
    }
    return lse - logits[static_cast<std::size_t>(label)];
}

std::size_t argmax_class(const std::vector<double> &logits, std::optional<std::span<const int>> candidates) {
    if (!candidates) {
        return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) - logits.begin());
    }
    std::size_t best = logits.size();
    for (int c : *candidates) {
        const auto k = static_cast<std::size_t>(c);
        if (best == logits.size() || logits[k] > logits[best] || (logits[k] == logits[best] && k < best)) {
            best = k;
        }
    }
    return best;
}

void check_candidates(const MlpSpec &spec, std::optional<std::span<const int>> candidates) {
    if (!candidates) {
        return;
    }
    require(!candidates->empty(), "accuracy: empty candidate class list");
    for (int c : *candidates) {
        require(c >= 0 && static_cast<std::size_t>(c) < spec.output_size(), "accuracy: candidate class out of range");
    }
}

}  // namespace

LossEvaluation batch_loss(const MlpSpec &spec, const ParamVector &params, const TaskDataset &data,
                          const BatchRef &batch, bool label_masking) {
    spec.validate();
    const std::size_t dim = spec.parameter_count();
    require(params.dim() == dim, "batch_loss: parameter dimension does not match spec");
    require(data.feature_dim() == spec.input_size(), "batch_loss: feature dimension does not match spec");
    check_batch(data, batch);

    const std::size_t count = batch.indices.size();
    std::vector<int> labels(count);
    for (std::size_t s = 0; s < count; ++s) {
        labels[s] = effective_label(data, batch.indices[s], label_masking, spec.output_size());
    }

    // Per-sample gradients are computed in parallel one block at a time and
    // folded in batch order, so the sum is independent of the thread count and
    // the scratch buffer stays bounded for full-batch calls.
    constexpr std::size_t kBlock = 64;
    const std::size_t block = std::min(count, kBlock);
    std::vector<double> sample_grads(block * dim);
    std::vector<double> sample_losses(block);
    const std::span<const double> p = params.span();
    LossEvaluation out{0.0, ParamVector(dim), batch.id};

    for (std::size_t start = 0; start < count; start += block) {
        const std::size_t stop = std::min(count, start + block);
#pragma omp parallel default(none) shared(spec, data, batch, labels, sample_grads, sample_losses, p, start, stop, dim)
        {
            Workspace ws(spec);
#pragma omp for schedule(static)
            for (std::size_t s = start; s < stop; ++s) {
                const std::size_t k = s - start;
                const auto &x = data.inputs[batch.indices[s]];
                sample_losses[k] =
                    sample_pass(spec, p, x, labels[s], ws, std::span<double>(sample_grads).subspan(k * dim, dim));
            }
        }
        for (std::size_t k = 0; k < stop - start; ++k) {
            out.value += sample_losses[k];
            const double *g = sample_grads.data() + k * dim;
            for (std::size_t i = 0; i < dim; ++i) {
                out.gradient[i] += g[i];
            }
        }
    }
    const auto n = static_cast<double>(count);
    out.value /= n;
    for (double &g : out.gradient) {
        g /= n;
    }
    return out;
}

std::vector<double> predict_logits(const MlpSpec &spec, const ParamVector &params, std::span<const double> input) {
    spec.validate();
    require(params.dim() == spec.parameter_count(), "predict_logits: parameter dimension does not match spec");
    require(input.size() == spec.input_size(), "predict_logits: input dimension does not match spec");
    Workspace ws(spec);
    forward(spec, params.span(), input, ws);
    return ws.activations.back();
}

double accuracy(const MlpSpec &spec, const ParamVector &params, const TaskDataset &data,
                std::optional<std::span<const int>> candidates) {
    spec.validate();
    require(params.dim() == spec.parameter_count(), "accuracy: parameter dimension does not match spec");
    require(data.feature_dim() == spec.input_size(), "accuracy: feature dimension does not match spec");
    check_candidates(spec, candidates);
    if (data.size() == 0) {
        return 0.0;
    }
    const std::span<const double> p = params.span();
    std::size_t correct = 0;
#pragma omp parallel default(none) shared(spec, data, p, candidates) reduction(+ : correct)
    {
        Workspace ws(spec);
#pragma omp for schedule(static)
        for (std::size_t s = 0; s < data.size(); ++s) {
            forward(spec, p, data.inputs[s], ws);
            if (static_cast<int>(argmax_class(ws.activations.back(), candidates)) == data.labels[s]) {
                ++correct;
            }
        }
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

MlpLoss::MlpLoss(MlpSpec spec, std::shared_ptr<const TaskDataset> data, bool label_masking)
    : spec_(std::move(spec)), data_(std::move(data)), label_masking_(label_masking) {
    spec_.validate();
    require(data_ != nullptr, "MlpLoss: null dataset");
    data_->validate();
    require(data_->feature_dim() == spec_.input_size(), "MlpLoss: feature dimension does not match spec");
    dim_ = spec_.parameter_count();
}

LossEvaluation MlpLoss::evaluate(const ParamVector &point, const BatchRef &batch) const {
    check_point(point);
    return batch_loss(spec_, point, *data_, batch, label_masking_);
}

BatchRef MlpLoss::full_batch() const {
    BatchRef batch;
    batch.indices.resize(data_->size());
    for (std::size_t i = 0; i < batch.indices.size(); ++i) {
        batch.indices[i] = i;
    }
    return batch;
}

SessionSequence make_split_blobs(const std::vector<std::size_t> &classes_per_session, std::size_t samples_per_class,
                                 std::uint64_t seed, const std::vector<std::size_t> &hidden_layers,
                                 Activation activation) {
    require(!classes_per_session.empty(), "make_split_blobs: need at least one session");
    require(samples_per_class > 0, "make_split_blobs: samples_per_class must be positive");
    std::size_t total_classes = 0;
    for (std::size_t c : classes_per_session) {
        require(c > 0, "make_split_blobs: every session needs at least one class");
        total_classes += c;
    }

    constexpr double radius = 3.0;
    const double angle_step = 2.0 * std::numbers::pi / static_cast<double>(total_classes);
    const double gap = 2.0 * radius * std::sin(angle_step / 2.0);
    const double stddev = 0.35 * gap;

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, stddev);

    SessionSequence seq;
    seq.shared_spec.layer_sizes.push_back(2);
    seq.shared_spec.layer_sizes.insert(seq.shared_spec.layer_sizes.end(), hidden_layers.begin(), hidden_layers.end());
    seq.shared_spec.layer_sizes.push_back(std::max<std::size_t>(total_classes, 2));
    seq.shared_spec.activation = activation;
    seq.shared_spec.seed = seed;

    int next_class = 0;
    for (std::size_t s = 0; s < classes_per_session.size(); ++s) {
        TaskDataset task;
        task.task_id = static_cast<int>(s);
        for (std::size_t k = 0; k < classes_per_session[s]; ++k, ++next_class) {
            const double angle = angle_step * next_class;
            const double cx = radius * std::cos(angle);
            const double cy = radius * std::sin(angle);
            task.class_set.insert(next_class);
            for (std::size_t i = 0; i < samples_per_class; ++i) {
                const double x = cx + normal(rng);
                const double y = cy + normal(rng);
                task.inputs.push_back({x, y});
                task.labels.push_back(next_class);
            }
        }
        seq.tasks.push_back(std::move(task));
    }
    return seq;
}

SessionSequence make_split_blobs(std::size_t num_sessions, std::size_t initial_classes,
                                 std::size_t classes_per_session, std::size_t samples_per_class,
                                 std::uint64_t seed) {
    require(num_sessions > 0 && initial_classes > 0 && classes_per_session > 0,
            "make_split_blobs: counts must be positive");
    std::vector<std::size_t> counts(num_sessions, classes_per_session);
    counts[0] = initial_classes;
    return make_split_blobs(counts, samples_per_class, seed);
}

}  // namespace altersgd
