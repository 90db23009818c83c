// Serial reference versions of the MLP kernels. Written layer-by-layer without
// the shared workspace so the parallel kernels can be checked against them.

#include "altersgd/errors.hpp"
#include "altersgd/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace altersgd::reference {

namespace {

struct LayerView {
    std::size_t n_in;
    std::size_t n_out;
    std::size_t weight_offset;
    std::size_t bias_offset;
};

std::vector<LayerView> layer_views(const MlpSpec &spec) {
    std::vector<LayerView> views;
    std::size_t offset = 0;
    for (std::size_t l = 0; l + 1 < spec.layer_sizes.size(); ++l) {
        const std::size_t n_in = spec.layer_sizes[l];
        const std::size_t n_out = spec.layer_sizes[l + 1];
        views.push_back({n_in, n_out, offset, offset + n_in * n_out});
        offset += n_in * n_out + n_out;
    }
    return views;
}

std::vector<std::vector<double>> forward_all(const MlpSpec &spec, const std::vector<LayerView> &views,
                                             const ParamVector &params, const std::vector<double> &input) {
    std::vector<std::vector<double>> acts{input};
    for (std::size_t l = 0; l < views.size(); ++l) {
        const LayerView &v = views[l];
        std::vector<double> out(v.n_out);
        for (std::size_t i = 0; i < v.n_out; ++i) {
            double z = params[v.bias_offset + i];
            for (std::size_t j = 0; j < v.n_in; ++j) {
                z += params[v.weight_offset + i * v.n_in + j] * acts[l][j];
            }
            if (l + 1 < views.size()) {
                z = spec.activation == Activation::Tanh ? std::tanh(z) : std::max(z, 0.0);
            }
            out[i] = z;
        }
        acts.push_back(std::move(out));
    }
    return acts;
}

}  // namespace

LossEvaluation batch_loss(const MlpSpec &spec, const ParamVector &params, const TaskDataset &data,
                          const BatchRef &batch, bool label_masking) {
    spec.validate();
    require(params.dim() == spec.parameter_count(), "batch_loss: parameter dimension does not match spec");
    if (batch.indices.empty()) {
        throw InvalidBatch("empty batch");
    }
    const auto views = layer_views(spec);
    LossEvaluation out{0.0, ParamVector(params.dim()), batch.id};

    for (std::size_t index : batch.indices) {
        if (index >= data.size()) {
            throw InvalidBatch("batch index " + std::to_string(index) + " out of range");
        }
        int label = data.labels[index];
        if (label_masking && !data.class_set.contains(label)) {
            label = 0;
        }
        if (label < 0 || static_cast<std::size_t>(label) >= spec.output_size()) {
            throw ContractViolation("label " + std::to_string(label) + " outside model output range");
        }
        const auto acts = forward_all(spec, views, params, data.inputs[index]);
        const auto &logits = acts.back();
        const double m = *std::max_element(logits.begin(), logits.end());
        double denom = 0.0;
        for (double z : logits) {
            denom += std::exp(z - m);
        }
        const double lse = m + std::log(denom);
        out.value += lse - logits[static_cast<std::size_t>(label)];

        std::vector<double> delta(logits.size());
        for (std::size_t k = 0; k < logits.size(); ++k) {
            delta[k] = std::exp(logits[k] - lse);
        }
        delta[static_cast<std::size_t>(label)] -= 1.0;

        for (std::size_t l = views.size(); l-- > 0;) {
            const LayerView &v = views[l];
            for (std::size_t i = 0; i < v.n_out; ++i) {
                for (std::size_t j = 0; j < v.n_in; ++j) {
                    out.gradient[v.weight_offset + i * v.n_in + j] += delta[i] * acts[l][j];
                }
                out.gradient[v.bias_offset + i] += delta[i];
            }
            if (l == 0) {
                break;
            }
            std::vector<double> prev(v.n_in);
            for (std::size_t j = 0; j < v.n_in; ++j) {
                double back = 0.0;
                for (std::size_t i = 0; i < v.n_out; ++i) {
                    back += params[v.weight_offset + i * v.n_in + j] * delta[i];
                }
                const double a = acts[l][j];
                prev[j] = back * (spec.activation == Activation::Tanh ? 1.0 - a * a : (a > 0.0 ? 1.0 : 0.0));
            }
            delta = std::move(prev);
        }
    }
    const auto n = static_cast<double>(batch.indices.size());
    out.value /= n;
    for (double &g : out.gradient) {
        g /= n;
    }
    return out;
}

double accuracy(const MlpSpec &spec, const ParamVector &params, const TaskDataset &data,
                std::optional<std::span<const int>> candidates) {
    if (data.size() == 0) {
        return 0.0;
    }
    const auto views = layer_views(spec);
    std::size_t correct = 0;
    for (std::size_t s = 0; s < data.size(); ++s) {
        const auto logits = forward_all(spec, views, params, data.inputs[s]).back();
        int best = -1;
        for (std::size_t k = 0; k < logits.size(); ++k) {
            const bool allowed = !candidates || std::find(candidates->begin(), candidates->end(),
                                                          static_cast<int>(k)) != candidates->end();
            if (allowed && (best < 0 || logits[k] > logits[static_cast<std::size_t>(best)])) {
                best = static_cast<int>(k);
            }
        }
        correct += best == data.labels[s] ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace altersgd::reference
