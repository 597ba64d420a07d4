#include "fluctlab/trainer.hpp"

#include <cmath>
#include <string>

namespace fluctlab::trainer {

using netcore::GradientSet;
using netcore::NetworkState;

void RunConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        throw InvalidArgument("learning rate must be a positive finite number");
    }
    if (epochs == 0) {
        throw InvalidArgument("epochs must be at least 1");
    }
    if (capture_every == 0) {
        throw InvalidArgument("capture_every must be at least 1");
    }
    if (sample_count == 0) {
        throw InvalidArgument("sample count must be at least 1");
    }
    if (!(adam.beta1 > 0.0 && adam.beta1 < 1.0) || !(adam.beta2 > 0.0 && adam.beta2 < 1.0)) {
        throw InvalidArgument("Adam betas must lie in (0, 1)");
    }
    if (!(adam.epsilon > 0.0)) {
        throw InvalidArgument("Adam epsilon must be positive");
    }
}

OptimizerState OptimizerState::zeros_like(const NetworkState& net) {
    return {GradientSet::zeros_like(net), GradientSet::zeros_like(net), 0};
}

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::uint64_t t, double lr, const AdamParams& hp) {
    if (grads.size() != params.size() || m.size() != params.size() || v.size() != params.size()) {
        throw InvalidArgument("adam: parameter, gradient and moment sizes differ");
    }
    const double td = static_cast<double>(t);
    const double correction1 = 1.0 - std::pow(hp.beta1, td);
    const double correction2 = 1.0 - std::pow(hp.beta2, td);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g;
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g * g;
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        params[i] -= lr * m_hat / (std::sqrt(v_hat) + hp.epsilon);
    }
}

void adam_step(NetworkState& net, const GradientSet& grads, OptimizerState& opt, double lr,
               const AdamParams& hp) {
    if (grads.layers.size() != net.layers.size() || opt.m.layers.size() != net.layers.size() ||
        opt.v.layers.size() != net.layers.size()) {
        throw InvalidArgument("adam: optimizer state does not match the network");
    }
    for (std::size_t k = 0; k < grads.layers.size(); ++k) {
        for (double g : grads.layers[k].weights) {
            if (!std::isfinite(g)) {
                throw NumericError("non-finite weight gradient in layer " + std::to_string(k));
            }
        }
        for (double g : grads.layers[k].biases) {
            if (!std::isfinite(g)) {
                throw NumericError("non-finite bias gradient in layer " + std::to_string(k));
            }
        }
    }

    opt.t += 1;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto& layer = net.layers[k];
        adam_update(layer.weights, grads.layers[k].weights, opt.m.layers[k].weights,
                    opt.v.layers[k].weights, opt.t, lr, hp);
        adam_update(layer.biases, grads.layers[k].biases, opt.m.layers[k].biases,
                    opt.v.layers[k].biases, opt.t, lr, hp);
    }
}

std::vector<std::vector<double>> mean_activations(std::span<const netcore::ForwardTrace> traces) {
    if (traces.empty()) {
        throw InvalidArgument("cannot average activations over an empty batch");
    }
    std::vector<std::vector<double>> means;
    means.reserve(traces.front().post.size());
    for (const auto& layer : traces.front().post) {
        means.emplace_back(layer.size(), 0.0);
    }
    for (const auto& tr : traces) {
        for (std::size_t k = 0; k < means.size(); ++k) {
            for (std::size_t j = 0; j < means[k].size(); ++j) {
                means[k][j] += tr.post[k][j];
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(traces.size());
    for (auto& layer : means) {
        for (auto& v : layer) v *= inv;
    }
    return means;
}

std::vector<std::vector<double>> probe_activations(const NetworkState& net,
                                                   const shapegen::ShapeDataset& dataset) {
    if (dataset.points.empty()) {
        throw InvalidArgument("probe dataset is empty");
    }
    const auto traces = netcore::forward_batch(net, dataset.points);
    return mean_activations(traces);
}

bool is_capture_epoch(std::uint32_t epoch, std::uint32_t capture_every) noexcept {
    return epoch == 1 || (capture_every != 0 && epoch % capture_every == 0);
}

std::uint32_t expected_snapshot_count(std::uint32_t epochs, std::uint32_t capture_every) noexcept {
    if (epochs == 0 || capture_every == 0) return 0;
    return epochs / capture_every + (capture_every > 1 ? 1u : 0u);
}

TrainResult train(const RunConfig& config, const SnapshotSink& sink,
                  const netcore::ArchitectureSpec& arch) {
    config.validate();
    arch.validate();

    const auto dataset = shapegen::generate(config.shape, config.sample_count, config.data_seed);
    auto net = netcore::init(arch, config.init_seed);
    auto opt = OptimizerState::zeros_like(net);

    auto evaluate = [&](std::uint32_t epoch) {
        try {
            return netcore::forward_batch(net, dataset.points);
        } catch (const NumericError& e) {
            throw TrainingAborted(std::string(e.what()) + " at epoch " + std::to_string(epoch),
                                  epoch);
        }
    };

    auto traces = evaluate(0);
    TrainResult result;
    result.initial_loss = netcore::reconstruction_mse(traces);
    double loss = result.initial_loss;

    for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto grads = netcore::backward(net, dataset.points, traces);
        try {
            adam_step(net, grads, opt, config.learning_rate, config.adam);
        } catch (const NumericError& e) {
            throw TrainingAborted(std::string(e.what()) + " at epoch " + std::to_string(epoch),
                                  epoch);
        }
        traces = evaluate(epoch);
        loss = netcore::reconstruction_mse(traces);
        if (!std::isfinite(loss)) {
            throw TrainingAborted("non-finite loss at epoch " + std::to_string(epoch), epoch);
        }
        if (sink && is_capture_epoch(epoch, config.capture_every)) {
            const auto means = mean_activations(traces);
            sink(capture_snapshot(epoch, loss, net, grads, means));
            ++result.snapshots;
        }
    }

    result.final_loss = loss;
    result.net = std::move(net);
    return result;
}

}  // namespace fluctlab::trainer
