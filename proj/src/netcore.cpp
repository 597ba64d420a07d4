#include "fluctlab/netcore.hpp"

#include "fluctlab/error.hpp"
#include "fluctlab/rng.hpp"

#include <cmath>
#include <string>

namespace fluctlab::netcore {

void ArchitectureSpec::validate() const {
    if (encoder_dims.size() < 2 || decoder_dims.size() < 2) {
        throw InvalidArgument("each half needs at least one layer");
    }
    if (encoder_dims.front() != 2 || decoder_dims.back() != 2) {
        throw InvalidArgument("autoencoder input and output must be 2-dimensional");
    }
    if (encoder_dims.back() != 1 || decoder_dims.front() != 1) {
        throw InvalidArgument("latent dimension must be 1 on both sides of the bottleneck");
    }
    for (auto d : encoder_dims) {
        if (d == 0) throw InvalidArgument("zero-width encoder layer");
    }
    for (auto d : decoder_dims) {
        if (d == 0) throw InvalidArgument("zero-width decoder layer");
    }
}

std::size_t ArchitectureSpec::layer_count() const noexcept {
    return (encoder_dims.size() - 1) + (decoder_dims.size() - 1);
}

std::size_t ArchitectureSpec::in_dim(std::size_t layer) const {
    const auto enc = encoder_layer_count();
    return layer < enc ? encoder_dims.at(layer) : decoder_dims.at(layer - enc);
}

std::size_t ArchitectureSpec::out_dim(std::size_t layer) const {
    const auto enc = encoder_layer_count();
    return layer < enc ? encoder_dims.at(layer + 1) : decoder_dims.at(layer - enc + 1);
}

bool ArchitectureSpec::has_relu(std::size_t layer) const {
    const auto enc = encoder_layer_count();
    return layer + 1 != enc && layer + 1 != layer_count();
}

std::size_t ArchitectureSpec::encoder_neuron_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t k = 1; k < encoder_dims.size(); ++k) n += encoder_dims[k];
    return n;
}

std::size_t ArchitectureSpec::decoder_neuron_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t k = 1; k < decoder_dims.size(); ++k) n += decoder_dims[k];
    return n;
}

std::size_t ArchitectureSpec::neuron_count() const noexcept {
    return encoder_neuron_count() + decoder_neuron_count();
}

std::size_t ArchitectureSpec::parameter_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t k = 0; k < layer_count(); ++k) {
        n += out_dim(k) * in_dim(k) + out_dim(k);
    }
    return n;
}

NetworkState NetworkState::zeros(const ArchitectureSpec& spec) {
    spec.validate();
    NetworkState net{spec, {}};
    net.layers.reserve(spec.layer_count());
    for (std::size_t k = 0; k < spec.layer_count(); ++k) {
        net.layers.emplace_back(spec.in_dim(k), spec.out_dim(k));
    }
    return net;
}

GradientSet GradientSet::zeros_like(const NetworkState& net) {
    GradientSet g;
    g.layers.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        g.layers.emplace_back(layer.in_dim, layer.out_dim);
    }
    return g;
}

NetworkState init(const ArchitectureSpec& spec, std::uint64_t seed) {
    auto net = NetworkState::zeros(spec);
    SplitMix64 rng(seed);
    for (auto& layer : net.layers) {
        const double bound = std::sqrt(1.0 / static_cast<double>(layer.in_dim));
        for (auto& w : layer.weights) {
            w = rng.uniform(-bound, bound);
        }
    }
    return net;
}

ForwardTrace forward(const NetworkState& net, Point2 input) {
    if (!std::isfinite(input.x) || !std::isfinite(input.y)) {
        throw NumericError("non-finite network input");
    }
    const auto& arch = net.architecture;
    ForwardTrace trace;
    trace.input = input;
    trace.latent_layer = arch.encoder_layer_count() - 1;
    trace.pre.resize(net.layers.size());
    trace.post.resize(net.layers.size());

    std::vector<double> in{input.x, input.y};
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& layer = net.layers[k];
        if (in.size() != layer.in_dim) {
            throw InvalidArgument("layer " + std::to_string(k) + " input width mismatch");
        }
        auto& z = trace.pre[k];
        z.assign(layer.biases.begin(), layer.biases.end());
        for (std::size_t j = 0; j < layer.out_dim; ++j) {
            const double* row = &layer.weights[j * layer.in_dim];
            double acc = z[j];
            for (std::size_t i = 0; i < layer.in_dim; ++i) {
                acc += row[i] * in[i];
            }
            if (!std::isfinite(acc)) {
                throw NumericError("non-finite pre-activation in layer " + std::to_string(k));
            }
            z[j] = acc;
        }
        auto& a = trace.post[k];
        a = z;
        if (arch.has_relu(k)) {
            for (auto& v : a) {
                v = v > 0.0 ? v : 0.0;
            }
        }
        in = a;
    }
    return trace;
}

std::vector<ForwardTrace> forward_batch(const NetworkState& net, std::span<const Point2> inputs) {
    std::vector<ForwardTrace> traces;
    traces.reserve(inputs.size());
    for (const auto& p : inputs) {
        traces.push_back(forward(net, p));
    }
    return traces;
}

double mse(std::span<const Point2> targets, std::span<const Point2> outputs) {
    if (targets.size() != outputs.size()) {
        throw InvalidArgument("mse: target and output counts differ");
    }
    if (targets.empty()) {
        throw InvalidArgument("mse: empty batch");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const double dx = targets[i].x - outputs[i].x;
        const double dy = targets[i].y - outputs[i].y;
        sum += dx * dx + dy * dy;
    }
    return sum / (2.0 * static_cast<double>(targets.size()));
}

double reconstruction_mse(std::span<const ForwardTrace> traces) {
    std::vector<Point2> targets;
    std::vector<Point2> outputs;
    targets.reserve(traces.size());
    outputs.reserve(traces.size());
    for (const auto& t : traces) {
        targets.push_back(t.input);
        outputs.push_back(t.output());
    }
    return mse(targets, outputs);
}

GradientSet backward(const NetworkState& net, std::span<const Point2> batch,
                     std::span<const ForwardTrace> traces) {
    if (batch.size() != traces.size() || batch.empty()) {
        throw InvalidArgument("backward: batch and trace counts differ or are empty");
    }
    const auto& arch = net.architecture;
    const std::size_t layers = net.layers.size();
    auto grads = GradientSet::zeros_like(net);
    const double scale = 1.0 / static_cast<double>(batch.size());

    std::vector<double> delta;
    std::vector<double> prev_delta;
    for (std::size_t s = 0; s < batch.size(); ++s) {
        const auto& tr = traces[s];
        if (tr.pre.size() != layers || tr.post.size() != layers) {
            throw InvalidArgument("backward: trace does not match network depth");
        }
        for (std::size_t k = 0; k < layers; ++k) {
            if (tr.pre[k].size() != net.layers[k].out_dim) {
                throw InvalidArgument("backward: trace width mismatch at layer " + std::to_string(k));
            }
        }

        // d/d(output) of (1/2n) * sum of squared residuals.
        const auto out = tr.output();
        delta = {(out.x - batch[s].x) * scale, (out.y - batch[s].y) * scale};

        for (std::size_t k = layers; k-- > 0;) {
            const auto& layer = net.layers[k];
            auto& g = grads.layers[k];
            const double input0 = batch[s].x;
            const double input1 = batch[s].y;
            const double* in = k == 0 ? nullptr : tr.post[k - 1].data();

            for (std::size_t j = 0; j < layer.out_dim; ++j) {
                const double d = delta[j];
                if (d == 0.0) continue;
                g.biases[j] += d;
                double* grow = &g.weights[j * layer.in_dim];
                if (k == 0) {
                    grow[0] += d * input0;
                    grow[1] += d * input1;
                } else {
                    for (std::size_t i = 0; i < layer.in_dim; ++i) {
                        grow[i] += d * in[i];
                    }
                }
            }
            if (k == 0) break;

            prev_delta.assign(layer.in_dim, 0.0);
            for (std::size_t j = 0; j < layer.out_dim; ++j) {
                const double d = delta[j];
                if (d == 0.0) continue;
                const double* row = &layer.weights[j * layer.in_dim];
                for (std::size_t i = 0; i < layer.in_dim; ++i) {
                    prev_delta[i] += row[i] * d;
                }
            }
            if (arch.has_relu(k - 1)) {
                const auto& z = tr.pre[k - 1];
                for (std::size_t i = 0; i < prev_delta.size(); ++i) {
                    if (!(z[i] > 0.0)) prev_delta[i] = 0.0;
                }
            }
            delta.swap(prev_delta);
        }
    }
    return grads;
}

}  // namespace fluctlab::netcore
