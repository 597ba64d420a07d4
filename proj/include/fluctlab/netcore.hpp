#pragma once

#include "fluctlab/shapegen.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace fluctlab::netcore {

using shapegen::Point2;

/// Layer sizes of the two halves. The encoder ends in the 1-wide latent that the
/// decoder starts from; the last layer of each half is linear, all others use ReLU.
struct ArchitectureSpec {
    std::vector<std::size_t> encoder_dims{2, 64, 32, 1};
    std::vector<std::size_t> decoder_dims{1, 32, 64, 2};

    /// Throws InvalidArgument unless the chain is 2 -> ... -> 1 -> ... -> 2 with
    /// no zero-width layer.
    void validate() const;

    std::size_t layer_count() const noexcept;
    std::size_t encoder_layer_count() const noexcept { return encoder_dims.size() - 1; }
    std::size_t in_dim(std::size_t layer) const;
    std::size_t out_dim(std::size_t layer) const;
    bool has_relu(std::size_t layer) const;
    bool is_encoder(std::size_t layer) const { return layer < encoder_layer_count(); }

    std::size_t neuron_count() const noexcept;
    std::size_t encoder_neuron_count() const noexcept;
    std::size_t decoder_neuron_count() const noexcept;
    std::size_t parameter_count() const noexcept;

    friend bool operator==(const ArchitectureSpec&, const ArchitectureSpec&) = default;
};

/// Weights are stored row-major: weights[j * in_dim + i] connects input i to neuron j.
struct LayerParams {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<double> weights;
    std::vector<double> biases;

    LayerParams() = default;
    LayerParams(std::size_t in, std::size_t out)
        : in_dim(in), out_dim(out), weights(in * out, 0.0), biases(out, 0.0) {}

    double& w(std::size_t j, std::size_t i) { return weights[j * in_dim + i]; }
    double w(std::size_t j, std::size_t i) const { return weights[j * in_dim + i]; }

    friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct NetworkState {
    ArchitectureSpec architecture;
    std::vector<LayerParams> layers;

    /// All-zero parameters for `spec`.
    static NetworkState zeros(const ArchitectureSpec& spec);

    friend bool operator==(const NetworkState&, const NetworkState&) = default;
};

/// Mirrors NetworkState shapes: one gradient matrix and vector per layer.
struct GradientSet {
    std::vector<LayerParams> layers;

    static GradientSet zeros_like(const NetworkState& net);
};

struct ForwardTrace {
    Point2 input;
    std::vector<std::vector<double>> pre;   // per layer, before activation
    std::vector<std::vector<double>> post;  // per layer, after activation (== pre on linear layers)
    std::size_t latent_layer = 0;

    double latent() const { return post[latent_layer][0]; }
    Point2 output() const { return {post.back()[0], post.back()[1]}; }
};

/// Uniform weights in [-sqrt(1/in_dim), +sqrt(1/in_dim)] drawn layer by layer,
/// row-major, from SplitMix64(seed); zero biases.
NetworkState init(const ArchitectureSpec& spec, std::uint64_t seed);

/// Throws NumericError naming the layer if any intermediate goes non-finite.
ForwardTrace forward(const NetworkState& net, Point2 input);

std::vector<ForwardTrace> forward_batch(const NetworkState& net, std::span<const Point2> inputs);

/// Mean over all 2n scalar residuals.
double mse(std::span<const Point2> targets, std::span<const Point2> outputs);

/// MSE of the traced outputs against their own inputs (reconstruction loss).
double reconstruction_mse(std::span<const ForwardTrace> traces);

/// Exact gradient of the batch-mean reconstruction MSE; ReLU'(0) is taken as 0.
GradientSet backward(const NetworkState& net, std::span<const Point2> batch,
                     std::span<const ForwardTrace> traces);

}  // namespace fluctlab::netcore
