#pragma once

#include "fluctlab/netcore.hpp"

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace fluctlab {

/// Per-neuron quantities tracked across epochs.
enum class Channel {
    weights,
    biases,
    activations,
    weight_grads,
    bias_grads,
};

inline constexpr std::array<Channel, 5> kAllChannels = {
    Channel::weights, Channel::biases, Channel::activations, Channel::weight_grads,
    Channel::bias_grads,
};

std::string_view to_string(Channel channel) noexcept;
std::optional<Channel> parse_channel(std::string_view name) noexcept;

/// One layer's captured state, stored at 32-bit precision.
struct LayerCapture {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    std::vector<float> weights;       // out_dim x in_dim, row-major
    std::vector<float> biases;        // out_dim
    std::vector<float> weight_grads;  // out_dim x in_dim, row-major
    std::vector<float> bias_grads;    // out_dim
    std::vector<float> activation_means;  // out_dim

    std::span<const float> values(Channel channel) const noexcept;
    std::span<float> values(Channel channel) noexcept;

    /// Values of `channel` belonging to output neuron j (a weight row or a single entry).
    std::span<const float> neuron_values(Channel channel, std::size_t j) const noexcept;

    friend bool operator==(const LayerCapture&, const LayerCapture&) = default;
};

/// Number of values each neuron owns in `channel` for a layer of fan-in `in_dim`.
std::size_t values_per_neuron(Channel channel, std::size_t in_dim) noexcept;

struct EpochSnapshot {
    std::uint32_t epoch = 0;
    double loss = 0.0;
    std::vector<LayerCapture> layers;

    friend bool operator==(const EpochSnapshot&, const EpochSnapshot&) = default;
};

/// Empty snapshot with every channel sized for `arch`.
EpochSnapshot make_empty_snapshot(const netcore::ArchitectureSpec& arch);

/// Narrows the network, its gradients, and per-neuron activation means to 32-bit.
EpochSnapshot capture_snapshot(std::uint32_t epoch, double loss, const netcore::NetworkState& net,
                               const netcore::GradientSet& grads,
                               std::span<const std::vector<double>> activation_means);

/// Rebuilds a 64-bit network from the stored weights and biases.
netcore::NetworkState network_from_snapshot(const netcore::ArchitectureSpec& arch,
                                            const EpochSnapshot& snapshot);

}  // namespace fluctlab
