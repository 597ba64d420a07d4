#include "fluctlab/capture.hpp"

#include "fluctlab/error.hpp"

namespace fluctlab {

namespace {
constexpr std::array<std::string_view, 5> kChannelNames = {
    "weights", "biases", "activations", "weight_grads", "bias_grads",
};
}  // namespace

std::string_view to_string(Channel channel) noexcept {
    return kChannelNames[static_cast<std::size_t>(channel)];
}

std::optional<Channel> parse_channel(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kChannelNames.size(); ++i) {
        if (kChannelNames[i] == name) return kAllChannels[i];
    }
    return std::nullopt;
}

std::size_t values_per_neuron(Channel channel, std::size_t in_dim) noexcept {
    return channel == Channel::weights || channel == Channel::weight_grads ? in_dim : 1;
}

std::span<const float> LayerCapture::values(Channel channel) const noexcept {
    switch (channel) {
    case Channel::weights: return weights;
    case Channel::biases: return biases;
    case Channel::activations: return activation_means;
    case Channel::weight_grads: return weight_grads;
    case Channel::bias_grads: return bias_grads;
    }
    return {};
}

std::span<float> LayerCapture::values(Channel channel) noexcept {
    switch (channel) {
    case Channel::weights: return weights;
    case Channel::biases: return biases;
    case Channel::activations: return activation_means;
    case Channel::weight_grads: return weight_grads;
    case Channel::bias_grads: return bias_grads;
    }
    return {};
}

std::span<const float> LayerCapture::neuron_values(Channel channel, std::size_t j) const noexcept {
    const auto per = values_per_neuron(channel, in_dim);
    return values(channel).subspan(j * per, per);
}

EpochSnapshot make_empty_snapshot(const netcore::ArchitectureSpec& arch) {
    EpochSnapshot snap;
    snap.layers.reserve(arch.layer_count());
    for (std::size_t k = 0; k < arch.layer_count(); ++k) {
        const auto in = arch.in_dim(k);
        const auto out = arch.out_dim(k);
        LayerCapture layer;
        layer.in_dim = in;
        layer.out_dim = out;
        layer.weights.assign(in * out, 0.0f);
        layer.biases.assign(out, 0.0f);
        layer.weight_grads.assign(in * out, 0.0f);
        layer.bias_grads.assign(out, 0.0f);
        layer.activation_means.assign(out, 0.0f);
        snap.layers.push_back(std::move(layer));
    }
    return snap;
}

EpochSnapshot capture_snapshot(std::uint32_t epoch, double loss, const netcore::NetworkState& net,
                               const netcore::GradientSet& grads,
                               std::span<const std::vector<double>> activation_means) {
    if (grads.layers.size() != net.layers.size() || activation_means.size() != net.layers.size()) {
        throw InvalidArgument("capture: gradient or activation layers do not match the network");
    }
    auto snap = make_empty_snapshot(net.architecture);
    snap.epoch = epoch;
    snap.loss = loss;
    auto narrow = [](const std::vector<double>& src, std::vector<float>& dst) {
        if (src.size() != dst.size()) {
            throw InvalidArgument("capture: channel size mismatch");
        }
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]);
    };
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto& layer = snap.layers[k];
        narrow(net.layers[k].weights, layer.weights);
        narrow(net.layers[k].biases, layer.biases);
        narrow(grads.layers[k].weights, layer.weight_grads);
        narrow(grads.layers[k].biases, layer.bias_grads);
        narrow(activation_means[k], layer.activation_means);
    }
    return snap;
}

netcore::NetworkState network_from_snapshot(const netcore::ArchitectureSpec& arch,
                                            const EpochSnapshot& snapshot) {
    auto net = netcore::NetworkState::zeros(arch);
    if (snapshot.layers.size() != net.layers.size()) {
        throw InvalidArgument("snapshot depth does not match the architecture");
    }
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const auto& src = snapshot.layers[k];
        auto& dst = net.layers[k];
        if (src.weights.size() != dst.weights.size() || src.biases.size() != dst.biases.size()) {
            throw InvalidArgument("snapshot layer " + std::to_string(k) + " has the wrong shape");
        }
        dst.weights.assign(src.weights.begin(), src.weights.end());
        dst.biases.assign(src.biases.begin(), src.biases.end());
    }
    return net;
}

}  // namespace fluctlab
