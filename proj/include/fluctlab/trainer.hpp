#pragma once

#include "fluctlab/capture.hpp"
#include "fluctlab/error.hpp"
#include "fluctlab/netcore.hpp"
#include "fluctlab/shapegen.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace fluctlab::trainer {

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    friend bool operator==(const AdamParams&, const AdamParams&) = default;
};

struct RunConfig {
    shapegen::ShapeKind shape = shapegen::ShapeKind::spiral;
    double learning_rate = 0.01;
    std::uint32_t epochs = 1000;
    std::uint64_t data_seed = 42;
    std::uint64_t init_seed = 1;
    AdamParams adam;
    std::uint32_t capture_every = 1;
    std::uint32_t sample_count = shapegen::kDefaultCount;

    /// Throws InvalidArgument on a non-positive rate, zero epochs, or betas outside (0, 1).
    void validate() const;

    friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// First and second moment estimates, shaped like the network, plus the step count.
struct OptimizerState {
    netcore::GradientSet m;
    netcore::GradientSet v;
    std::uint64_t t = 0;

    static OptimizerState zeros_like(const netcore::NetworkState& net);
};

/// Raised when training cannot continue; carries the 1-based epoch it stopped at.
class TrainingAborted : public Error {
public:
    TrainingAborted(const std::string& what, std::uint32_t epoch) : Error(what), epoch_(epoch) {}
    std::uint32_t epoch() const noexcept { return epoch_; }

private:
    std::uint32_t epoch_;
};

/// Bias-corrected Adam on a flat parameter block. `t` is the step number after
/// incrementing (1 on the first step).
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::uint64_t t, double lr, const AdamParams& hp);

/// One optimizer step over every layer. Throws NumericError on a non-finite gradient
/// before touching any state.
void adam_step(netcore::NetworkState& net, const netcore::GradientSet& grads, OptimizerState& opt,
               double lr, const AdamParams& hp);

/// Per-layer, per-neuron mean of post-activation values over the traces.
std::vector<std::vector<double>> mean_activations(std::span<const netcore::ForwardTrace> traces);

std::vector<std::vector<double>> probe_activations(const netcore::NetworkState& net,
                                                   const shapegen::ShapeDataset& dataset);

/// Epochs at which a snapshot is emitted: every multiple of capture_every, plus epoch 1.
bool is_capture_epoch(std::uint32_t epoch, std::uint32_t capture_every) noexcept;
std::uint32_t expected_snapshot_count(std::uint32_t epochs, std::uint32_t capture_every) noexcept;

using SnapshotSink = std::function<void(const EpochSnapshot&)>;

struct TrainResult {
    netcore::NetworkState net;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    std::uint32_t snapshots = 0;
};

/// Full-batch training. Each epoch runs backward on the current traces, takes one
/// Adam step, then re-evaluates the whole dataset; the snapshot for that epoch holds
/// the post-step parameters, the gradients that produced the step, and the loss and
/// activation means of the post-step network.
TrainResult train(const RunConfig& config, const SnapshotSink& sink,
                  const netcore::ArchitectureSpec& arch = {});

}  // namespace fluctlab::trainer
