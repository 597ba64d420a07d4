#pragma once

#include "fluctlab/capture.hpp"
#include "fluctlab/netcore.hpp"
#include "fluctlab/runstore.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fluctlab::analysis {

enum class Half { encoder, decoder };

std::string_view to_string(Half half) noexcept;

struct NeuronId {
    std::size_t layer = 0;
    std::size_t index = 0;
    Half half = Half::encoder;

    friend bool operator==(const NeuronId&, const NeuronId&) = default;
    friend auto operator<=>(const NeuronId& a, const NeuronId& b) {
        if (auto c = a.layer <=> b.layer; c != 0) return c;
        return a.index <=> b.index;
    }
};

/// Every neuron of `arch` in (layer, index) order.
std::vector<NeuronId> all_neurons(const netcore::ArchitectureSpec& arch);

struct NeuronSpread {
    NeuronId neuron;
    Channel channel = Channel::weights;
    double spread = 0.0;
};

/// How a neuron's samples are pooled before taking the spread.
enum class SpreadMode {
    deltas,      // consecutive-snapshot differences (default)
    raw_values,  // the stored values themselves
};

std::string_view to_string(SpreadMode mode) noexcept;
std::optional<SpreadMode> parse_spread_mode(std::string_view name) noexcept;

inline constexpr double kDefaultEpsilon = 1e-5;
inline constexpr std::size_t kDefaultBins = 30;

/// Differences between consecutive snapshots of every value the neuron owns in
/// `channel` (all incoming weights for the weight channels), pooled.
/// Throws InsufficientData with fewer than two snapshots.
std::vector<double> neuron_delta_series(std::span<const EpochSnapshot> snapshots, NeuronId neuron,
                                        Channel channel);
std::vector<double> neuron_delta_series(const runstore::RunReader& run, NeuronId neuron,
                                        Channel channel);

/// Every stored value the neuron owns in `channel` across all snapshots.
std::vector<double> neuron_value_series(std::span<const EpochSnapshot> snapshots, NeuronId neuron,
                                        Channel channel);

/// Population standard deviation, computed in two passes.
double spread(std::span<const double> samples);

/// Population standard deviation of the per-neuron spreads.
double spread_of_spread(std::span<const NeuronSpread> spreads);

/// Neurons with spread < epsilon, sorted by (layer, index).
std::vector<NeuronId> detect_inactive(std::span<const NeuronSpread> spreads, double epsilon);

struct Histogram {
    std::vector<double> edges;  // bins + 1 entries; [0, 0] for an all-zero input
    std::vector<std::size_t> counts;
};

/// Uniform bins over [0, max spread]; left-closed, the last bin also closed on the right.
Histogram histogram(std::span<const NeuronSpread> spreads, std::size_t bins);

struct HalfSummary {
    std::size_t neuron_count = 0;
    double spread_of_spread = 0.0;
    double min_spread = 0.0;
    double median_spread = 0.0;
    double max_spread = 0.0;
    std::vector<NeuronId> inactive;
    Histogram histogram;
};

struct ChannelReport {
    Channel channel = Channel::weights;
    std::vector<NeuronSpread> neurons;  // every neuron, (layer, index) order
    HalfSummary encoder;
    HalfSummary decoder;

    const HalfSummary& half(Half h) const noexcept { return h == Half::encoder ? encoder : decoder; }
    std::size_t inactive_count() const noexcept {
        return encoder.inactive.size() + decoder.inactive.size();
    }
};

struct AnalysisOptions {
    double epsilon = kDefaultEpsilon;
    std::size_t bins = kDefaultBins;
    SpreadMode mode = SpreadMode::deltas;
};

struct FluctuationReport {
    runstore::RunManifest run;
    AnalysisOptions options;
    std::uint32_t capture_stride = 1;  // optimizer steps between consecutive snapshots
    std::size_t snapshot_count = 0;
    std::vector<ChannelReport> channels;  // kAllChannels order

    const ChannelReport& channel(Channel c) const;
};

FluctuationReport analyze_snapshots(const runstore::RunManifest& manifest,
                                    std::span<const EpochSnapshot> snapshots,
                                    const AnalysisOptions& options = {});

/// Reads a complete run file and analyzes every channel and half.
FluctuationReport analyze_run(const std::filesystem::path& run_file,
                              const AnalysisOptions& options = {});

/// Search result for a threshold that flags a target number of neurons.
struct EpsilonCalibration {
    double default_epsilon = kDefaultEpsilon;
    std::size_t default_count = 0;
    std::optional<double> calibrated_epsilon;
    std::size_t calibrated_count = 0;
    bool default_in_target = false;  // default_count >= target_min

    /// Neither the default nor any epsilon in the search range hit the target.
    bool red_flag() const noexcept { return !default_in_target && !calibrated_epsilon; }
};

/// Scans a log-spaced grid of `steps` thresholds in [lo, hi] for the first epsilon
/// whose inactive count lands in [target_min, target_max].
EpsilonCalibration calibrate_epsilon(std::span<const NeuronSpread> spreads,
                                     double default_epsilon, std::size_t target_min,
                                     std::size_t target_max, double lo = 1e-6, double hi = 1e-3,
                                     std::size_t steps = 61);

/// Canonical JSON (sorted keys, compact).
std::string report_to_json(const FluctuationReport& report);

/// One row per neuron and channel: layer,index,half,channel,spread,inactive.
std::string report_neurons_csv(const FluctuationReport& report);

/// Shortest round-trip decimal form of a double.
std::string format_double(double value);

}  // namespace fluctlab::analysis
