#include "fluctlab/analysis.hpp"

#include "fluctlab/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

namespace fluctlab::analysis {

using nlohmann::json;

std::string_view to_string(Half half) noexcept {
    return half == Half::encoder ? "encoder" : "decoder";
}

std::string_view to_string(SpreadMode mode) noexcept {
    return mode == SpreadMode::deltas ? "deltas" : "raw_values";
}

std::optional<SpreadMode> parse_spread_mode(std::string_view name) noexcept {
    if (name == "deltas") return SpreadMode::deltas;
    if (name == "raw_values" || name == "raw") return SpreadMode::raw_values;
    return std::nullopt;
}

std::vector<NeuronId> all_neurons(const netcore::ArchitectureSpec& arch) {
    std::vector<NeuronId> ids;
    ids.reserve(arch.neuron_count());
    for (std::size_t k = 0; k < arch.layer_count(); ++k) {
        const auto half = arch.is_encoder(k) ? Half::encoder : Half::decoder;
        for (std::size_t j = 0; j < arch.out_dim(k); ++j) ids.push_back({k, j, half});
    }
    return ids;
}

namespace {

void check_neuron(std::span<const EpochSnapshot> snapshots, NeuronId neuron) {
    const auto& first = snapshots.front();
    if (neuron.layer >= first.layers.size() || neuron.index >= first.layers[neuron.layer].out_dim) {
        throw InvalidArgument("neuron (" + std::to_string(neuron.layer) + ", " +
                              std::to_string(neuron.index) + ") is outside the run architecture");
    }
}

}  // namespace

std::vector<double> neuron_delta_series(std::span<const EpochSnapshot> snapshots, NeuronId neuron,
                                        Channel channel) {
    if (snapshots.size() < 2) {
        throw InsufficientData("fluctuation deltas need at least two snapshots");
    }
    check_neuron(snapshots, neuron);
    const auto per = snapshots.front().layers[neuron.layer].neuron_values(channel, neuron.index).size();
    std::vector<double> deltas;
    deltas.reserve(per * (snapshots.size() - 1));
    for (std::size_t t = 1; t < snapshots.size(); ++t) {
        const auto prev = snapshots[t - 1].layers[neuron.layer].neuron_values(channel, neuron.index);
        const auto cur = snapshots[t].layers[neuron.layer].neuron_values(channel, neuron.index);
        for (std::size_t i = 0; i < per; ++i) {
            deltas.push_back(static_cast<double>(cur[i]) - static_cast<double>(prev[i]));
        }
    }
    return deltas;
}

std::vector<double> neuron_delta_series(const runstore::RunReader& run, NeuronId neuron,
                                        Channel channel) {
    if (run.size() < 2) {
        throw InsufficientData("fluctuation deltas need at least two snapshots");
    }
    const auto series = run.neuron_series(neuron.layer, neuron.index, channel);
    std::vector<double> deltas;
    deltas.reserve(series.front().size() * (series.size() - 1));
    for (std::size_t t = 1; t < series.size(); ++t) {
        for (std::size_t i = 0; i < series[t].size(); ++i) {
            deltas.push_back(static_cast<double>(series[t][i]) -
                             static_cast<double>(series[t - 1][i]));
        }
    }
    return deltas;
}

std::vector<double> neuron_value_series(std::span<const EpochSnapshot> snapshots, NeuronId neuron,
                                        Channel channel) {
    if (snapshots.empty()) {
        throw InsufficientData("no snapshots to read values from");
    }
    check_neuron(snapshots, neuron);
    std::vector<double> values;
    for (const auto& snap : snapshots) {
        const auto v = snap.layers[neuron.layer].neuron_values(channel, neuron.index);
        values.insert(values.end(), v.begin(), v.end());
    }
    return values;
}

double spread(std::span<const double> samples) {
    if (samples.empty()) {
        throw InvalidArgument("spread of an empty sample");
    }
    const double n = static_cast<double>(samples.size());
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= n;
    double ss = 0.0;
    for (double s : samples) ss += (s - mean) * (s - mean);
    return std::sqrt(ss / n);
}

double spread_of_spread(std::span<const NeuronSpread> spreads) {
    if (spreads.empty()) {
        throw InvalidArgument("spread of spread over no neurons");
    }
    std::vector<double> values;
    values.reserve(spreads.size());
    for (const auto& s : spreads) values.push_back(s.spread);
    return spread(values);
}

std::vector<NeuronId> detect_inactive(std::span<const NeuronSpread> spreads, double epsilon) {
    if (!(epsilon > 0.0)) {
        throw InvalidArgument("inactivity threshold must be positive");
    }
    std::vector<NeuronId> inactive;
    for (const auto& s : spreads) {
        if (s.spread < epsilon) inactive.push_back(s.neuron);
    }
    std::sort(inactive.begin(), inactive.end());
    return inactive;
}

Histogram histogram(std::span<const NeuronSpread> spreads, std::size_t bins) {
    if (bins == 0) {
        throw InvalidArgument("histogram needs at least one bin");
    }
    double max_spread = 0.0;
    for (const auto& s : spreads) max_spread = std::max(max_spread, s.spread);

    Histogram h;
    if (max_spread == 0.0) {
        h.edges = {0.0, 0.0};
        h.counts = {spreads.size()};
        return h;
    }
    h.edges.resize(bins + 1);
    for (std::size_t i = 0; i <= bins; ++i) {
        h.edges[i] = max_spread * static_cast<double>(i) / static_cast<double>(bins);
    }
    h.edges.back() = max_spread;
    h.counts.assign(bins, 0);
    for (const auto& s : spreads) {
        auto idx = static_cast<std::size_t>(std::floor(s.spread / max_spread * static_cast<double>(bins)));
        idx = std::min(idx, bins - 1);
        // Keep the bin consistent with the published edges at boundaries.
        while (idx > 0 && s.spread < h.edges[idx]) --idx;
        while (idx + 1 < bins && s.spread >= h.edges[idx + 1]) ++idx;
        ++h.counts[idx];
    }
    return h;
}

namespace {

double median_of(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

HalfSummary summarize(std::span<const NeuronSpread> spreads, const AnalysisOptions& options) {
    HalfSummary h;
    h.neuron_count = spreads.size();
    if (spreads.empty()) return h;
    std::vector<double> values;
    values.reserve(spreads.size());
    for (const auto& s : spreads) values.push_back(s.spread);
    h.spread_of_spread = spread_of_spread(spreads);
    h.min_spread = *std::min_element(values.begin(), values.end());
    h.max_spread = *std::max_element(values.begin(), values.end());
    h.median_spread = median_of(values);
    h.inactive = detect_inactive(spreads, options.epsilon);
    h.histogram = histogram(spreads, options.bins);
    return h;
}

}  // namespace

const ChannelReport& FluctuationReport::channel(Channel c) const {
    for (const auto& ch : channels) {
        if (ch.channel == c) return ch;
    }
    throw InvalidArgument("channel " + std::string(to_string(c)) + " not present in report");
}

FluctuationReport analyze_snapshots(const runstore::RunManifest& manifest,
                                    std::span<const EpochSnapshot> snapshots,
                                    const AnalysisOptions& options) {
    if (!(options.epsilon > 0.0)) {
        throw InvalidArgument("inactivity threshold must be positive");
    }
    if (options.bins == 0) {
        throw InvalidArgument("histogram needs at least one bin");
    }
    if (options.mode == SpreadMode::deltas && snapshots.size() < 2) {
        throw InsufficientData("fluctuation analysis needs at least two snapshots");
    }
    if (snapshots.empty()) {
        throw InsufficientData("fluctuation analysis needs at least one snapshot");
    }

    FluctuationReport report;
    report.run = manifest;
    report.options = options;
    report.capture_stride = manifest.config.capture_every;
    report.snapshot_count = snapshots.size();

    const auto neurons = all_neurons(manifest.architecture);
    for (Channel channel : kAllChannels) {
        ChannelReport ch;
        ch.channel = channel;
        ch.neurons.reserve(neurons.size());
        std::vector<NeuronSpread> enc;
        std::vector<NeuronSpread> dec;
        for (const auto& id : neurons) {
            const auto samples = options.mode == SpreadMode::deltas
                                     ? neuron_delta_series(snapshots, id, channel)
                                     : neuron_value_series(snapshots, id, channel);
            NeuronSpread ns{id, channel, spread(samples)};
            ch.neurons.push_back(ns);
            (id.half == Half::encoder ? enc : dec).push_back(ns);
        }
        ch.encoder = summarize(enc, options);
        ch.decoder = summarize(dec, options);
        report.channels.push_back(std::move(ch));
    }
    return report;
}

FluctuationReport analyze_run(const std::filesystem::path& run_file, const AnalysisOptions& options) {
    const auto reader = runstore::RunReader::open(run_file);
    if (!reader.manifest().complete) {
        throw InvalidArgument("run file " + run_file.string() + " is incomplete");
    }
    const auto snapshots = reader.load_all();
    return analyze_snapshots(reader.manifest(), snapshots, options);
}

EpsilonCalibration calibrate_epsilon(std::span<const NeuronSpread> spreads, double default_epsilon,
                                     std::size_t target_min, std::size_t target_max, double lo,
                                     double hi, std::size_t steps) {
    if (!(lo > 0.0) || !(hi >= lo) || steps < 2) {
        throw InvalidArgument("calibration range must be positive and non-empty");
    }
    EpsilonCalibration cal;
    cal.default_epsilon = default_epsilon;
    cal.default_count = detect_inactive(spreads, default_epsilon).size();
    cal.default_in_target = cal.default_count >= target_min;

    const double log_lo = std::log10(lo);
    const double log_hi = std::log10(hi);
    for (std::size_t i = 0; i < steps; ++i) {
        const double eps = std::pow(10.0, log_lo + (log_hi - log_lo) * static_cast<double>(i) /
                                                       static_cast<double>(steps - 1));
        const auto count = detect_inactive(spreads, eps).size();
        if (count >= target_min && count <= target_max) {
            cal.calibrated_epsilon = eps;
            cal.calibrated_count = count;
            break;
        }
    }
    return cal;
}

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

namespace {

json half_json(const HalfSummary& h) {
    json inactive = json::array();
    for (const auto& id : h.inactive) {
        inactive.push_back({{"layer", id.layer}, {"index", id.index}});
    }
    return {
        {"neuron_count", h.neuron_count},
        {"spread_of_spread", h.spread_of_spread},
        {"min_spread", h.min_spread},
        {"median_spread", h.median_spread},
        {"max_spread", h.max_spread},
        {"inactive_count", h.inactive.size()},
        {"inactive", inactive},
        {"histogram", {{"edges", h.histogram.edges}, {"counts", h.histogram.counts}}},
    };
}

}  // namespace

std::string report_to_json(const FluctuationReport& report) {
    const auto& cfg = report.run.config;
    json j;
    j["schema"] = "fluctlab.report/1";
    j["run"] = {
        {"shape", std::string(shapegen::to_string(cfg.shape))},
        {"learning_rate", cfg.learning_rate},
        {"epochs", cfg.epochs},
        {"data_seed", cfg.data_seed},
        {"init_seed", cfg.init_seed},
        {"final_loss", report.run.final_loss ? json(*report.run.final_loss) : json(nullptr)},
    };
    j["epsilon"] = report.options.epsilon;
    j["bins"] = report.options.bins;
    j["mode"] = std::string(to_string(report.options.mode));
    j["capture_stride"] = report.capture_stride;
    j["snapshot_count"] = report.snapshot_count;

    json channels = json::object();
    for (const auto& ch : report.channels) {
        json spreads = json::array();
        for (const auto& n : ch.neurons) spreads.push_back(n.spread);
        channels[std::string(to_string(ch.channel))] = {
            {"encoder", half_json(ch.encoder)},
            {"decoder", half_json(ch.decoder)},
            {"spreads", spreads},
        };
    }
    j["channels"] = channels;
    return j.dump();
}

std::string report_neurons_csv(const FluctuationReport& report) {
    std::ostringstream out;
    out << "layer,index,half,channel,spread,inactive\n";
    for (const auto& ch : report.channels) {
        for (const auto& n : ch.neurons) {
            out << n.neuron.layer << ',' << n.neuron.index << ',' << to_string(n.neuron.half) << ','
                << to_string(ch.channel) << ',' << format_double(n.spread) << ','
                << (n.spread < report.options.epsilon ? 1 : 0) << '\n';
        }
    }
    return out.str();
}

}  // namespace fluctlab::analysis
