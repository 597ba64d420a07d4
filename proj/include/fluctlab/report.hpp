#pragma once

#include "fluctlab/analysis.hpp"
#include "fluctlab/netcore.hpp"
#include "fluctlab/runstore.hpp"
#include "fluctlab/shapegen.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fluctlab::report {

using shapegen::Point2;

struct ReconstructionResult {
    shapegen::ShapeKind shape = shapegen::ShapeKind::spiral;
    double learning_rate = 0.0;
    std::vector<Point2> original;
    std::vector<Point2> reconstructed;
    double final_mse = 0.0;
};

/// Runs every dataset point through `net`.
ReconstructionResult reconstruct_with(const netcore::NetworkState& net,
                                      const shapegen::ShapeDataset& dataset, double learning_rate);

/// Reconstructs the dataset with the network stored in the run's last snapshot.
/// Throws InvalidArgument when the dataset's shape, seed or size differ from the
/// run manifest, or the run is incomplete.
ReconstructionResult reconstruct(const runstore::RunReader& run,
                                 const shapegen::ShapeDataset& dataset);
ReconstructionResult reconstruct(const std::filesystem::path& run_file,
                                 const shapegen::ShapeDataset& dataset);

/// Dataset regenerated from a run's manifest (shape, sample count, data seed).
shapegen::ShapeDataset dataset_for(const runstore::RunManifest& manifest);

struct FigureSpec {
    std::string title;
    std::string x_label = "x";
    std::string y_label = "y";
    int width = 800;
    int height = 600;
};

/// Plot frame of the scatter figures, in data units.
inline constexpr double kFrameMin = -1.2;
inline constexpr double kFrameMax = 1.2;

/// Original points as dark circles, reconstructed as accent circles, over an
/// equal-aspect [-1.2, 1.2]^2 frame. Points outside the frame are pinned to its edge.
std::string scatter_svg(const ReconstructionResult& result, const FigureSpec& spec);

/// Reconstructions of several runs side by side, one panel per run.
std::string comparison_svg(std::span<const ReconstructionResult> results, const FigureSpec& spec);

/// Encoder and decoder histograms of one channel's per-neuron spreads. Every bar
/// carries its count in a data-count attribute.
std::string hist_svg(const analysis::FluctuationReport& report, Channel channel,
                     const FigureSpec& spec);

struct FluctuationTable {
    std::string markdown;
    std::string csv;
};

inline constexpr std::string_view kTableColumns =
    "channel,half,neuron_count,inactive_count,min_spread,median_spread,max_spread,spread_of_spread";

/// One row per (channel, half). CSV values use shortest round-trip decimals.
FluctuationTable fluctuation_table(const analysis::FluctuationReport& report);

/// Writes bytes to `path`, creating parent directories. Throws IoError.
void write_file(const std::filesystem::path& path, std::string_view bytes);

}  // namespace fluctlab::report
