#pragma once

#include "fluctlab/analysis.hpp"
#include "fluctlab/shapegen.hpp"
#include "fluctlab/trainer.hpp"

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace fluctlab::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRunFailed = 1;
inline constexpr int kExitUsage = 2;

struct ExperimentPlan {
    std::vector<shapegen::ShapeKind> shapes{shapegen::ShapeKind::spiral};
    std::vector<double> learning_rates{0.01, 0.001, 0.0001};
    std::uint32_t epochs = 1000;
    std::uint64_t data_seed = 42;
    std::uint64_t init_seed = 1;
    std::uint32_t capture_every = 1;
    std::uint32_t sample_count = shapegen::kDefaultCount;
    std::filesystem::path output_dir = ".";
    analysis::AnalysisOptions analysis;
    unsigned parallelism = 1;

    void validate() const;
};

/// Shortest decimal form used in file names and labels, e.g. 0.0001 -> "0.0001".
std::string lr_tag(double lr);

/// `runs/<shape>_<lr>_<epochs>.nfl` relative to an output directory.
std::filesystem::path default_run_path(const trainer::RunConfig& config);

/// UTC seconds recorded in new manifests: SOURCE_DATE_EPOCH when set, else 0.
std::int64_t manifest_timestamp();

/// Trains one configuration into a run file. On failure the file is left with
/// complete=false and the error is rethrown.
trainer::TrainResult train_to_file(const trainer::RunConfig& config,
                                   const std::filesystem::path& path);

/// Runs every (shape, learning rate) of the plan and writes an index.json.
/// Returns kExitRunFailed if any run failed.
int cmd_all(const ExperimentPlan& plan, std::ostream& out, std::ostream& err);

/// Full command-line entry point. argv[0] is the program name.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
/// Same, with the arguments after the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fluctlab::cli
