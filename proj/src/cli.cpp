#include "fluctlab/cli.hpp"

#include "fluctlab/error.hpp"
#include "fluctlab/report.hpp"
#include "fluctlab/runstore.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>

namespace fluctlab::cli {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Shared helpers

void ExperimentPlan::validate() const {
    if (shapes.empty()) throw InvalidArgument("plan needs at least one shape");
    if (learning_rates.empty()) throw InvalidArgument("plan needs at least one learning rate");
    for (double lr : learning_rates) {
        if (!(lr > 0.0)) throw InvalidArgument("learning rates must be positive");
    }
    if (epochs == 0) throw InvalidArgument("epochs must be at least 1");
    if (capture_every == 0) throw InvalidArgument("capture-every must be at least 1");
    if (sample_count == 0) throw InvalidArgument("count must be at least 1");
    if (parallelism == 0) throw InvalidArgument("parallelism must be at least 1");
    if (!(analysis.epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
    if (analysis.bins == 0) throw InvalidArgument("bins must be at least 1");
}

std::string lr_tag(double lr) {
    char buf[128];
    const auto res = std::to_chars(buf, buf + sizeof buf, lr, std::chars_format::fixed);
    return std::string(buf, res.ptr);
}

fs::path default_run_path(const trainer::RunConfig& config) {
    return fs::path("runs") / (std::string(shapegen::to_string(config.shape)) + "_" +
                               lr_tag(config.learning_rate) + "_" +
                               std::to_string(config.epochs) + ".nfl");
}

std::int64_t manifest_timestamp() {
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env != nullptr && *env != '\0') {
        try {
            return std::stoll(env);
        } catch (const std::exception&) {
            return 0;
        }
    }
    return 0;
}

trainer::TrainResult train_to_file(const trainer::RunConfig& config, const fs::path& path) {
    config.validate();
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) {
        throw IoError("cannot create run file " + path.string());
    }

    runstore::RunManifest manifest;
    manifest.config = config;
    manifest.created_utc = manifest_timestamp();
    runstore::RunWriter writer(file, manifest);
    try {
        auto result = trainer::train(config, [&](const EpochSnapshot& s) { writer.append(s); });
        writer.manifest().initial_loss = result.initial_loss;
        writer.manifest().final_loss = result.final_loss;
        writer.finish(true);
        return result;
    } catch (...) {
        try {
            writer.finish(false);
        } catch (const std::exception&) {
            // The header already says incomplete.
        }
        throw;
    }
}

namespace {

std::string join_paths(const std::vector<std::string>& items) {
    std::string s;
    for (const auto& i : items) {
        if (!s.empty()) s += ", ";
        s += i;
    }
    return s;
}

std::vector<shapegen::ShapeKind> parse_shapes(const std::vector<std::string>& names) {
    std::vector<shapegen::ShapeKind> shapes;
    for (const auto& n : names) {
        if (n == "all") {
            shapes.assign(shapegen::kAllShapes.begin(), shapegen::kAllShapes.end());
            continue;
        }
        const auto kind = shapegen::parse_shape(n);
        if (!kind) throw InvalidArgument("unknown shape '" + n + "'");
        shapes.push_back(*kind);
    }
    return shapes;
}

struct ArtifactSet {
    std::string report_json;
    std::string neurons_csv;
    std::string table_md;
    std::string table_csv;
    std::vector<std::string> figures;
};

/// Writes report JSON/CSV, tables and the per-run figures for one analyzed run.
/// Paths in the returned set are relative to `root`.
ArtifactSet write_run_artifacts(const fs::path& root, const std::string& stem,
                                const analysis::FluctuationReport& rep,
                                const report::ReconstructionResult& recon) {
    ArtifactSet a;
    a.report_json = (fs::path("reports") / (stem + ".report.json")).generic_string();
    a.neurons_csv = (fs::path("reports") / (stem + ".neurons.csv")).generic_string();
    a.table_md = (fs::path("reports") / (stem + ".table.md")).generic_string();
    a.table_csv = (fs::path("reports") / (stem + ".table.csv")).generic_string();

    report::write_file(root / a.report_json, analysis::report_to_json(rep) + "\n");
    report::write_file(root / a.neurons_csv, analysis::report_neurons_csv(rep));
    const auto table = report::fluctuation_table(rep);
    report::write_file(root / a.table_md, table.markdown);
    report::write_file(root / a.table_csv, table.csv);

    const std::string shape(shapegen::to_string(recon.shape));
    const auto recon_path = (fs::path("figures") / (stem + "_recon.svg")).generic_string();
    report::FigureSpec scatter{"Reconstruction of " + shape + ", lr " + lr_tag(recon.learning_rate)};
    report::write_file(root / recon_path, report::scatter_svg(recon, scatter));
    a.figures.push_back(recon_path);

    for (Channel ch : kAllChannels) {
        const std::string name(to_string(ch));
        const auto path = (fs::path("figures") / (stem + "_hist_" + name + ".svg")).generic_string();
        report::FigureSpec spec{"Fluctuations in " + name + " (" + shape + ", lr " +
                                    lr_tag(rep.run.config.learning_rate) + ")",
                                "per-neuron spread", "neurons"};
        report::write_file(root / path, report::hist_svg(rep, ch, spec));
        a.figures.push_back(path);
    }
    return a;
}

std::string run_stem(const trainer::RunConfig& c) {
    return std::string(shapegen::to_string(c.shape)) + "_" + lr_tag(c.learning_rate) + "_" +
           std::to_string(c.epochs);
}

json calibration_json(const analysis::EpsilonCalibration& cal) {
    return {
        {"default_epsilon", cal.default_epsilon},
        {"default_count", cal.default_count},
        {"calibrated_epsilon", cal.calibrated_epsilon ? json(*cal.calibrated_epsilon) : json(nullptr)},
        {"calibrated_count", cal.calibrated_count},
        {"red_flag", cal.red_flag()},
    };
}

// Target band for the weight-channel inactive count at the default seeds.
constexpr std::size_t kInactiveTargetMin = 40;
constexpr std::size_t kInactiveTargetMax = 80;

}  // namespace

// ---------------------------------------------------------------------------
// all

int cmd_all(const ExperimentPlan& plan, std::ostream& out, std::ostream& err) {
    plan.validate();
    const fs::path root = plan.output_dir;
    fs::create_directories(root);

    struct Job {
        trainer::RunConfig config;
    };
    struct Outcome {
        json entry;
        std::optional<report::ReconstructionResult> recon;
        bool ok = false;
    };

    std::vector<Job> jobs;
    for (auto shape : plan.shapes) {
        for (double lr : plan.learning_rates) {
            trainer::RunConfig c;
            c.shape = shape;
            c.learning_rate = lr;
            c.epochs = plan.epochs;
            c.data_seed = plan.data_seed;
            c.init_seed = plan.init_seed;
            c.capture_every = plan.capture_every;
            c.sample_count = plan.sample_count;
            jobs.push_back({c});
        }
    }

    std::vector<Outcome> outcomes(jobs.size());
    std::mutex log_mutex;

    auto run_job = [&](std::size_t i) {
        const auto& c = jobs[i].config;
        const auto stem = run_stem(c);
        const auto run_rel = default_run_path(c).generic_string();
        json entry = {
            {"shape", std::string(shapegen::to_string(c.shape))},
            {"learning_rate", c.learning_rate},
            {"run_file", run_rel},
        };
        try {
            const auto trained = train_to_file(c, root / run_rel);
            const auto reader = runstore::RunReader::open(root / run_rel);
            const auto recon = report::reconstruct(reader, report::dataset_for(reader.manifest()));
            entry["status"] = "ok";
            entry["initial_loss"] = trained.initial_loss;
            entry["final_loss"] = trained.final_loss;
            entry["final_mse"] = recon.final_mse;

            if (plan.analysis.mode == analysis::SpreadMode::deltas && trained.snapshots < 2) {
                // A single snapshot has no deltas; keep the reconstruction only.
                const auto recon_path = (fs::path("figures") / (stem + "_recon.svg")).generic_string();
                report::FigureSpec scatter{"Reconstruction of " +
                                           std::string(shapegen::to_string(c.shape)) + ", lr " +
                                           lr_tag(c.learning_rate)};
                report::write_file(root / recon_path, report::scatter_svg(recon, scatter));
                entry["analysis"] = nullptr;
                entry["analysis_skipped"] = "fewer than two snapshots";
                entry["figures"] = json::array({recon_path});
                outcomes[i] = {entry, recon, true};
                std::lock_guard lock(log_mutex);
                out << stem << ": final MSE " << recon.final_mse << ", too few snapshots to analyze\n";
                return;
            }

            const auto rep = analysis::analyze_run(root / run_rel, plan.analysis);
            const auto artifacts = write_run_artifacts(root, stem, rep, recon);
            const auto cal = analysis::calibrate_epsilon(
                rep.channel(Channel::weights).neurons, plan.analysis.epsilon, kInactiveTargetMin,
                kInactiveTargetMax);

            json inactive = json::object();
            json sos = json::object();
            for (const auto& ch : rep.channels) {
                const std::string name(to_string(ch.channel));
                inactive[name] = {{"encoder", ch.encoder.inactive.size()},
                                  {"decoder", ch.decoder.inactive.size()},
                                  {"total", ch.inactive_count()}};
                sos[name] = {{"encoder", ch.encoder.spread_of_spread},
                             {"decoder", ch.decoder.spread_of_spread}};
            }
            entry["inactive"] = inactive;
            entry["spread_of_spread"] = sos;
            entry["weight_inactive_calibration"] = calibration_json(cal);
            entry["report_json"] = artifacts.report_json;
            entry["neurons_csv"] = artifacts.neurons_csv;
            entry["table_md"] = artifacts.table_md;
            entry["table_csv"] = artifacts.table_csv;
            entry["figures"] = artifacts.figures;
            outcomes[i] = {entry, recon, true};
            std::lock_guard lock(log_mutex);
            out << stem << ": final MSE " << recon.final_mse << ", inactive weights "
                << rep.channel(Channel::weights).inactive_count() << "\n";
        } catch (const std::exception& e) {
            entry["status"] = "failed";
            entry["error"] = e.what();
            outcomes[i] = {entry, std::nullopt, false};
            std::lock_guard lock(log_mutex);
            err << stem << ": failed: " << e.what() << "\n";
        }
    };

    const unsigned workers = std::min<unsigned>(plan.parallelism, static_cast<unsigned>(jobs.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < jobs.size(); ++i) run_job(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < jobs.size(); i = next++) run_job(i);
            });
        }
    }

    // Per-shape comparison figures, in plan order.
    json comparison_figures = json::array();
    for (auto shape : plan.shapes) {
        std::vector<report::ReconstructionResult> results;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (jobs[i].config.shape == shape && outcomes[i].recon) {
                results.push_back(*outcomes[i].recon);
            }
        }
        if (results.empty()) continue;
        const std::string name(shapegen::to_string(shape));
        const auto rel = (fs::path("figures") / (name + "_comparison.svg")).generic_string();
        report::FigureSpec spec{"Reconstructions of " + name + " across learning rates"};
        report::write_file(root / rel, report::comparison_svg(results, spec));
        comparison_figures.push_back(rel);
    }

    bool any_failed = false;
    json runs = json::array();
    for (const auto& o : outcomes) {
        runs.push_back(o.entry);
        any_failed = any_failed || !o.ok;
    }
    json shapes = json::array();
    for (auto s : plan.shapes) shapes.push_back(std::string(shapegen::to_string(s)));

    json index = {
        {"schema", "fluctlab.index/1"},
        {"plan",
         {{"shapes", shapes},
          {"learning_rates", plan.learning_rates},
          {"epochs", plan.epochs},
          {"data_seed", plan.data_seed},
          {"init_seed", plan.init_seed},
          {"capture_every", plan.capture_every},
          {"sample_count", plan.sample_count},
          {"epsilon", plan.analysis.epsilon},
          {"bins", plan.analysis.bins},
          {"mode", std::string(analysis::to_string(plan.analysis.mode))}}},
        {"runs", runs},
        {"comparison_figures", comparison_figures},
        {"failed", any_failed},
    };
    report::write_file(root / "index.json", index.dump() + "\n");
    out << (root / "index.json").string() << "\n";
    return any_failed ? kExitRunFailed : kExitOk;
}

// ---------------------------------------------------------------------------
// Command-line parsing

namespace {

/// Flag values; unset flags fall back to the config file, then to defaults.
struct Flags {
    std::optional<std::string> config;
    std::optional<std::string> shape;
    std::vector<std::string> shapes;
    std::optional<std::uint32_t> count;
    std::optional<std::uint64_t> seed;
    std::optional<double> lr;
    std::vector<double> lrs;
    std::optional<std::uint32_t> epochs;
    std::optional<std::uint64_t> data_seed;
    std::optional<std::uint64_t> init_seed;
    std::optional<std::uint32_t> capture_every;
    std::optional<double> epsilon;
    std::optional<std::size_t> bins;
    std::optional<std::string> mode;
    std::optional<unsigned> parallelism;
    std::optional<std::string> outdir;
    std::optional<std::string> out;
    std::optional<std::string> run_file;
    std::vector<std::string> runs;
};

class Resolver {
public:
    explicit Resolver(const Flags& flags) : flags_(flags) {
        if (flags.config) {
            std::ifstream in(*flags.config);
            if (!in) throw InvalidArgument("cannot read config file " + *flags.config);
            try {
                config_ = json::parse(in);
            } catch (const json::exception& e) {
                throw InvalidArgument("malformed config file: " + std::string(e.what()));
            }
            if (!config_.is_object()) throw InvalidArgument("config file must hold a JSON object");
        }
    }

    template <class T>
    T get(const std::optional<T>& flag, const char* key, T fallback) const {
        if (flag) return *flag;
        if (config_.contains(key)) {
            try {
                return config_.at(key).get<T>();
            } catch (const json::exception&) {
                throw InvalidArgument(std::string("config key '") + key + "' has the wrong type");
            }
        }
        return fallback;
    }

    template <class T>
    std::vector<T> get_list(const std::vector<T>& flag, const char* key,
                            std::vector<T> fallback) const {
        if (!flag.empty()) return flag;
        if (config_.contains(key)) {
            try {
                return config_.at(key).get<std::vector<T>>();
            } catch (const json::exception&) {
                throw InvalidArgument(std::string("config key '") + key + "' has the wrong type");
            }
        }
        return fallback;
    }

    fs::path output_dir() const {
        if (flags_.outdir) return *flags_.outdir;
        if (config_.contains("outdir")) return config_.at("outdir").get<std::string>();
        if (const char* env = std::getenv("FLUCTLAB_OUT"); env != nullptr && *env != '\0') {
            return env;
        }
        return ".";
    }

    shapegen::ShapeKind shape() const {
        const auto name = get<std::string>(flags_.shape, "shape", "spiral");
        const auto kind = shapegen::parse_shape(name);
        if (!kind) throw InvalidArgument("unknown shape '" + name + "'");
        return *kind;
    }

    analysis::AnalysisOptions analysis_options() const {
        analysis::AnalysisOptions o;
        o.epsilon = get<double>(flags_.epsilon, "epsilon", analysis::kDefaultEpsilon);
        o.bins = get<std::size_t>(flags_.bins, "bins", analysis::kDefaultBins);
        const auto mode_name = get<std::string>(flags_.mode, "mode", "deltas");
        const auto mode = analysis::parse_spread_mode(mode_name);
        if (!mode) throw InvalidArgument("unknown spread mode '" + mode_name + "'");
        o.mode = *mode;
        if (!(o.epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
        if (o.bins == 0) throw InvalidArgument("bins must be at least 1");
        return o;
    }

    trainer::RunConfig run_config() const {
        trainer::RunConfig c;
        c.shape = shape();
        c.learning_rate = get<double>(flags_.lr, "lr", c.learning_rate);
        c.epochs = get<std::uint32_t>(flags_.epochs, "epochs", c.epochs);
        c.data_seed = get<std::uint64_t>(flags_.data_seed, "data_seed", c.data_seed);
        c.init_seed = get<std::uint64_t>(flags_.init_seed, "init_seed", c.init_seed);
        c.capture_every = get<std::uint32_t>(flags_.capture_every, "capture_every", c.capture_every);
        c.sample_count = get<std::uint32_t>(flags_.count, "count", c.sample_count);
        c.validate();
        return c;
    }

private:
    const Flags& flags_;
    json config_ = json::object();
};

fs::path resolve_under(const fs::path& root, const fs::path& p) {
    return p.is_absolute() ? p : root / p;
}

int do_gen(const Flags& flags, std::ostream& out) {
    const Resolver r(flags);
    const auto kind = r.shape();
    const auto count = r.get<std::uint32_t>(flags.count, "count", shapegen::kDefaultCount);
    const auto seed = r.get<std::uint64_t>(flags.seed, "seed", 42);
    if (count == 0) throw InvalidArgument("count must be at least 1");
    const auto dataset = shapegen::generate(kind, count, seed);

    const fs::path path = flags.out ? fs::path(*flags.out)
                                    : r.output_dir() / "data" /
                                          (std::string(shapegen::to_string(kind)) + "_" +
                                           std::to_string(seed) + ".csv");
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot create " + path.string());
    shapegen::export_csv(dataset, file);
    out << path.string() << "\n";
    return kExitOk;
}

int do_train(const Flags& flags, std::ostream& out) {
    const Resolver r(flags);
    const auto config = r.run_config();
    const fs::path path = flags.out ? fs::path(*flags.out)
                                    : resolve_under(r.output_dir(), default_run_path(config));
    const auto result = train_to_file(config, path);
    out << path.string() << "\n"
        << "initial loss " << result.initial_loss << ", final loss " << result.final_loss << ", "
        << result.snapshots << " snapshots\n";
    return kExitOk;
}

int do_analyze(const Flags& flags, std::ostream& out) {
    const Resolver r(flags);
    if (!flags.run_file) throw InvalidArgument("analyze needs --run <file>");
    const fs::path run_path = *flags.run_file;
    const auto options = r.analysis_options();
    const auto rep = analysis::analyze_run(run_path, options);

    const fs::path dir = flags.outdir ? fs::path(*flags.outdir) : run_path.parent_path();
    const auto stem = run_path.stem().string();
    const auto json_path = dir / (stem + ".report.json");
    const auto csv_path = dir / (stem + ".neurons.csv");
    report::write_file(json_path, analysis::report_to_json(rep) + "\n");
    report::write_file(csv_path, analysis::report_neurons_csv(rep));

    out << json_path.string() << "\n" << csv_path.string() << "\n";
    out << report::fluctuation_table(rep).markdown;
    return kExitOk;
}

std::vector<std::string> run_list(const Flags& flags, const Resolver& r) {
    return r.get_list<std::string>(flags.runs, "runs", {});
}

int do_report(const Flags& flags, std::ostream& out) {
    const Resolver r(flags);
    const auto runs = run_list(flags, r);
    if (runs.empty()) throw InvalidArgument("report needs --runs <a,b,c>");
    const auto options = r.analysis_options();
    const fs::path root = r.output_dir();

    std::vector<report::ReconstructionResult> recons;
    std::vector<std::string> written;
    for (const auto& run : runs) {
        const auto rep = analysis::analyze_run(run, options);
        const auto recon = report::reconstruct(fs::path(run), report::dataset_for(rep.run));
        const auto stem = fs::path(run).stem().string();
        const auto a = write_run_artifacts(root, stem, rep, recon);
        written.push_back(a.report_json);
        written.insert(written.end(), a.figures.begin(), a.figures.end());
        recons.push_back(recon);
    }
    const std::string shape(shapegen::to_string(recons.front().shape));
    const bool same_shape = std::all_of(recons.begin(), recons.end(),
                                        [&](const auto& x) { return x.shape == recons.front().shape; });
    if (recons.size() > 1 && same_shape) {
        const auto rel = (fs::path("figures") / (shape + "_comparison.svg")).generic_string();
        report::FigureSpec spec{"Reconstructions of " + shape + " across learning rates"};
        report::write_file(root / rel, report::comparison_svg(recons, spec));
        written.push_back(rel);
    }
    for (const auto& w : written) out << (root / w).string() << "\n";
    return kExitOk;
}

int do_compare(const Flags& flags, std::ostream& out, std::ostream& err) {
    const Resolver r(flags);
    const auto runs = run_list(flags, r);
    if (runs.size() < 2) throw InvalidArgument("compare needs at least two run files");
    const auto options = r.analysis_options();

    struct Row {
        std::string file;
        double lr;
        double mse;
        analysis::FluctuationReport rep;
    };
    std::vector<Row> rows;
    for (const auto& run : runs) {
        auto rep = analysis::analyze_run(run, options);
        const auto recon = report::reconstruct(fs::path(run), report::dataset_for(rep.run));
        rows.push_back({run, rep.run.config.learning_rate, recon.final_mse, std::move(rep)});
    }
    const auto shape = rows.front().rep.run.config.shape;
    for (const auto& row : rows) {
        if (row.rep.run.config.shape != shape) {
            err << "compare: runs are of different shapes (" << shapegen::to_string(shape) << ", "
                << shapegen::to_string(row.rep.run.config.shape) << ")\n";
            return kExitUsage;
        }
    }

    std::size_t best_mse = 0;
    std::size_t most_engaged = 0;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].mse < rows[best_mse].mse) best_mse = i;
        if (rows[i].rep.channel(Channel::activations).inactive_count() <
            rows[most_engaged].rep.channel(Channel::activations).inactive_count()) {
            most_engaged = i;
        }
    }

    out << "shape " << shapegen::to_string(shape) << ", epsilon "
        << analysis::format_double(options.epsilon) << "\n";
    out << "| lr | final MSE |";
    for (Channel ch : kAllChannels) out << " inactive " << to_string(ch) << " |";
    for (Channel ch : kAllChannels) out << " sos " << to_string(ch) << " (enc/dec) |";
    out << " flags |\n|---|---:|";
    for (std::size_t i = 0; i < 2 * kAllChannels.size(); ++i) out << "---:|";
    out << "---|\n";
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& row = rows[i];
        out << "| " << lr_tag(row.lr) << " | " << std::setprecision(6) << row.mse << " |";
        for (Channel ch : kAllChannels) out << ' ' << row.rep.channel(ch).inactive_count() << " |";
        for (Channel ch : kAllChannels) {
            const auto& c = row.rep.channel(ch);
            out << ' ' << std::setprecision(4) << c.encoder.spread_of_spread << " / "
                << c.decoder.spread_of_spread << " |";
        }
        std::vector<std::string> tags;
        if (i == best_mse) tags.emplace_back("lowest-mse");
        if (i == most_engaged) tags.emplace_back("fewest-inactive-activations");
        out << ' ' << join_paths(tags) << " |\n";
    }
    out << "lowest MSE: lr " << lr_tag(rows[best_mse].lr) << "\n"
        << "fewest inactive activation neurons: lr " << lr_tag(rows[most_engaged].lr) << "\n";
    return kExitOk;
}

int do_all(const Flags& flags, std::ostream& out, std::ostream& err) {
    const Resolver r(flags);
    ExperimentPlan plan;
    plan.shapes = parse_shapes(r.get_list<std::string>(flags.shapes, "shapes", {"spiral"}));
    plan.learning_rates = r.get_list<double>(flags.lrs, "learning_rates", plan.learning_rates);
    plan.epochs = r.get<std::uint32_t>(flags.epochs, "epochs", plan.epochs);
    plan.data_seed = r.get<std::uint64_t>(flags.data_seed, "data_seed", plan.data_seed);
    plan.init_seed = r.get<std::uint64_t>(flags.init_seed, "init_seed", plan.init_seed);
    plan.capture_every = r.get<std::uint32_t>(flags.capture_every, "capture_every", plan.capture_every);
    plan.sample_count = r.get<std::uint32_t>(flags.count, "count", plan.sample_count);
    plan.parallelism = r.get<unsigned>(flags.parallelism, "parallelism", plan.parallelism);
    plan.analysis = r.analysis_options();
    plan.output_dir = r.output_dir();
    plan.validate();
    return cmd_all(plan, out, err);
}

void add_training_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--lr", f.lr, "Learning rate");
    cmd->add_option("--epochs", f.epochs, "Training epochs (default 1000)");
    cmd->add_option("--data-seed", f.data_seed, "Dataset seed");
    cmd->add_option("--init-seed", f.init_seed, "Weight initialization seed");
    cmd->add_option("--capture-every", f.capture_every, "Snapshot stride in epochs");
    cmd->add_option("--count", f.count, "Points per dataset (default 500)");
}

void add_analysis_flags(CLI::App* cmd, Flags& f) {
    cmd->add_option("--epsilon", f.epsilon, "Inactivity threshold (default 1e-5)");
    cmd->add_option("--bins", f.bins, "Histogram bins per half (default 30)");
    cmd->add_option("--mode", f.mode, "Spread samples: deltas or raw_values");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    Flags f;
    CLI::App app{"fluctlab: learning-rate fluctuation experiments on a small autoencoder"};
    app.require_subcommand(1);
    app.add_option("--config", f.config, "JSON config file; flags override its values");
    app.add_option("--outdir", f.outdir, "Output directory (default $FLUCTLAB_OUT or .)");

    auto* gen = app.add_subcommand("gen", "Write a shape dataset as CSV");
    gen->add_option("--shape", f.shape, "Shape name")->required();
    gen->add_option("--count", f.count, "Number of points (default 500)");
    gen->add_option("--seed", f.seed, "Sampling seed");
    gen->add_option("--out", f.out, "Output CSV path");

    auto* train = app.add_subcommand("train", "Train one configuration into a run file");
    train->add_option("--shape", f.shape, "Shape name");
    add_training_flags(train, f);
    train->add_option("--out", f.out, "Run file path");

    auto* analyze = app.add_subcommand("analyze", "Fluctuation report for one run file");
    analyze->add_option("--run", f.run_file, "Run file")->required();
    add_analysis_flags(analyze, f);

    auto* rep = app.add_subcommand("report", "Reports, tables and figures for run files");
    rep->add_option("--runs", f.runs, "Comma-separated run files")->delimiter(',');
    add_analysis_flags(rep, f);

    auto* compare = app.add_subcommand("compare", "Side-by-side table of runs of one shape");
    compare->add_option("--runs,runs", f.runs, "Run files")->delimiter(',');
    add_analysis_flags(compare, f);

    auto* all = app.add_subcommand("all", "Train, analyze and report a whole plan");
    all->add_option("--shapes", f.shapes, "Comma-separated shapes, or 'all'")->delimiter(',');
    all->add_option("--lrs", f.lrs, "Comma-separated learning rates")->delimiter(',');
    add_training_flags(all, f);
    add_analysis_flags(all, f);
    all->add_option("--parallelism", f.parallelism, "Concurrent training runs");

    for (auto* sub : {gen, train, analyze, rep, compare, all}) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (gen->parsed()) return do_gen(f, out);
        if (train->parsed()) return do_train(f, out);
        if (analyze->parsed()) return do_analyze(f, out);
        if (rep->parsed()) return do_report(f, out);
        if (compare->parsed()) return do_compare(f, out, err);
        if (all->parsed()) return do_all(f, out, err);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitRunFailed;
    }
    return kExitUsage;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("fluctlab");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace fluctlab::cli
