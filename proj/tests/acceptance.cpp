// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero if
// any criterion fails.

#include "fluctlab/analysis.hpp"
#include "fluctlab/cli.hpp"
#include "fluctlab/netcore.hpp"
#include "fluctlab/runstore.hpp"
#include "fluctlab/shapegen.hpp"
#include "fluctlab/trainer.hpp"
#include "oracles.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace fluctlab;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Tolerances and thresholds.
constexpr double kFdStep = 1e-5;
constexpr double kFdMaxRelError = 1e-4;
constexpr double kFdDenominatorFloor = 1e-8;  // both sides below this count as agreeing zeros
constexpr std::size_t kFdPoints = 10;
constexpr int kPropertyCases = 1000;
constexpr double kScaleRelError = 1e-12;
constexpr double kAdamZeroDrift = 1e-15;
constexpr double kAdamFirstStepTol = 1e-8;
constexpr double kCsvTol = 1e-8;
constexpr double kStandardizeTol = 1e-9;
constexpr std::size_t kInactiveMin = 40;
constexpr std::size_t kInactiveCalibratedMax = 80;
constexpr int kSoftRequired = 4;
constexpr std::uint32_t kEpochs = 1000;

// Seed pairs (data_seed, init_seed) for the soft orderings, fixed before any run.
constexpr std::pair<std::uint64_t, std::uint64_t> kSeedPairs[] = {
    {42, 7}, {1, 2}, {3, 4}, {5, 6}, {8, 9},
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o, double seconds) {
    std::printf("%s [%d] %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name.c_str(),
                o.detail.c_str(), seconds);
    std::fflush(stdout);
    if (!o.pass) ++failures;
}

void criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report(id, name, o, dt);
}

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "fluctlab_acceptance" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

int run_plan(const cli::ExperimentPlan& plan) {
    std::ostringstream out, err;
    const int code = cli::cmd_all(plan, out, err);
    if (code != 0) std::cerr << err.str();
    return code;
}

// Relative error with a floor on the denominator.
double rel_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), kFdDenominatorFloor});
    return std::abs(analytic - numeric) / denom;
}

// 1 ----------------------------------------------------------------------------
Outcome gradient_check() {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(-1, 1);
    const auto arch = oracle::small_arch();
    auto net = oracle::random_net(arch, rng, 0.8);
    std::vector<shapegen::Point2> batch;
    for (std::size_t i = 0; i < kFdPoints; ++i) batch.push_back({u(rng), u(rng)});
    const auto grads = netcore::backward(net, batch, netcore::forward_batch(net, batch));

    double worst = 0.0;
    std::size_t checked = 0;
    auto probe = [&](double& param, double analytic) {
        const double saved = param;
        param = saved + kFdStep;
        const double up = oracle::loss_of(net, batch);
        param = saved - kFdStep;
        const double down = oracle::loss_of(net, batch);
        param = saved;
        worst = std::max(worst, rel_error(analytic, (up - down) / (2 * kFdStep)));
        ++checked;
    };
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        for (std::size_t i = 0; i < net.layers[k].weights.size(); ++i) {
            probe(net.layers[k].weights[i], grads.layers[k].weights[i]);
        }
        for (std::size_t i = 0; i < net.layers[k].biases.size(); ++i) {
            probe(net.layers[k].biases[i], grads.layers[k].biases[i]);
        }
    }
    return {worst < kFdMaxRelError && checked == arch.parameter_count(),
            std::to_string(checked) + " parameters, max relative error " + fmt("%.3e", worst) +
                " (limit " + fmt("%.0e", kFdMaxRelError) + ")"};
}

// 2 ----------------------------------------------------------------------------
struct DefaultRuns {
    fs::path dir;
    json index;
};

Outcome determinism(DefaultRuns& keep) {
    cli::ExperimentPlan plan;
    plan.epochs = kEpochs;
    const auto a = scratch("determinism_a");
    const auto b = scratch("determinism_b");
    plan.output_dir = a;
    plan.parallelism = 1;
    if (run_plan(plan) != 0) return {false, "first execution failed"};
    plan.output_dir = b;
    plan.parallelism = 3;
    if (run_plan(plan) != 0) return {false, "second execution failed"};

    std::size_t files = 0, runs = 0, reports = 0, svgs = 0;
    std::vector<std::string> differing;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (!e.is_regular_file()) continue;
        const auto rel = fs::relative(e.path(), a);
        ++files;
        runs += rel.extension() == ".nfl";
        reports += rel.filename().string().ends_with(".report.json");
        svgs += rel.extension() == ".svg";
        if (!fs::exists(b / rel) || slurp(e.path()) != slurp(b / rel)) differing.push_back(rel.string());
    }
    std::size_t files_b = 0;
    for (const auto& e : fs::recursive_directory_iterator(b)) files_b += e.is_regular_file();

    keep.dir = a;
    keep.index = json::parse(slurp(a / "index.json"));
    const bool ok = differing.empty() && files == files_b && runs == 3 && reports == 3 && svgs >= 4;
    std::string detail = std::to_string(files) + " artifacts (" + std::to_string(runs) + " runs, " +
                         std::to_string(reports) + " reports, " + std::to_string(svgs) +
                         " svgs) byte-identical across two executions, parallelism 1 vs 3";
    if (!differing.empty()) detail = "differing: " + differing.front();
    return {ok, detail};
}

// 3 and 5 ------------------------------------------------------------------------
struct SeedPairResult {
    std::uint64_t data_seed = 0, init_seed = 0;
    double mse[3] = {0, 0, 0};                 // lr 0.01, 0.001, 0.0001
    std::size_t activation_inactive[3] = {0, 0, 0};
    bool ok = false;
};

std::vector<SeedPairResult> seed_pair_runs() {
    std::vector<SeedPairResult> out;
    for (auto [ds, is] : kSeedPairs) {
        cli::ExperimentPlan plan;
        plan.epochs = kEpochs;
        plan.data_seed = ds;
        plan.init_seed = is;
        plan.parallelism = 3;
        plan.output_dir = scratch("seeds_" + std::to_string(ds) + "_" + std::to_string(is));
        SeedPairResult r{ds, is};
        r.ok = run_plan(plan) == 0;
        if (r.ok) {
            const auto index = json::parse(slurp(plan.output_dir / "index.json"));
            for (std::size_t i = 0; i < 3; ++i) {
                const auto& run = index["runs"][i];
                r.mse[i] = run["final_mse"].get<double>();
                r.activation_inactive[i] = run["inactive"]["activations"]["total"].get<std::size_t>();
            }
        }
        std::printf("  seeds (%llu,%llu): MSE %.4e / %.4e / %.4e, inactive activations %zu / %zu / %zu\n",
                    static_cast<unsigned long long>(ds), static_cast<unsigned long long>(is),
                    r.mse[0], r.mse[1], r.mse[2], r.activation_inactive[0], r.activation_inactive[1],
                    r.activation_inactive[2]);
        std::fflush(stdout);
        out.push_back(r);
        fs::remove_all(plan.output_dir);
    }
    return out;
}

Outcome mse_ordering(const std::vector<SeedPairResult>& pairs) {
    int held = 0;
    for (const auto& p : pairs) held += p.ok && p.mse[0] < p.mse[1] && p.mse[1] < p.mse[2];
    return {held >= kSoftRequired, "MSE(0.01) < MSE(0.001) < MSE(0.0001) in " +
                                       std::to_string(held) + "/" + std::to_string(pairs.size()) +
                                       " seed pairs (need " + std::to_string(kSoftRequired) + ")"};
}

Outcome engagement_ordering(const std::vector<SeedPairResult>& pairs) {
    int held = 0;
    for (const auto& p : pairs) held += p.ok && p.activation_inactive[2] <= p.activation_inactive[0];
    return {held >= kSoftRequired,
            "inactive activations at lr 0.0001 <= at lr 0.01 in " + std::to_string(held) + "/" +
                std::to_string(pairs.size()) + " seed pairs (need " + std::to_string(kSoftRequired) + ")"};
}

// 4 ----------------------------------------------------------------------------
Outcome inactive_reproduction(const DefaultRuns& runs) {
    const json* entry = nullptr;
    for (const auto& r : runs.index["runs"]) {
        if (r["learning_rate"].get<double>() == 0.01) entry = &r;
    }
    if (entry == nullptr) return {false, "lr 0.01 run missing from index"};
    const auto& cal = (*entry)["weight_inactive_calibration"];
    const auto count = cal["default_count"].get<std::size_t>();
    if (count >= kInactiveMin) {
        return {true, "weights inactive at eps 1e-5: " + std::to_string(count) + "/195"};
    }
    if (!cal["calibrated_epsilon"].is_null()) {
        const double eps = cal["calibrated_epsilon"].get<double>();
        const auto n = cal["calibrated_count"].get<std::size_t>();
        const bool in_band = eps >= 1e-6 && eps <= 1e-3 && n >= kInactiveMin && n <= kInactiveCalibratedMax;
        return {in_band, "default eps 1e-5 flags " + std::to_string(count) +
                             "/195; calibrated eps " + fmt("%.3e", eps) + " flags " +
                             std::to_string(n) + "/195 (recorded in index.json)"};
    }
    return {false, "red flag: default eps flags " + std::to_string(count) +
                       "/195 and no eps in [1e-6, 1e-3] reaches [40, 80]"};
}

// 6 ----------------------------------------------------------------------------
std::vector<double> deltas_of(const std::vector<double>& x) {
    std::vector<double> d;
    for (std::size_t i = 1; i < x.size(); ++i) d.push_back(x[i] - x[i - 1]);
    return d;
}

Outcome metric_invariants() {
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> q(-1 << 20, 1 << 20);
    std::uniform_int_distribution<int> qshift(-1 << 10, 1 << 10);
    std::uniform_real_distribution<double> k(-100, 100), spread_u(0, 1e-3), log_e(-7, -2);
    auto dyadic_series = [&](std::size_t n) {
        std::vector<double> x(n);
        for (auto& v : x) v = std::ldexp(static_cast<double>(q(rng)), -24);
        return x;
    };
    int translation = 0, scale = 0, frozen = 0, permutation = 0, monotone = 0;
    for (int c = 0; c < kPropertyCases; ++c) {
        const auto x = dyadic_series(2 + rng() % 60);

        auto shifted = x;
        const double shift = std::ldexp(static_cast<double>(qshift(rng)), -8);
        for (auto& v : shifted) v += shift;
        translation += analysis::spread(deltas_of(shifted)) == analysis::spread(deltas_of(x));

        auto scaled = x;
        const double factor = k(rng);
        for (auto& v : scaled) v *= factor;
        const double base = analysis::spread(deltas_of(x));
        const double s = analysis::spread(deltas_of(scaled));
        scale += base == 0 ? s == 0 : std::abs(s - std::abs(factor) * base) / (std::abs(factor) * base) < kScaleRelError;

        const std::vector<double> constant(x.size(), x[0]);
        frozen += analysis::spread(deltas_of(constant)) == 0.0;

        std::vector<analysis::NeuronSpread> spreads;
        const std::size_t n = 1 + rng() % 195;
        for (std::size_t i = 0; i < n; ++i) {
            spreads.push_back({{i % 6, i, analysis::Half::encoder}, Channel::weights, spread_u(rng)});
        }
        const double sos = analysis::spread_of_spread(spreads);
        auto shuffled = spreads;
        std::shuffle(shuffled.begin(), shuffled.end(), rng);
        permutation += std::abs(analysis::spread_of_spread(shuffled) - sos) <= 1e-12 * sos + 1e-18;

        for (auto& sp : spreads) sp.spread = std::pow(10.0, log_e(rng));
        double e1 = std::pow(10.0, log_e(rng)), e2 = std::pow(10.0, log_e(rng));
        if (e1 > e2) std::swap(e1, e2);
        const auto a = analysis::detect_inactive(spreads, e1);
        const auto b = analysis::detect_inactive(spreads, e2);
        monotone += std::includes(b.begin(), b.end(), a.begin(), a.end());
    }
    const bool ok = translation == kPropertyCases && scale == kPropertyCases &&
                    frozen == kPropertyCases && permutation == kPropertyCases &&
                    monotone == kPropertyCases;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "translation %d, scale %d, frozen %d, permutation %d, monotone %d of %d cases",
                  translation, scale, frozen, permutation, monotone, kPropertyCases);
    return {ok, buf};
}

// 7 ----------------------------------------------------------------------------
Outcome adam_behavior() {
    auto net = netcore::init({}, 11);
    const auto before = net;
    auto opt = trainer::OptimizerState::zeros_like(net);
    const auto zero = netcore::GradientSet::zeros_like(net);
    for (int i = 0; i < 10; ++i) trainer::adam_step(net, zero, opt, 0.01, {});
    double drift = 0.0;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        for (std::size_t i = 0; i < net.layers[k].weights.size(); ++i) {
            drift = std::max(drift, std::abs(net.layers[k].weights[i] - before.layers[k].weights[i]));
        }
        for (std::size_t i = 0; i < net.layers[k].biases.size(); ++i) {
            drift = std::max(drift, std::abs(net.layers[k].biases[i] - before.layers[k].biases[i]));
        }
    }

    double worst_first = 0.0;
    for (double lr : {0.01, 0.001, 0.0001}) {
        std::vector<double> p{0.0}, g{1.0}, m{0.0}, v{0.0};
        trainer::adam_update(p, g, m, v, 1, lr, {});
        const double closed = oracle::adam_constant_gradient(0.0, 1.0, lr, 1)[1];
        worst_first = std::max({worst_first, std::abs(-p[0] - lr), std::abs(p[0] - closed)});
    }
    const bool ok = drift <= kAdamZeroDrift && worst_first <= kAdamFirstStepTol && opt.t == 10;
    return {ok, "zero-gradient drift " + fmt("%.1e", drift) + " over 10 steps; first-step |step - lr| " +
                    fmt("%.2e", worst_first)};
}

// 8 ----------------------------------------------------------------------------
Outcome format_round_trips() {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> uf(-3, 3);
    const netcore::ArchitectureSpec arch;
    std::vector<EpochSnapshot> snaps;
    for (std::uint32_t e = 1; e <= 5; ++e) {
        auto s = make_empty_snapshot(arch);
        s.epoch = e * 3;
        s.loss = uf(rng);
        for (auto& L : s.layers) {
            for (auto ch : kAllChannels) {
                for (auto& v : L.values(ch)) v = uf(rng);
            }
        }
        snaps.push_back(s);
    }
    runstore::RunManifest m;
    m.complete = true;
    std::stringstream io;
    runstore::write_run(m, snaps, io);
    std::istringstream in(io.str());
    runstore::RunReader reader(in);
    const bool run_ok = reader.load_all() == snaps && reader.manifest().snapshot_count == 5;

    double csv_err = 0.0;
    for (auto kind : shapegen::kAllShapes) {
        const auto ds = shapegen::generate(kind, shapegen::kDefaultCount, 42);
        std::stringstream csv;
        shapegen::export_csv(ds, csv);
        const auto back = oracle::parse_csv(csv);
        if (back.size() != ds.count()) return {false, "CSV row count mismatch"};
        for (std::size_t i = 0; i < back.size(); ++i) {
            csv_err = std::max({csv_err, std::abs(back[i].x - ds.points[i].x), std::abs(back[i].y - ds.points[i].y)});
        }
    }

    double worst_mean = 0.0, worst_std = 0.0;
    std::uniform_real_distribution<double> u(-50, 50);
    for (int c = 0; c < kPropertyCases; ++c) {
        std::vector<double> x(2 + rng() % 300);
        const double offset = u(rng), scale = std::pow(10.0, u(rng) / 10);
        for (auto& v : x) v = offset + scale * u(rng);
        const auto z = runstore::standardize_channel(x);
        const bool all_zero = std::all_of(z.begin(), z.end(), [](double v) { return v == 0.0; });
        long double mean = 0;
        for (double v : z) mean += v;
        worst_mean = std::max(worst_mean, std::abs(static_cast<double>(mean / z.size())));
        if (!all_zero) worst_std = std::max(worst_std, std::abs(oracle::two_pass_std(z) - 1.0));
    }
    const bool ok = run_ok && csv_err <= kCsvTol && worst_mean <= kStandardizeTol && worst_std <= kStandardizeTol;
    return {ok, std::string("run file ") + (run_ok ? "identical" : "MISMATCH") + "; CSV max error " +
                    fmt("%.2e", csv_err) + "; standardize |mean| " + fmt("%.1e", worst_mean) +
                    ", |std-1| " + fmt("%.1e", worst_std)};
}

// 9 ----------------------------------------------------------------------------
Outcome structural_counts(const DefaultRuns& runs) {
    const netcore::ArchitectureSpec arch;
    bool ok = arch.neuron_count() == 195 && arch.encoder_neuron_count() == 97 &&
              arch.decoder_neuron_count() == 98 && analysis::all_neurons(arch).size() == 195;
    std::size_t checked_runs = 0;
    for (const auto& r : runs.index["runs"]) {
        const auto reader = runstore::RunReader::open(runs.dir / r["run_file"].get<std::string>());
        ok = ok && reader.size() == kEpochs && reader.manifest().snapshot_count == kEpochs;
        const auto rep = json::parse(slurp(runs.dir / r["report_json"].get<std::string>()));
        for (const auto& [name, ch] : rep["channels"].items()) {
            for (const auto& [half, expected] : {std::pair{"encoder", 97u}, std::pair{"decoder", 98u}}) {
                std::size_t total = 0;
                for (const auto& c : ch[half]["histogram"]["counts"]) total += c.get<std::size_t>();
                ok = ok && total == expected && ch[half]["neuron_count"].get<std::size_t>() == expected;
            }
        }
        ++checked_runs;
    }
    ok = ok && checked_runs == 3;
    return {ok, "195 neurons (97 encoder, 98 decoder); " + std::to_string(checked_runs) +
                    " runs with " + std::to_string(kEpochs) +
                    " snapshots each; histogram counts sum to half sizes in every channel"};
}

}  // namespace

int main() {
    DefaultRuns defaults;
    criterion(1, "gradient correctness", gradient_check);
    criterion(2, "determinism", [&] { return determinism(defaults); });

    std::vector<SeedPairResult> pairs;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        pairs = seed_pair_runs();
    } catch (const std::exception& e) {
        std::printf("  seed pair runs failed: %s\n", e.what());
    }
    const double seeds_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("  seed pair runs took %.1fs\n", seeds_seconds);

    criterion(3, "reconstruction-quality ordering", [&] { return mse_ordering(pairs); });
    criterion(4, "inactive-neuron reproduction", [&] { return inactive_reproduction(defaults); });
    criterion(5, "engagement ordering", [&] { return engagement_ordering(pairs); });
    criterion(6, "metric invariants", metric_invariants);
    criterion(7, "adam unit behavior", adam_behavior);
    criterion(8, "format round-trips", format_round_trips);
    criterion(9, "structural counts", [&] { return structural_counts(defaults); });

    fs::remove_all(fs::temp_directory_path() / "fluctlab_acceptance");
    std::printf("%s: %d failing criteria\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
