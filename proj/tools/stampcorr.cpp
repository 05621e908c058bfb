/*
   Copyright 2026 The stampcorr Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

// stampcorr: simulate, analyse and round-trip time-stamped interferometer data.
//
// Exit codes: 0 success, 2 configuration, 3 I/O, 4 data format, 5 round-trip failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "stampcorr/analysis.hpp"
#include "stampcorr/roundtrip.hpp"
#include "stampcorr/simulator.hpp"

namespace fs = std::filesystem;
using namespace stampcorr;

namespace {

enum ExitCode { kOk = 0, kConfig = 2, kIo = 3, kData = 4, kRoundtrip = 5 };

struct Options {
    std::string config;
    std::string out;
    std::string data;
    std::optional<std::uint64_t> seed;
    int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    std::string filter;
    double bin_width = 0.01;
};

ProtocolConfig load_config(const Options& o)
{
    const auto kv = KeyValueConfig::load(o.config);
    auto cfg = load_protocol(kv);
    kv.reject_unused();
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    return cfg;
}

AnalysisOptions analysis_options(const Options& o, bool correlations)
{
    AnalysisOptions a;
    a.bin_width = o.bin_width;
    if (!correlations) {
        a.sources.clear();
    } else if (!o.filter.empty()) {
        try {
            a.sources = {source_from_string(o.filter)};
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
    return a;
}

AnalysisResult analyse_directory(const fs::path& dir, const AnalysisOptions& options, int jobs)
{
    const auto pairs = find_stamp_pairs(dir);
    Analyzer analyzer(options);
    reduce_runs_parallel(analyzer, static_cast<int>(pairs.size()), jobs, [&](int i) {
        return load_run(pairs[static_cast<std::size_t>(i)], i + 1, options.segmentation);
    });
    return analyzer.finish();
}

void print_periods(const AnalysisResult& r)
{
    for (const auto& [source, _] : r.correlations) {
        if (const auto t = r.median_period(source)) {
            std::printf("fitted period C_%s: %.3f s\n", to_string(source).c_str(), *t);
        } else {
            std::printf("C_%s: no oscillation detected\n", to_string(source).c_str());
        }
    }
}

int cmd_simulate(const Options& o)
{
    const auto cfg = load_config(o);
    const auto summary = run_protocol(cfg, o.out);
    std::printf("runs %d, events %zu (stationary %zu), lost at middle plates %zu\n", summary.runs, summary.events,
                summary.stationary_events, summary.lost);
    return kOk;
}

int cmd_analyze(const Options& o, bool correlations)
{
    const auto r = analyse_directory(o.data, analysis_options(o, correlations), o.jobs);
    write_analysis(o.out, r);
    std::printf("runs %d, stationary events %zu, collision events discarded %zu\n", r.n_runs, r.stationary_events,
                r.discarded);
    std::printf("O: A %.2f B %.4f Omega %.4f chi %.4f\n", r.fit_o.a, r.fit_o.b, r.fit_o.omega, r.fit_o.chi);
    std::printf("H: A %.2f B %.4f Omega %.4f chi %.4f\n", r.fit_h.a, r.fit_h.b, r.fit_h.omega, r.fit_h.chi);
    if (r.variance_fit) {
        std::printf("eps0 %.4f\n", r.variance_fit->eps0);
    }
    print_periods(r);
    return kOk;
}

int cmd_roundtrip(const Options& o)
{
    const auto cfg = load_config(o);
    const fs::path work = o.out.empty() ? fs::temp_directory_path() / ("stampcorr_roundtrip_" + std::to_string(cfg.seed))
                                        : fs::path(o.out);
    const auto data = work / "data";
    const auto tables = work / "analysis";
    std::printf("simulate -> %s\n", data.string().c_str());
    run_protocol(cfg, data);
    AnalysisOptions a;
    a.bin_width = o.bin_width;
    a.segmentation.settings = cfg.n_settings;
    a.segmentation.dwell_seconds = cfg.dwell;
    a.max_dt = cfg.dwell;
    std::printf("analyze -> %s\n", tables.string().c_str());
    const auto r = analyse_directory(data, a, o.jobs);
    write_analysis(tables, r);
    const auto report = compare_with_truth(cfg, r);
    report.print(std::cout);
    std::printf("%s\n", report.all_pass() ? "roundtrip: PASS" : "roundtrip: FAIL");
    return report.all_pass() ? kOk : kRoundtrip;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Simulate and analyse time-stamped single-neutron interferometry data"};
    app.require_subcommand(1);
    Options o;

    auto* simulate = app.add_subcommand("simulate", "Generate stamp-file pairs and a manifest");
    simulate->add_option("--config", o.config, "key = value protocol configuration")->required();
    simulate->add_option("--out", o.out, "Output directory")->required();
    simulate->add_option("--seed", o.seed, "Override the configured seed");

    const auto add_analysis_flags = [&](CLI::App* cmd, bool filter_required) {
        cmd->add_option("data", o.data, "Directory of <run>O.stamp / <run>H.stamp pairs")->required();
        cmd->add_option("--out", o.out, "Output directory for CSV tables")->required();
        cmd->add_option("--jobs", o.jobs, "Runs reduced concurrently")->check(CLI::PositiveNumber);
        cmd->add_option("--bin-width", o.bin_width, "Correlation bin width (s)")->check(CLI::PositiveNumber);
        auto* f = cmd->add_option("--filter", o.filter, "Correlation source")->check(CLI::IsMember({"O", "H", "OH", "x"}));
        if (filter_required) {
            f->required();
        }
    };
    auto* analyze = app.add_subcommand("analyze", "Full analysis: fits, variances, correlations");
    add_analysis_flags(analyze, false);
    auto* fit = app.add_subcommand("fit", "Fringe, variance and drift fits only");
    fit->add_option("data", o.data, "Directory of stamp-file pairs")->required();
    fit->add_option("--out", o.out, "Output directory")->required();
    fit->add_option("--jobs", o.jobs, "Runs reduced concurrently")->check(CLI::PositiveNumber);
    auto* correlate = app.add_subcommand("correlate", "Correlation curves for one source");
    add_analysis_flags(correlate, true);
    auto* roundtrip = app.add_subcommand("roundtrip", "Simulate, analyse and compare with the configuration");
    roundtrip->add_option("--config", o.config, "key = value protocol configuration")->required();
    roundtrip->add_option("--out", o.out, "Working directory (default: a temporary directory)");
    roundtrip->add_option("--seed", o.seed, "Override the configured seed");
    roundtrip->add_option("--jobs", o.jobs, "Runs reduced concurrently")->check(CLI::PositiveNumber);
    roundtrip->add_option("--bin-width", o.bin_width, "Correlation bin width (s)")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (simulate->parsed()) {
            return cmd_simulate(o);
        }
        if (analyze->parsed()) {
            return cmd_analyze(o, true);
        }
        if (fit->parsed()) {
            return cmd_analyze(o, false);
        }
        if (correlate->parsed()) {
            return cmd_analyze(o, true);
        }
        if (roundtrip->parsed()) {
            return cmd_roundtrip(o);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kConfig;
    } catch (const IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kIo;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kData;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kIo;
    }
    return kOk;
}
