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

#pragma once

/**
 * @file analysis.hpp
 * The full pipeline from segmented runs to fitted parameters and plot tables.
 *
 * Each run is reduced on its own to a RunPartial (counts, per-lag correlation
 * bins, moment sums). Partials are folded in run order, so the result does
 * not depend on how many runs were reduced concurrently.
 */

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <future>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "stampcorr/correlation.hpp"
#include "stampcorr/error.hpp"
#include "stampcorr/fitting.hpp"
#include "stampcorr/io.hpp"
#include "stampcorr/simulator.hpp"
#include "stampcorr/statistics.hpp"
#include "stampcorr/timeline.hpp"

namespace stampcorr {

struct AnalysisOptions {
    SegmentationOptions segmentation{};
    double bin_width = 0.01;
    double max_dt = 10.0;
    std::vector<CorrelationSource> sources{CorrelationSource::O, CorrelationSource::H, CorrelationSource::OH,
                                           CorrelationSource::labels};
    DampedCosineOptions oscillation{};
};

/// Stamp streams of one run, merged and cut into settings.
inline RunRecord record_from_stamps(std::span<const TimeStamp> o, std::span<const TimeStamp> h, int run,
                                    const SegmentationOptions& options)
{
    auto merged = merge_streams(o, h);
    return segment_by_setting(merged.events, options, run, merged.discarded);
}

inline RunRecord record_from_simulation(const SimulatedRun& sim, const SegmentationOptions& options)
{
    return record_from_stamps(sim.o, sim.h, sim.run, options);
}

/// Everything one run contributes.
struct RunPartial {
    int run = 0;
    double start_seconds = 0.0;
    std::vector<double> counts_o; ///< per setting
    std::vector<double> counts_h;
    std::size_t discarded = 0;
    std::size_t moving = 0;
    MomentAccumulator oh_spacing;
    std::map<CorrelationSource, std::vector<CorrelationBinner>> binners; ///< per source, per setting
};

inline RunPartial reduce_run(const RunRecord& record, const AnalysisOptions& options)
{
    RunPartial p;
    p.run = record.run;
    p.start_seconds = record.start_seconds();
    p.discarded = record.discarded_collisions;
    p.moving = record.moving_events;
    for (const auto source : options.sources) {
        p.binners[source].assign(record.segments.size(), CorrelationBinner(options.bin_width, options.max_dt));
    }
    for (std::size_t s = 0; s < record.segments.size(); ++s) {
        const auto& seg = record.segments[s];
        p.counts_o.push_back(static_cast<double>(seg.count(Beam::O)));
        p.counts_h.push_back(static_cast<double>(seg.count(Beam::H)));
        if (seg.events.size() >= 2) {
            for (double dt : time_differences(seg, EventFilter::OH)) {
                p.oh_spacing.add(dt);
            }
        }
        for (const auto source : options.sources) {
            try {
                accumulate_segment(p.binners[source][s], seg, source);
            } catch (const DataError&) {
                // Too few events of this type in the segment: it contributes no lags.
            }
        }
    }
    return p;
}

struct SettingVariance {
    int setting = 0;
    double mean_o = 0.0;
    double mean_h = 0.0;
    double var_o = 0.0;
    double var_h = 0.0;
    double model_var_o = 0.0;    ///< compound variance with the fitted eps0
    double model_var_h = 0.0;
    double baseline_var_o = 0.0; ///< N P_O P_H, no fluctuations
    double baseline_var_h = 0.0;
};

struct SourceCurves {
    std::vector<CorrelationCurve> curves;   ///< per setting
    std::vector<OscillationFit> fits;       ///< per setting
    std::vector<std::string> fit_errors;    ///< non-empty when the fit threw
};

struct AnalysisResult {
    int n_runs = 0;
    int n_settings = 0;
    std::vector<std::vector<double>> counts_o; ///< [run][setting]
    std::vector<std::vector<double>> counts_h;
    std::size_t stationary_events = 0;
    std::size_t discarded = 0;
    SinusoidFit fit_o;
    SinusoidFit fit_h;
    FringeParams fringe;
    std::optional<DriftTable> drift;
    std::optional<VarianceFit> variance_fit;
    double mean_total = 0.0;
    double var_total = 0.0;
    std::vector<SettingVariance> variances;
    std::map<CorrelationSource, SourceCurves> correlations;
    std::optional<MomentRatios> moments;
    std::optional<DispersionTest> dispersion;

    /// Median period over settings where `source` shows an oscillation.
    std::optional<double> median_period(CorrelationSource source) const
    {
        const auto it = correlations.find(source);
        if (it == correlations.end()) {
            return std::nullopt;
        }
        std::vector<double> periods;
        for (const auto& f : it->second.fits) {
            if (f.detected()) {
                periods.push_back(f.fit.period);
            }
        }
        if (periods.empty()) {
            return std::nullopt;
        }
        std::sort(periods.begin(), periods.end());
        const std::size_t n = periods.size();
        return n % 2 == 1 ? periods[n / 2] : 0.5 * (periods[n / 2 - 1] + periods[n / 2]);
    }

    /// Per-setting amplitudes (0 where nothing is detected or the fit failed).
    std::vector<double> amplitudes(CorrelationSource source) const
    {
        std::vector<double> out;
        const auto it = correlations.find(source);
        if (it == correlations.end()) {
            return out;
        }
        for (const auto& f : it->second.fits) {
            out.push_back(f.detected() ? std::abs(f.fit.a) : 0.0);
        }
        return out;
    }
};

class Analyzer {
public:
    explicit Analyzer(AnalysisOptions options = {}) : options_(std::move(options)) {}

    const AnalysisOptions& options() const noexcept { return options_; }

    void add(RunPartial partial)
    {
        if (!partials_.empty() && partial.counts_o.size() != partials_.front().counts_o.size()) {
            throw DataError("run " + std::to_string(partial.run) + " has a different number of settings");
        }
        partials_.push_back(std::move(partial));
    }

    void add_run(const RunRecord& record) { add(reduce_run(record, options_)); }

    std::size_t runs() const noexcept { return partials_.size(); }

    AnalysisResult finish() const
    {
        if (partials_.empty()) {
            throw DataError("no runs to analyse");
        }
        AnalysisResult r;
        r.n_runs = static_cast<int>(partials_.size());
        r.n_settings = static_cast<int>(partials_.front().counts_o.size());
        const auto ns = static_cast<std::size_t>(r.n_settings);
        MomentAccumulator spacing;
        std::vector<double> totals;
        for (const auto& p : partials_) {
            r.counts_o.push_back(p.counts_o);
            r.counts_h.push_back(p.counts_h);
            r.discarded += p.discarded;
            spacing.merge(p.oh_spacing);
            for (std::size_t s = 0; s < ns; ++s) {
                totals.push_back(p.counts_o[s] + p.counts_h[s]);
                r.stationary_events += static_cast<std::size_t>(p.counts_o[s] + p.counts_h[s]);
            }
        }

        // Pooled fringe fit on the per-setting means (equal runs per setting,
        // so this is the least-squares fit to all run x setting points).
        std::vector<CountPoint> mean_o;
        std::vector<CountPoint> mean_h;
        for (std::size_t s = 0; s < ns; ++s) {
            SettingVariance v;
            v.setting = static_cast<int>(s + 1);
            std::vector<double> co;
            std::vector<double> ch;
            for (const auto& p : partials_) {
                co.push_back(p.counts_o[s]);
                ch.push_back(p.counts_h[s]);
            }
            const auto mo = sample_moments(co);
            const auto mh = sample_moments(ch);
            v.mean_o = mo.mean;
            v.mean_h = mh.mean;
            v.var_o = mo.variance;
            v.var_h = mh.variance;
            r.variances.push_back(v);
            mean_o.push_back({static_cast<double>(s + 1), mo.mean});
            mean_h.push_back({static_cast<double>(s + 1), mh.mean});
        }
        if (ns >= 8) {
            r.fit_o = fit_sinusoid(mean_o);
            r.fit_h = fit_sinusoid(mean_h);
            r.fringe = to_fringe_params(r.fit_o, r.fit_h);
        }

        // Totals: every setting sees the same arrival process, so pool the
        // per-setting variances.
        {
            const auto all = sample_moments(totals);
            r.mean_total = all.mean;
            double pooled = 0.0;
            if (r.n_runs >= 2) {
                for (std::size_t s = 0; s < ns; ++s) {
                    std::vector<double> t;
                    for (const auto& p : partials_) {
                        t.push_back(p.counts_o[s] + p.counts_h[s]);
                    }
                    pooled += sample_moments(t).variance;
                }
                pooled /= static_cast<double>(ns);
            }
            r.var_total = pooled;
            if (totals.size() >= 2 && all.mean > 0.0) {
                r.dispersion = dispersion_test(totals);
            }
        }

        if (r.n_runs >= 2 && ns >= 8 && !r.fit_o.degenerate && !r.fit_h.degenerate) {
            std::vector<RunFringeFits> per_run;
            try {
                for (const auto& p : partials_) {
                    RunFringeFits f;
                    f.run = p.run;
                    f.start_seconds = p.start_seconds;
                    double total = 0.0;
                    std::vector<CountPoint> po;
                    std::vector<CountPoint> ph;
                    for (std::size_t s = 0; s < ns; ++s) {
                        po.push_back({static_cast<double>(s + 1), p.counts_o[s]});
                        ph.push_back({static_cast<double>(s + 1), p.counts_h[s]});
                        total += p.counts_o[s] + p.counts_h[s];
                    }
                    f.total_counts = total;
                    f.o = fit_sinusoid(po);
                    f.h = fit_sinusoid(ph);
                    per_run.push_back(f);
                }
                r.drift = track_phase_offsets(per_run);
            } catch (const std::invalid_argument&) {
                r.drift.reset();
            }

            VarianceObservations obs;
            for (const auto& v : r.variances) {
                obs.settings.push_back(v.setting);
                obs.var_o.push_back(v.var_o);
                obs.var_h.push_back(v.var_h);
            }
            obs.mean_n = r.mean_total;
            obs.var_n = r.var_total;
            try {
                r.variance_fit = fit_variance_model(obs, r.fringe);
            } catch (const std::invalid_argument&) {
                r.variance_fit.reset();
            }
            const FringeParams model = r.variance_fit ? fringe_for_eps0(r.fringe, r.variance_fit->eps0) : r.fringe;
            for (auto& v : r.variances) {
                v.model_var_o = model_count_variance(model, obs.mean_n, obs.var_n, v.setting, Beam::O);
                v.model_var_h = model_count_variance(model, obs.mean_n, obs.var_n, v.setting, Beam::H);
                const double p_o = v.mean_o / (v.mean_o + v.mean_h);
                v.baseline_var_o = r.mean_total * p_o * (1.0 - p_o);
                v.baseline_var_h = v.baseline_var_o;
            }
        }

        if (spacing.count() > 0) {
            r.moments = moment_ratios(spacing);
        }

        for (const auto& [source, _] : partials_.front().binners) {
            SourceCurves sc;
            for (std::size_t s = 0; s < ns; ++s) {
                CorrelationBinner merged(options_.bin_width, options_.max_dt);
                for (const auto& p : partials_) {
                    merged.merge(p.binners.at(source)[s]);
                }
                sc.curves.push_back(merged.curve(source, static_cast<int>(s + 1)));
                try {
                    sc.fits.push_back(fit_damped_cosine(sc.curves.back(), options_.oscillation));
                    sc.fit_errors.emplace_back();
                } catch (const std::exception& e) {
                    OscillationFit failed;
                    failed.status = OscillationStatus::fit_failed;
                    sc.fits.push_back(failed);
                    sc.fit_errors.emplace_back(e.what());
                }
            }
            r.correlations.emplace(source, std::move(sc));
        }
        return r;
    }

private:
    AnalysisOptions options_;
    std::vector<RunPartial> partials_;
};

/// Reduces runs with up to `jobs` threads and folds them in input order.
template <class MakeRecord>
void reduce_runs_parallel(Analyzer& analyzer, int n_runs, int jobs, MakeRecord&& make_record)
{
    jobs = std::max(1, jobs);
    for (int first = 0; first < n_runs; first += jobs) {
        const int last = std::min(n_runs, first + jobs);
        std::vector<std::future<RunPartial>> pending;
        for (int i = first; i < last; ++i) {
            pending.push_back(std::async(jobs == 1 ? std::launch::deferred : std::launch::async, [&, i] {
                return reduce_run(make_record(i), analyzer.options());
            }));
        }
        for (auto& f : pending) {
            analyzer.add(f.get());
        }
    }
}

// --- stamp directories ----------------------------------------------------------

struct StampPair {
    std::string run_id;
    std::filesystem::path o;
    std::filesystem::path h;
};

/// `<id>O.stamp` / `<id>H.stamp` pairs in `dir`, sorted by id.
inline std::vector<StampPair> find_stamp_pairs(const std::filesystem::path& dir)
{
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("not a directory: " + dir.string());
    }
    std::vector<StampPair> pairs;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        const std::string suffix = "O.stamp";
        if (name.size() <= suffix.size() || name.compare(name.size() - suffix.size(), suffix.size(), suffix) != 0) {
            continue;
        }
        const auto id = name.substr(0, name.size() - suffix.size());
        const auto h = dir / (id + "H.stamp");
        if (!std::filesystem::exists(h)) {
            throw DataError("missing partner file " + h.string());
        }
        pairs.push_back({id, entry.path(), h});
    }
    std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.run_id < b.run_id; });
    if (pairs.empty()) {
        throw DataError("no stamp-file pairs in " + dir.string());
    }
    return pairs;
}

inline RunRecord load_run(const StampPair& pair, int run, const SegmentationOptions& options)
{
    const auto o = parse_stamp_file(pair.o);
    const auto h = parse_stamp_file(pair.h);
    try {
        return record_from_stamps(o, h, run, options);
    } catch (const DataError& e) {
        throw DataError(pair.run_id + ": " + e.what());
    }
}

// --- tables -----------------------------------------------------------------------

inline void write_counts_csv(std::ostream& out, const AnalysisResult& r)
{
    out << "setting,mean_o,mean_h,std_o,std_h,model_o,model_h\n";
    for (const auto& v : r.variances) {
        const auto model = count_model(r.fringe, v.setting);
        out << v.setting << ',' << format_double(v.mean_o) << ',' << format_double(v.mean_h) << ','
            << format_double(std::sqrt(v.var_o)) << ',' << format_double(std::sqrt(v.var_h)) << ','
            << format_double(model.o) << ',' << format_double(model.h) << '\n';
    }
}

inline void write_drift_csv(std::ostream& out, const DriftTable& d)
{
    out << "run,start_seconds,chi_o,chi_h,delta,total_counts\n";
    for (const auto& row : d.rows) {
        out << row.run << ',' << format_double(row.start_seconds) << ',' << format_double(row.chi_o) << ','
            << format_double(row.chi_h) << ',' << format_double(row.delta) << ',' << format_double(row.total_counts)
            << '\n';
    }
}

inline void write_std_model_csv(std::ostream& out, const AnalysisResult& r)
{
    out << "setting,std_o,std_h,model_std_o,model_std_h,baseline_std_o,baseline_std_h\n";
    for (const auto& v : r.variances) {
        out << v.setting << ',' << format_double(std::sqrt(v.var_o)) << ',' << format_double(std::sqrt(v.var_h))
            << ',' << format_double(std::sqrt(v.model_var_o)) << ',' << format_double(std::sqrt(v.model_var_h)) << ','
            << format_double(std::sqrt(v.baseline_var_o)) << ',' << format_double(std::sqrt(v.baseline_var_h))
            << '\n';
    }
}

inline void write_curve_csv(std::ostream& out, const CorrelationCurve& c)
{
    out << "dt,value,sample_count,valid\n";
    for (const auto& b : c.bins) {
        out << format_double(b.center) << ',' << format_double(b.value) << ',' << b.sample_count << ','
            << (b.valid() ? 1 : 0) << '\n';
    }
}

inline const char* to_string(OscillationStatus s)
{
    switch (s) {
    case OscillationStatus::detected:
        return "detected";
    case OscillationStatus::none:
        return "none";
    case OscillationStatus::fit_failed:
        return "fit_failed";
    }
    return "?";
}

inline void write_amplitudes_csv(std::ostream& out, const AnalysisResult& r)
{
    out << "source,setting,status,amplitude,decay,period,peak_statistic,threshold\n";
    for (const auto& [source, sc] : r.correlations) {
        for (std::size_t s = 0; s < sc.fits.size(); ++s) {
            const auto& f = sc.fits[s];
            out << to_string(source) << ',' << (s + 1) << ',' << to_string(f.status) << ','
                << format_double(f.detected() ? std::abs(f.fit.a) : 0.0) << ',' << format_double(f.fit.b) << ','
                << format_double(f.fit.period) << ',' << format_double(f.peak_statistic) << ','
                << format_double(f.threshold) << '\n';
        }
    }
}

inline void write_fit_params(std::ostream& out, const AnalysisResult& r)
{
    KeyValueConfig kv;
    FringeParams fp = r.fringe;
    fp.eps0 = r.variance_fit ? r.variance_fit->eps0 : 0.0;
    store(kv, fp);
    kv.set("fit_o_residual_rms", r.fit_o.residual_rms);
    kv.set("fit_h_residual_rms", r.fit_h.residual_rms);
    kv.set("chi_difference", wrap_phase(r.fringe.chi_h - r.fringe.chi_o));
    if (r.drift) {
        kv.set("drift_slope_o", r.drift->slope_o);
        kv.set("drift_slope_h", r.drift->slope_h);
    }
    kv.set("mean_total", r.mean_total);
    kv.set("var_total", r.var_total);
    for (const auto& [source, _] : r.correlations) {
        if (const auto t = r.median_period(source)) {
            kv.set("period_" + to_string(source), *t);
        }
    }
    kv.write(out);
}

inline void write_summary(std::ostream& out, const AnalysisResult& r)
{
    out << "runs " << r.n_runs << "\nsettings " << r.n_settings << "\nstationary_events " << r.stationary_events
        << "\ndiscarded_collision_events " << r.discarded << '\n';
    if (r.moments) {
        out << "moment_ratios " << format_double(r.moments->first) << ' ' << format_double(r.moments->second) << ' '
            << format_double(r.moments->third) << " spread " << format_double(r.moments->spread()) << '\n';
    }
    if (r.dispersion) {
        out << "dispersion_index " << format_double(r.dispersion->index) << " p " << format_double(r.dispersion->p_value)
            << '\n';
    }
    for (const auto& [source, sc] : r.correlations) {
        int detected = 0;
        for (const auto& f : sc.fits) {
            detected += f.detected() ? 1 : 0;
        }
        out << "oscillation " << to_string(source) << " detected_settings " << detected;
        if (const auto t = r.median_period(source)) {
            out << " period " << format_double(*t);
        } else {
            out << " none";
        }
        out << '\n';
    }
}

/// Writes every table of an analysis into `dir`.
inline void write_analysis(const std::filesystem::path& dir, const AnalysisResult& r)
{
    ensure_directory(dir);
    write_file_atomically(dir / "counts.csv", [&](std::ostream& os) { write_counts_csv(os, r); });
    if (r.drift) {
        write_file_atomically(dir / "phase_drift.csv", [&](std::ostream& os) { write_drift_csv(os, *r.drift); });
    }
    write_file_atomically(dir / "std_model.csv", [&](std::ostream& os) { write_std_model_csv(os, r); });
    for (const auto& [source, sc] : r.correlations) {
        for (const auto& c : sc.curves) {
            char name[64];
            std::snprintf(name, sizeof name, "correlation_%s_X%02d.csv", to_string(source).c_str(), c.setting);
            write_file_atomically(dir / name, [&](std::ostream& os) { write_curve_csv(os, c); });
        }
    }
    write_file_atomically(dir / "amplitudes.csv", [&](std::ostream& os) { write_amplitudes_csv(os, r); });
    write_file_atomically(dir / "fit_params.cfg", [&](std::ostream& os) { write_fit_params(os, r); });
    write_file_atomically(dir / "summary.txt", [&](std::ostream& os) { write_summary(os, r); });
}

} // namespace stampcorr
