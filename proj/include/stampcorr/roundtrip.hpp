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

// Recovered-versus-true comparison for simulate -> analyze round trips.

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "stampcorr/analysis.hpp"
#include "stampcorr/simulator.hpp"
#include "stampcorr/statistics.hpp"

namespace stampcorr {

struct RoundtripTolerances {
    double relative_amplitude = 0.02; ///< A and B
    double omega = 0.02;              ///< rad per setting
    double chi = 0.05;                ///< rad
    double eps0 = 0.05;               ///< rad, per-segment mode only
    double period = 0.1;              ///< s
    double null_fraction = 0.95;      ///< settings reported oscillation-free when Y = 0
    double pattern_rank = 0.8;        ///< Spearman of C_O amplitude vs |sin phase|
};

struct RoundtripCheck {
    std::string name;
    bool applicable = true;
    bool pass = true;
    std::string detail;
};

struct RoundtripReport {
    std::vector<RoundtripCheck> checks;

    bool all_pass() const
    {
        for (const auto& c : checks) {
            if (c.applicable && !c.pass) {
                return false;
            }
        }
        return true;
    }

    void print(std::ostream& out) const
    {
        for (const auto& c : checks) {
            out << (c.applicable ? (c.pass ? "PASS" : "FAIL") : "SKIP") << ' ' << c.name << ": " << c.detail << '\n';
        }
    }
};

namespace detail {

inline std::string fmt(const char* pattern, double a, double b, double c = 0.0)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, pattern, a, b, c);
    return buf;
}

} // namespace detail

/// Mean counts per dwell implied by the configuration, before collision losses.
inline CountPair expected_means(const ProtocolConfig& cfg)
{
    const double n = cfg.arrival_rate * cfg.dwell;
    if (cfg.model == SimulationModel::des) {
        const double share = 2.0 * cfg.reflectivity * (1.0 - cfg.reflectivity);
        return {n * share, n * (1.0 - share)};
    }
    return {n * cfg.fp.o_share(), n * (1.0 - cfg.fp.o_share())};
}

inline RoundtripReport compare_with_truth(const ProtocolConfig& cfg, const AnalysisResult& r,
                                          const RoundtripTolerances& tol = {})
{
    RoundtripReport report;
    const auto add = [&](std::string name, bool applicable, bool pass, std::string detail) {
        report.checks.push_back({std::move(name), applicable, pass, std::move(detail)});
    };
    const auto rel = [](double got, double want) { return std::abs(got - want) / std::abs(want); };
    const auto angle = [](double a, double b) { return std::abs(wrap_phase(a - b)); };

    const auto means = expected_means(cfg);
    add("A_O", true, rel(r.fit_o.a, means.o) <= tol.relative_amplitude,
        detail::fmt("fit %.2f, expected %.2f", r.fit_o.a, means.o));
    add("A_H", true, rel(r.fit_h.a, means.h) <= tol.relative_amplitude,
        detail::fmt("fit %.2f, expected %.2f", r.fit_h.a, means.h));
    const bool collapse = cfg.model == SimulationModel::collapse;
    add("B_O", collapse, collapse && rel(r.fit_o.b, cfg.fp.b_o) <= tol.relative_amplitude,
        collapse ? detail::fmt("fit %.4f, configured %.4f", r.fit_o.b, cfg.fp.b_o)
                 : "event-based visibility has no closed form");
    add("B_H", collapse, collapse && rel(r.fit_h.b, cfg.fp.b_h) <= tol.relative_amplitude,
        collapse ? detail::fmt("fit %.4f, configured %.4f", r.fit_h.b, cfg.fp.b_h)
                 : "event-based visibility has no closed form");
    add("Omega", true, std::abs(r.fit_o.omega - cfg.fp.omega_o) <= tol.omega && std::abs(r.fit_h.omega - cfg.fp.omega_o) <= tol.omega,
        detail::fmt("O %.4f, H %.4f, configured %.4f", r.fit_o.omega, r.fit_h.omega, cfg.fp.omega_o));
    if (cfg.chi_drift == 0.0) {
        add("chi_O", true, angle(r.fit_o.chi, cfg.fp.chi_o) <= tol.chi,
            detail::fmt("fit %.4f, configured %.4f", r.fit_o.chi, cfg.fp.chi_o));
    } else if (r.drift) {
        add("chi_drift", true, std::abs(r.drift->slope_o - cfg.chi_drift) <= tol.chi / 5.0,
            detail::fmt("slope %.5f rad/run, configured %.5f", r.drift->slope_o, cfg.chi_drift));
    } else {
        add("chi_drift", true, false, "no drift table (fewer than two runs)");
    }
    const double split = angle(r.fit_h.chi - r.fit_o.chi, std::numbers::pi);
    add("chi_H - chi_O = pi", true, split <= tol.chi, detail::fmt("|difference - pi| = %.4f", split, 0.0));

    if (cfg.eps_mode == EpsilonMode::per_segment && cfg.model == SimulationModel::collapse) {
        const bool have = r.variance_fit.has_value();
        const double got = have ? r.variance_fit->eps0 : -1.0;
        add("eps0", true, have && std::abs(got - cfg.fp.eps0) <= tol.eps0,
            detail::fmt("fit %.4f, configured %.4f", got, cfg.fp.eps0));
    } else {
        add("eps0", false, true, "not identifiable from count variances with per-event fluctuations");
    }

    const auto it = r.correlations.find(CorrelationSource::O);
    if (it == r.correlations.end()) {
        add("period", false, true, "C_O not computed");
        return report;
    }
    const auto& fits = it->second.fits;
    int detected = 0;
    for (const auto& f : fits) {
        detected += f.detected() ? 1 : 0;
    }
    if (cfg.op.amplitude > 0.0) {
        const auto t = r.median_period(CorrelationSource::O);
        add("period", true, t && std::abs(*t - cfg.op.period()) <= tol.period,
            t ? detail::fmt("median fitted %.3f s over %.0f settings, configured %.3f s", *t, detected, cfg.op.period())
              : std::string("no oscillation detected"));
        std::vector<double> slope;
        for (int x = 1; x <= r.n_settings; ++x) {
            slope.push_back(std::abs(std::sin(cfg.fp.omega_o * x + cfg.fp.chi_o)));
        }
        const auto amps = r.amplitudes(CorrelationSource::O);
        const double rho = spearman(amps, slope);
        add("amplitude pattern", true, rho >= tol.pattern_rank,
            detail::fmt("Spearman %.3f against |sin(Omega X + chi)|, required %.2f", rho, tol.pattern_rank));
    } else {
        const double null_share = 1.0 - static_cast<double>(detected) / static_cast<double>(fits.size());
        add("null", true, null_share >= tol.null_fraction,
            detail::fmt("oscillation-free on %.1f%% of settings", 100.0 * null_share, 0.0));
    }
    if (const auto oh = r.correlations.find(CorrelationSource::OH); oh != r.correlations.end()) {
        int oh_detected = 0;
        for (const auto& f : oh->second.fits) {
            oh_detected += f.detected() ? 1 : 0;
        }
        const double share = static_cast<double>(oh_detected) / static_cast<double>(oh->second.fits.size());
        add("C_OH oscillation-free", true, share <= 1.0 - tol.null_fraction,
            detail::fmt("oscillation detected on %.0f of %.0f settings", oh_detected, oh->second.fits.size()));
    }
    return report;
}

} // namespace stampcorr
