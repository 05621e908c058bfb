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
 * @file fitting.hpp
 * Nonlinear least squares for the three model families of the analysis:
 * sinusoidal fringes over the setting X, the phase-fluctuation width of the
 * count variance, and damped cosines in the lag correlation curves. Also the
 * run-by-run phase-offset drift table.
 *
 * All fitters are deterministic: the initial guess is a pure function of the
 * data, and the damped Gauss-Newton loop has no randomness.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/tools/minima.hpp>

#include "stampcorr/correlation.hpp"
#include "stampcorr/quantum_model.hpp"
#include "stampcorr/statistics.hpp"

namespace stampcorr {

// --- Levenberg-Marquardt ---------------------------------------------------

struct LmOptions {
    int max_iterations = 200;
    double relative_tolerance = 1e-10;
};

template <int P>
struct LmResult {
    Eigen::Matrix<double, P, 1> params;
    double objective = 0.0; ///< sum of squared residuals
    int iterations = 0;
    bool converged = false;
    std::vector<double> accepted_objectives; ///< objective after each accepted step, starting with the initial one
};

/// Damped Gauss-Newton with Marquardt diagonal scaling. `model(params, r, J)`
/// fills residuals and Jacobian; `project(params)` maps a trial point back
/// into the feasible set. Only steps that lower the objective are accepted.
template <int P, class Model, class Project>
LmResult<P> levenberg_marquardt(Model&& model, Project&& project, Eigen::Matrix<double, P, 1> start,
                                const LmOptions& options = {})
{
    using Vec = Eigen::Matrix<double, P, 1>;
    using Mat = Eigen::Matrix<double, P, P>;
    Eigen::VectorXd r;
    Eigen::Matrix<double, Eigen::Dynamic, P> jac;
    LmResult<P> result;
    Vec params = project(start);
    model(params, r, jac);
    double objective = r.squaredNorm();
    result.accepted_objectives.push_back(objective);
    double lambda = 1e-3;
    for (int it = 0; it < options.max_iterations; ++it) {
        result.iterations = it + 1;
        if (objective <= std::numeric_limits<double>::min()) {
            result.converged = true;
            break;
        }
        const Mat jtj = jac.transpose() * jac;
        const Vec grad = jac.transpose() * r;
        bool accepted = false;
        while (lambda < 1e16) {
            Mat damped = jtj;
            for (int i = 0; i < P; ++i) {
                damped(i, i) += lambda * std::max(jtj(i, i), 1e-12);
            }
            const Vec step = damped.ldlt().solve(-grad);
            const Vec trial = project(params + step);
            Eigen::VectorXd r_trial;
            Eigen::Matrix<double, Eigen::Dynamic, P> jac_trial;
            model(trial, r_trial, jac_trial);
            const double trial_objective = r_trial.squaredNorm();
            if (std::isfinite(trial_objective) && trial_objective < objective) {
                const double relative_change = (objective - trial_objective) / objective;
                params = trial;
                r = std::move(r_trial);
                jac = std::move(jac_trial);
                objective = trial_objective;
                result.accepted_objectives.push_back(objective);
                lambda = std::max(lambda / 10.0, 1e-15);
                accepted = true;
                if (relative_change < options.relative_tolerance) {
                    result.converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if (!accepted) {
            // No descent direction left at any damping: a stationary point.
            result.converged = true;
        }
        if (result.converged) {
            break;
        }
    }
    result.params = params;
    result.objective = objective;
    return result;
}

// --- sinusoidal fringes ----------------------------------------------------

struct CountPoint {
    double setting = 0.0;
    double count = 0.0;
};

/// N(X) = A [1 + B cos(Omega X + chi)] for one beam.
struct SinusoidFit {
    double a = 0.0;
    double b = 0.0;
    double omega = 0.0;
    double chi = 0.0;
    double residual_rms = 0.0;
    bool converged = false;
    bool degenerate = false; ///< flat input: Omega and chi carry no information
    int iterations = 0;
    std::vector<double> objective_trace;

    double operator()(double setting) const noexcept { return a * (1.0 + b * std::cos(omega * setting + chi)); }
};

namespace detail {

/// Returns (B, Omega, chi) in the canonical gauge B >= 0, Omega > 0, chi in (-pi, pi].
inline void canonical_gauge(double& b, double& omega, double& chi) noexcept
{
    if (omega < 0.0) {
        omega = -omega;
        chi = -chi;
    }
    if (b < 0.0) {
        b = -b;
        chi += std::numbers::pi;
    }
    chi = wrap_phase(chi);
}

/// Angular frequency in (0, pi] maximising the periodogram of the centred counts.
inline double spectral_peak(std::span<const CountPoint> points, double mean)
{
    constexpr int kGrid = 4096;
    double best_omega = std::numbers::pi / kGrid;
    double best_power = -1.0;
    for (int i = 1; i <= kGrid; ++i) {
        const double w = std::numbers::pi * i / kGrid;
        double re = 0.0;
        double im = 0.0;
        for (const auto& p : points) {
            re += (p.count - mean) * std::cos(w * p.setting);
            im += (p.count - mean) * std::sin(w * p.setting);
        }
        const double power = re * re + im * im;
        if (power > best_power) {
            best_power = power;
            best_omega = w;
        }
    }
    return best_omega;
}

} // namespace detail

inline SinusoidFit fit_sinusoid(std::span<const CountPoint> points, const LmOptions& options = {})
{
    if (points.size() < 8) {
        throw std::invalid_argument("sinusoid fit needs at least 8 points");
    }
    double mean = 0.0;
    double lo = points.front().count;
    double hi = lo;
    for (const auto& p : points) {
        mean += p.count;
        lo = std::min(lo, p.count);
        hi = std::max(hi, p.count);
    }
    mean /= static_cast<double>(points.size());

    SinusoidFit fit;
    if (hi - lo <= 1e-12 * std::max(1.0, std::abs(mean))) {
        fit.a = mean;
        fit.b = 0.0;
        fit.omega = std::numeric_limits<double>::quiet_NaN();
        fit.chi = 0.0;
        fit.degenerate = true;
        return fit;
    }

    const double b0 = (hi - lo) / (std::abs(hi + lo) > 0.0 ? std::abs(hi + lo) : 1.0);
    const double omega0 = detail::spectral_peak(points, mean);
    // chi by a scan of the residual at fixed (A, B, Omega).
    double chi0 = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 720; ++i) {
        const double chi = -std::numbers::pi + kTwoPi * (i + 1) / 720.0;
        double ss = 0.0;
        for (const auto& p : points) {
            const double d = mean * (1.0 + b0 * std::cos(omega0 * p.setting + chi)) - p.count;
            ss += d * d;
        }
        if (ss < best) {
            best = ss;
            chi0 = chi;
        }
    }

    using Vec = Eigen::Matrix<double, 4, 1>;
    const auto model = [&](const Vec& q, Eigen::VectorXd& r, Eigen::Matrix<double, Eigen::Dynamic, 4>& jac) {
        const auto n = static_cast<Eigen::Index>(points.size());
        r.resize(n);
        jac.resize(n, 4);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double x = points[static_cast<std::size_t>(i)].setting;
            const double arg = q[2] * x + q[3];
            const double c = std::cos(arg);
            const double s = std::sin(arg);
            r[i] = q[0] * (1.0 + q[1] * c) - points[static_cast<std::size_t>(i)].count;
            jac(i, 0) = 1.0 + q[1] * c;
            jac(i, 1) = q[0] * c;
            jac(i, 2) = -q[0] * q[1] * s * x;
            jac(i, 3) = -q[0] * q[1] * s;
        }
    };
    const auto identity = [](const Vec& q) { return q; };
    const auto lm = levenberg_marquardt<4>(model, identity, Vec{mean, b0, omega0, chi0}, options);

    fit.a = lm.params[0];
    fit.b = lm.params[1];
    fit.omega = lm.params[2];
    fit.chi = lm.params[3];
    detail::canonical_gauge(fit.b, fit.omega, fit.chi);
    fit.residual_rms = std::sqrt(lm.objective / static_cast<double>(points.size()));
    fit.converged = lm.converged;
    fit.iterations = lm.iterations;
    fit.objective_trace = lm.accepted_objectives;
    fit.degenerate = fit.b < 1e-9;
    return fit;
}

/// The H-beam fit as FringeParams fields next to the O-beam fit.
inline FringeParams to_fringe_params(const SinusoidFit& o, const SinusoidFit& h, double eps0 = 0.0)
{
    FringeParams fp;
    fp.a_o = o.a;
    fp.b_o = o.b;
    fp.omega_o = o.omega;
    fp.chi_o = o.chi;
    fp.a_h = h.a;
    fp.b_h = h.b;
    fp.omega_h = h.omega;
    fp.chi_h = h.chi;
    fp.eps0 = eps0;
    return fp;
}

// --- phase-fluctuation width from the count variance -------------------------

/// Per-setting observed variances of both beams plus the run-size moments.
struct VarianceObservations {
    std::vector<double> settings;
    std::vector<double> var_o;
    std::vector<double> var_h;
    double mean_n = 0.0; ///< mean total count per segment
    double var_n = 0.0;  ///< its run-to-run variance
};

/// Model variance of one beam at setting X for phase-fluctuation width eps0.
inline double model_count_variance(const FringeParams& fp, double mean_n, double var_n, double setting, Beam beam)
{
    const auto avg = uniform_phase_averages(fp, setting, beam);
    return compound_variance({mean_n, var_n, avg.mean_p, avg.var_p});
}

struct VarianceFit {
    double eps0 = 0.0;
    double objective = 0.0;
};

inline constexpr double kMaxEps0 = 0.5;

/// Fringe parameters fitted to mean counts already carry the damping
/// <cos(phi + e)> = cos(phi) sinc(eps0). This undoes it for a trial eps0.
inline FringeParams fringe_for_eps0(const FringeParams& fitted, double eps0)
{
    FringeParams fp = fitted;
    fp.eps0 = eps0;
    const double damping = sinc(eps0);
    fp.b_o = std::min(1.0, fitted.b_o / damping);
    fp.b_h = fitted.b_h / damping;
    // Keep P_H = 1 - P_O inside [0, 1].
    fp.b_o = std::min(fp.b_o, fp.a_h / fp.a_o);
    return fp;
}

/// Least-squares eps0 over both beams' variances. With `damped_means` the
/// fringe amplitudes are taken as fitted to mean counts and undamped per
/// trial eps0; otherwise `fp` is used as the true parameter set.
inline VarianceFit fit_variance_model(const VarianceObservations& obs, const FringeParams& fp, bool damped_means = true)
{
    if (obs.settings.size() != obs.var_o.size() || obs.settings.size() != obs.var_h.size() || obs.settings.empty()) {
        throw std::invalid_argument("variance fit needs one O and one H variance per setting");
    }
    const bool all_zero = std::all_of(obs.var_o.begin(), obs.var_o.end(), [](double v) { return v == 0.0; }) &&
                          std::all_of(obs.var_h.begin(), obs.var_h.end(), [](double v) { return v == 0.0; });
    if (all_zero) {
        throw std::invalid_argument("all observed variances are zero");
    }
    const auto objective = [&](double eps0) {
        FringeParams trial = fp;
        if (damped_means) {
            trial = fringe_for_eps0(fp, eps0);
        }
        trial.eps0 = eps0;
        double ss = 0.0;
        for (std::size_t i = 0; i < obs.settings.size(); ++i) {
            const double mo = model_count_variance(trial, obs.mean_n, obs.var_n, obs.settings[i], Beam::O);
            const double mh = model_count_variance(trial, obs.mean_n, obs.var_n, obs.settings[i], Beam::H);
            ss += (mo - obs.var_o[i]) * (mo - obs.var_o[i]) + (mh - obs.var_h[i]) * (mh - obs.var_h[i]);
        }
        return ss;
    };
    constexpr int kGrid = 100;
    int best = 0;
    double best_value = objective(0.0);
    for (int i = 1; i <= kGrid; ++i) {
        const double v = objective(kMaxEps0 * i / kGrid);
        if (v < best_value) {
            best_value = v;
            best = i;
        }
    }
    const double lo = kMaxEps0 * std::max(0, best - 1) / kGrid;
    const double hi = kMaxEps0 * std::min(kGrid, best + 1) / kGrid;
    const auto [eps0, value] = boost::math::tools::brent_find_minima(objective, lo, hi, 40);
    if (value < best_value) {
        return {eps0, value};
    }
    return {kMaxEps0 * best / kGrid, best_value};
}

// --- damped cosine in lag correlation curves --------------------------------

/// f(dt) = a exp(-b dt) cos(2 pi dt / T)
struct DampedCosineFit {
    double a = 0.0;
    double b = 0.0;
    double period = 0.0;
    double residual_rms = 0.0;
    bool converged = false;

    double operator()(double dt) const noexcept { return a * std::exp(-b * dt) * std::cos(kTwoPi * dt / period); }
};

enum class OscillationStatus { detected, none, fit_failed };

struct OscillationFit {
    OscillationStatus status = OscillationStatus::none;
    DampedCosineFit fit;
    double peak_statistic = 0.0; ///< whitened cosine-periodogram maximum
    double threshold = 0.0;
    double peak_period = 0.0;

    bool detected() const noexcept { return status == OscillationStatus::detected; }
};

struct DampedCosineOptions {
    double min_period = 0.5;      ///< s
    double max_period = 0.0;      ///< s; 0 selects half the covered lag span
    double fit_start = 0.05;      ///< s; earlier bins carry short-range structure
    double false_alarm = 1e-3;    ///< family-wise, over the period search band
    std::size_t min_bins = 50;
    LmOptions lm{};
};

/// Detects and fits a damped cosine. The search is a weighted cosine
/// periodogram against the bins' null variance; only a peak above the
/// family-wise threshold is handed to the least-squares refinement.
inline OscillationFit fit_damped_cosine(const CorrelationCurve& curve, const DampedCosineOptions& options = {})
{
    std::vector<double> t;
    std::vector<double> v;
    std::vector<double> w;
    bool have_null_variance = true;
    for (const auto& bin : curve.bins) {
        if (!bin.valid() || bin.center < options.fit_start) {
            continue;
        }
        t.push_back(bin.center);
        v.push_back(bin.value - bin.null_mean);
        if (bin.null_variance > 0.0) {
            w.push_back(1.0 / bin.null_variance);
        } else {
            w.push_back(1.0);
            have_null_variance = false;
        }
    }
    if (!have_null_variance) {
        std::fill(w.begin(), w.end(), 1.0);
    }
    if (t.size() < options.min_bins) {
        throw std::invalid_argument("damped-cosine fit needs at least " + std::to_string(options.min_bins) +
                                    " valid bins");
    }
    const double span = t.back() - t.front();
    const double max_period = options.max_period > 0.0 ? options.max_period : span / 2.0;
    if (max_period <= options.min_period) {
        throw std::invalid_argument("lag span too short to cover two periods");
    }

    // Noise scale of the whitened values from first differences (robust to
    // the slow oscillation itself); never below the null prediction.
    std::vector<double> diffs;
    diffs.reserve(t.size());
    for (std::size_t j = 1; j < t.size(); ++j) {
        diffs.push_back(std::abs(v[j] * std::sqrt(w[j]) - v[j - 1] * std::sqrt(w[j - 1])));
    }
    std::nth_element(diffs.begin(), diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2), diffs.end());
    const double mad = diffs[diffs.size() / 2];
    double scale2 = (1.4826 * mad) * (1.4826 * mad) / 2.0;
    if (have_null_variance) {
        scale2 = std::max(scale2, 1.0);
    }
    if (!(scale2 > 0.0)) {
        scale2 = std::numeric_limits<double>::min();
    }

    OscillationFit out;
    const double f_lo = 1.0 / max_period;
    const double f_hi = 1.0 / options.min_period;
    const double df = 1.0 / (8.0 * span);
    double best_f = f_lo;
    double best_z = -1.0;
    double best_amp = 0.0;
    for (double f = f_lo; f <= f_hi; f += df) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t j = 0; j < t.size(); ++j) {
            const double c = std::cos(kTwoPi * f * t[j]);
            num += w[j] * v[j] * c;
            den += w[j] * c * c;
        }
        const double z = num * num / (den * scale2);
        if (z > best_z) {
            best_z = z;
            best_f = f;
            best_amp = num / den;
        }
    }
    const double trials = std::max(1.0, 2.0 * (f_hi - f_lo) * span);
    const double per_trial = options.false_alarm / trials;
    const double q = boost::math::quantile(boost::math::normal(), 1.0 - per_trial / 2.0);
    out.threshold = q * q;
    out.peak_statistic = best_z;
    out.peak_period = 1.0 / best_f;
    if (best_z < out.threshold) {
        out.status = OscillationStatus::none;
        return out;
    }

    // Decay rate from the log-envelope: per-period cosine projections.
    double b0 = 0.0;
    {
        const double period = 1.0 / best_f;
        std::vector<double> centers;
        std::vector<double> logs;
        for (double start = t.front(); start + period <= t.back(); start += period) {
            double num = 0.0;
            double den = 0.0;
            for (std::size_t j = 0; j < t.size(); ++j) {
                if (t[j] >= start && t[j] < start + period) {
                    const double c = std::cos(kTwoPi * best_f * t[j]);
                    num += w[j] * v[j] * c;
                    den += w[j] * c * c;
                }
            }
            if (den > 0.0 && num / den * best_amp > 0.0) {
                centers.push_back(start + period / 2.0);
                logs.push_back(std::log(std::abs(num / den)));
            }
        }
        if (centers.size() >= 2) {
            double mx = 0.0;
            double my = 0.0;
            for (std::size_t i = 0; i < centers.size(); ++i) {
                mx += centers[i];
                my += logs[i];
            }
            mx /= static_cast<double>(centers.size());
            my /= static_cast<double>(centers.size());
            double sxy = 0.0;
            double sxx = 0.0;
            for (std::size_t i = 0; i < centers.size(); ++i) {
                sxy += (centers[i] - mx) * (logs[i] - my);
                sxx += (centers[i] - mx) * (centers[i] - mx);
            }
            b0 = std::max(0.0, sxx > 0.0 ? -sxy / sxx : 0.0);
        }
    }
    const double a0 = best_amp * std::exp(b0 * t.front() * 0.0);

    using Vec = Eigen::Matrix<double, 3, 1>;
    const auto model = [&](const Vec& q, Eigen::VectorXd& r, Eigen::Matrix<double, Eigen::Dynamic, 3>& jac) {
        const auto n = static_cast<Eigen::Index>(t.size());
        r.resize(n);
        jac.resize(n, 3);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto j = static_cast<std::size_t>(i);
            const double sw = std::sqrt(w[j]);
            const double e = std::exp(-q[1] * t[j]);
            const double arg = kTwoPi * t[j] / q[2];
            const double c = std::cos(arg);
            const double s = std::sin(arg);
            r[i] = sw * (q[0] * e * c - v[j]);
            jac(i, 0) = sw * e * c;
            jac(i, 1) = -sw * t[j] * q[0] * e * c;
            jac(i, 2) = sw * q[0] * e * s * arg / q[2];
        }
    };
    const double period_lo = options.min_period / 2.0;
    const double period_hi = 2.0 * max_period;
    const auto project = [&](const Vec& q) {
        Vec p = q;
        p[0] = std::clamp(p[0], -1.0, 1.0);
        p[1] = std::max(0.0, p[1]);
        p[2] = std::clamp(p[2], period_lo, period_hi);
        return p;
    };
    const auto lm = levenberg_marquardt<3>(model, project, Vec{a0, b0, 1.0 / best_f}, options.lm);

    out.fit.a = lm.params[0];
    out.fit.b = lm.params[1];
    out.fit.period = lm.params[2];
    out.fit.converged = lm.converged;
    double ss = 0.0;
    for (std::size_t j = 0; j < t.size(); ++j) {
        const double d = out.fit(t[j]) - v[j];
        ss += d * d;
    }
    out.fit.residual_rms = std::sqrt(ss / static_cast<double>(t.size()));
    const bool sane = std::isfinite(out.fit.a) && std::isfinite(out.fit.period) && out.fit.period > period_lo &&
                      out.fit.period < period_hi;
    out.status = sane ? OscillationStatus::detected : OscillationStatus::fit_failed;
    return out;
}

/// |a| of the fitted damped cosine, 0 when no oscillation is detected.
inline double oscillation_amplitude(const OscillationFit& fit)
{
    switch (fit.status) {
    case OscillationStatus::detected:
        return std::abs(fit.fit.a);
    case OscillationStatus::none:
        return 0.0;
    case OscillationStatus::fit_failed:
        break;
    }
    throw std::runtime_error("damped-cosine fit failed; amplitude undefined");
}

inline double oscillation_amplitude(const CorrelationCurve& curve, const DampedCosineOptions& options = {})
{
    return oscillation_amplitude(fit_damped_cosine(curve, options));
}

// --- phase drift across runs -----------------------------------------------

struct RunFringeFits {
    int run = 0;
    double start_seconds = 0.0;
    double total_counts = 0.0;
    std::optional<SinusoidFit> o;
    std::optional<SinusoidFit> h;
};

struct DriftRow {
    int run = 0;
    double start_seconds = 0.0;
    double chi_o = 0.0; ///< unwrapped
    double chi_h = 0.0; ///< unwrapped
    double delta = 0.0; ///< chi_H - chi_O mod 2 pi, in [0, 2 pi)
    double total_counts = 0.0;
};

struct DriftTable {
    std::vector<DriftRow> rows;
    double slope_o = 0.0; ///< rad per run, least squares over unwrapped chi_O
    double slope_h = 0.0;
};

inline DriftTable track_phase_offsets(std::span<const RunFringeFits> runs)
{
    if (runs.size() < 2) {
        throw std::invalid_argument("phase drift needs at least two runs");
    }
    const auto unwrap = [](double value, double reference) {
        return value + kTwoPi * std::round((reference - value) / kTwoPi);
    };
    DriftTable table;
    for (const auto& run : runs) {
        if (!run.o || !run.h) {
            throw std::invalid_argument("missing fringe fit for run " + std::to_string(run.run));
        }
        DriftRow row;
        row.run = run.run;
        row.start_seconds = run.start_seconds;
        row.total_counts = run.total_counts;
        row.chi_o = run.o->chi;
        row.chi_h = run.h->chi;
        if (!table.rows.empty()) {
            row.chi_o = unwrap(row.chi_o, table.rows.back().chi_o);
            row.chi_h = unwrap(row.chi_h, table.rows.back().chi_h);
        }
        row.delta = std::fmod(run.h->chi - run.o->chi, kTwoPi);
        if (row.delta < 0.0) {
            row.delta += kTwoPi;
        }
        table.rows.push_back(row);
    }
    const auto slope = [&](auto field) {
        const double n = static_cast<double>(table.rows.size());
        double mx = 0.0;
        double my = 0.0;
        for (const auto& row : table.rows) {
            mx += row.run;
            my += row.*field;
        }
        mx /= n;
        my /= n;
        double sxy = 0.0;
        double sxx = 0.0;
        for (const auto& row : table.rows) {
            sxy += (row.run - mx) * (row.*field - my);
            sxx += (row.run - mx) * (row.run - mx);
        }
        return sxx > 0.0 ? sxy / sxx : 0.0;
    };
    table.slope_o = slope(&DriftRow::chi_o);
    table.slope_h = slope(&DriftRow::chi_h);
    return table;
}

} // namespace stampcorr
