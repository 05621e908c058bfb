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
 * @file statistics.hpp
 * Count statistics: binomial baseline, compound variance under run-size and
 * phase fluctuations, exact averages over a uniform phase fluctuation, and
 * exponential-law diagnostics for inter-arrival times.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "stampcorr/quantum_model.hpp"
#include "stampcorr/timeline.hpp"

namespace stampcorr {

struct CountMoments {
    double mean = 0.0;
    double variance = 0.0;
    int n_runs = 1;

    double stddev() const noexcept { return std::sqrt(variance); }
};

/// Mean and variance of Binomial(N, P).
inline CountMoments binomial_moments(double n, double p)
{
    if (n < 0.0 || p < 0.0 || p > 1.0) {
        throw std::invalid_argument("binomial moments need N >= 0 and P in [0, 1]");
    }
    return {n * p, n * p * (1.0 - p), 1};
}

/// Sample mean and unbiased variance over runs.
inline CountMoments sample_moments(std::span<const double> values)
{
    if (values.empty()) {
        throw std::invalid_argument("sample moments of an empty set");
    }
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    return {mean, values.size() > 1 ? ss / (n - 1.0) : 0.0, static_cast<int>(values.size())};
}

/// Run-size distribution (mean, variance) and per-event success probability
/// distribution (mean, variance) of a doubly stochastic binomial count.
struct FluctuationModel {
    double mean_n = 0.0;
    double var_n = 0.0;
    double mean_p = 0.0;
    double var_p = 0.0;

    void validate() const
    {
        if (var_n < 0.0 || var_p < 0.0) {
            throw std::invalid_argument("fluctuation variances must be non-negative");
        }
        if (mean_p < 0.0 || mean_p > 1.0) {
            throw std::invalid_argument("mean probability outside [0, 1]");
        }
        if (var_p > mean_p * (1.0 - mean_p) * (1.0 + 1e-12)) {
            throw std::invalid_argument("probability variance exceeds P(1 - P)");
        }
    }
};

/// Variance of N_O when N ~ p(N) and, within a run, every event succeeds
/// with a common P drawn from p(P).
inline double compound_variance(const FluctuationModel& fm)
{
    fm.validate();
    const double n = fm.mean_n;
    const double p = fm.mean_p;
    return fm.var_n * fm.var_p + p * p * fm.var_n + n * (n - 1.0) * fm.var_p + n * p * (1.0 - p);
}

/// sin(x)/x, with a series below |x| < 1e-4.
inline double sinc(double x) noexcept
{
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    }
    return std::sin(x) / x;
}

struct PhaseAverages {
    double mean_p = 0.0;
    double var_p = 0.0;
};

/// Exact mean and variance of the detection probability of `beam` at setting
/// X when the phase carries a uniform fluctuation on [-eps0, eps0].
///
/// With phi = Omega_O X + chi_O, <cos(phi + e)> = cos(phi) sinc(eps0) and
/// <cos^2(phi + e)> = 1/2 + cos(2 phi) sinc(2 eps0) / 2. The H probability is
/// 1 - P_O, so both beams share the variance.
inline PhaseAverages uniform_phase_averages(const FringeParams& fp, double setting, Beam beam)
{
    if (fp.eps0 < 0.0) {
        throw std::invalid_argument("eps0 must be non-negative");
    }
    const double phi = fp.omega_o * setting + fp.chi_o;
    if (fp.eps0 == 0.0) {
        const double p = fp.o_share() * (1.0 + fp.b_o * std::cos(phi));
        return {beam == Beam::O ? p : 1.0 - p, 0.0};
    }
    const double c1 = std::cos(phi) * sinc(fp.eps0);
    const double c2 = 0.5 + 0.5 * std::cos(2.0 * phi) * sinc(2.0 * fp.eps0);
    const double amp = fp.o_share() * fp.b_o;
    const double mean_o = fp.o_share() + amp * c1;
    // c2 - c1^2 >= 0 analytically; clamp rounding noise at eps0 -> 0.
    const double var = amp * amp * std::max(0.0, c2 - c1 * c1);
    return {beam == Beam::O ? mean_o : 1.0 - mean_o, var};
}

// --- inter-arrival diagnostics ---------------------------------------------

/// Running first three raw moments.
class MomentAccumulator {
public:
    void add(double x) noexcept
    {
        ++n_;
        s1_ += x;
        s2_ += x * x;
        s3_ += x * x * x;
    }

    void merge(const MomentAccumulator& other) noexcept
    {
        n_ += other.n_;
        s1_ += other.s1_;
        s2_ += other.s2_;
        s3_ += other.s3_;
    }

    std::size_t count() const noexcept { return n_; }
    double m1() const noexcept { return s1_ / static_cast<double>(n_); }
    double m2() const noexcept { return s2_ / static_cast<double>(n_); }
    double m3() const noexcept { return s3_ / static_cast<double>(n_); }

private:
    std::size_t n_ = 0;
    double s1_ = 0.0;
    double s2_ = 0.0;
    double s3_ = 0.0;
};

/// <dt>, (<dt^2>/2)^(1/2), (<dt^3>/6)^(1/3): equal for an exponential law.
struct MomentRatios {
    double first = 0.0;
    double second = 0.0;
    double third = 0.0;
    std::size_t samples = 0;
    bool low_statistics = false;

    /// max/min - 1 over the three statistics.
    double spread() const noexcept
    {
        const double hi = std::max({first, second, third});
        const double lo = std::min({first, second, third});
        return hi / lo - 1.0;
    }
};

inline constexpr std::size_t kMinMomentSamples = 1000;

inline MomentRatios moment_ratios(const MomentAccumulator& acc)
{
    if (acc.count() == 0) {
        throw std::invalid_argument("moment ratios of an empty series");
    }
    return {acc.m1(), std::sqrt(acc.m2() / 2.0), std::cbrt(acc.m3() / 6.0), acc.count(),
            acc.count() < kMinMomentSamples};
}

inline MomentRatios moment_ratios(std::span<const double> dt)
{
    MomentAccumulator acc;
    for (double x : dt) {
        acc.add(x);
    }
    return moment_ratios(acc);
}

/// Poisson dispersion test: (n - 1) s^2 / mean ~ chi^2(n - 1) for Poisson counts.
struct DispersionTest {
    double index = 1.0; ///< s^2 / mean
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 1.0; ///< two-sided
};

inline DispersionTest dispersion_test(std::span<const double> counts)
{
    if (counts.size() < 2) {
        throw std::invalid_argument("dispersion test needs at least two counts");
    }
    const auto m = sample_moments(counts);
    if (m.mean <= 0.0) {
        throw std::invalid_argument("dispersion test needs a positive mean");
    }
    DispersionTest t;
    t.index = m.variance / m.mean;
    t.dof = static_cast<double>(counts.size() - 1);
    t.statistic = t.dof * t.index;
    const boost::math::chi_squared dist(t.dof);
    const double lower = boost::math::cdf(dist, t.statistic);
    t.p_value = std::min(1.0, 2.0 * std::min(lower, 1.0 - lower));
    return t;
}

/// Average ranks (ties share the mean rank), 1-based.
inline std::vector<double> ranks(std::span<const double> values)
{
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) {
            ++j;
        }
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            out[order[k]] = rank;
        }
        i = j + 1;
    }
    return out;
}

inline double pearson(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) {
        throw std::invalid_argument("correlation needs two equally long series of length >= 2");
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) {
        return 0.0;
    }
    return sxy / std::sqrt(sxx * syy);
}

inline double spearman(std::span<const double> x, std::span<const double> y)
{
    const auto rx = ranks(x);
    const auto ry = ranks(y);
    return pearson(rx, ry);
}

} // namespace stampcorr
