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
 * @file correlation.hpp
 * Windowed lag correlations of inter-arrival times and of the O/H label
 * sequence, and their mapping from lag to real time.
 *
 * For a series x_1..x_M and lag k the leading window is x_1..x_{M-k} and the
 * trailing window x_{1+k}..x_M. Each window is normalised by its own mean and
 * variance, so C(k) is a Pearson coefficient between the two windows.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

#include "stampcorr/timeline.hpp"

namespace stampcorr {

struct LaggedStats {
    double mean0 = 0.0;
    double mean_k = 0.0;
    double var0 = 0.0;
    double var_k = 0.0;
    double cross = 0.0;      ///< mean of x_i x_{i+k}
    double covariance = 0.0; ///< mean of (x_i - mean0)(x_{i+k} - mean_k)
};

/// The window sums at lag k by direct two-pass summation: means first, then
/// centred second moments, so nearly flat windows keep full precision.
inline LaggedStats lagged_stats(std::span<const double> x, std::size_t k)
{
    if (k >= x.size() || x.size() - k < 2) {
        throw std::invalid_argument("lag window too short: length " + std::to_string(x.size()) + ", lag " +
                                    std::to_string(k));
    }
    const std::size_t n = x.size() - k;
    const double inv = 1.0 / static_cast<double>(n);
    double s0 = 0.0;
    double sk = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s0 += x[i];
        sk += x[i + k];
    }
    LaggedStats st;
    st.mean0 = s0 * inv;
    st.mean_k = sk * inv;
    double q0 = 0.0;
    double qk = 0.0;
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double a = x[i] - st.mean0;
        const double b = x[i + k] - st.mean_k;
        q0 += a * a;
        qk += b * b;
        c += a * b;
    }
    st.var0 = q0 * inv;
    st.var_k = qk * inv;
    st.covariance = c * inv;
    st.cross = st.covariance + st.mean0 * st.mean_k;
    return st;
}

/// Normalised correlation from window sums; empty when either window is flat.
inline std::optional<double> correlation_from(const LaggedStats& st)
{
    if (!(st.var0 > 0.0 && st.var_k > 0.0)) {
        return std::nullopt;
    }
    return std::clamp(st.covariance / std::sqrt(st.var0 * st.var_k), -1.0, 1.0);
}

/// Correlation at one lag of a single series. Lag 0 of a non-flat series is exactly 1.
inline std::optional<double> lag_correlation(std::span<const double> x, std::size_t k)
{
    const auto st = lagged_stats(x, k);
    if (k == 0) {
        return st.var0 > 0.0 ? std::optional<double>(1.0) : std::nullopt;
    }
    return correlation_from(st);
}

namespace detail {

// The FFTW planner is not re-entrant; execution with distinct arrays is.
inline std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}

/// Sum_{i < M-k} y_i y_{i+k} for k = 0..max_lag via a zero-padded real FFT.
inline std::vector<double> fft_cross_sums(std::span<const double> y, std::size_t max_lag)
{
    std::size_t n = 1;
    while (n < 2 * y.size()) {
        n <<= 1;
    }
    const std::size_t half = n / 2 + 1;
    double* buf = fftw_alloc_real(n);
    fftw_complex* spec = fftw_alloc_complex(half);
    fftw_plan forward;
    fftw_plan backward;
    {
        std::lock_guard lock(fftw_planner_mutex());
        forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), buf, spec, FFTW_ESTIMATE);
        backward = fftw_plan_dft_c2r_1d(static_cast<int>(n), spec, buf, FFTW_ESTIMATE);
    }
    std::fill(buf, buf + n, 0.0);
    std::copy(y.begin(), y.end(), buf);
    fftw_execute(forward);
    for (std::size_t i = 0; i < half; ++i) {
        const double re = spec[i][0];
        const double im = spec[i][1];
        spec[i][0] = re * re + im * im;
        spec[i][1] = 0.0;
    }
    fftw_execute(backward);
    std::vector<double> out(buf, buf + max_lag + 1);
    for (auto& v : out) {
        v /= static_cast<double>(n);
    }
    {
        std::lock_guard lock(fftw_planner_mutex());
        fftw_destroy_plan(forward);
        fftw_destroy_plan(backward);
    }
    fftw_free(buf);
    fftw_free(spec);
    return out;
}

} // namespace detail

/// Work bound (lags x length) below which cross sums are summed directly.
inline constexpr std::size_t kDirectCrossWork = std::size_t{1} << 20;

/// C(k) for k = 0..max_lag (clipped to length - 2). Window means and second
/// moments come from prefix sums; cross sums from an FFT when the direct sum
/// would be expensive. The series is centred first, which leaves C unchanged
/// and keeps the sums well conditioned.
inline std::vector<std::optional<double>> all_lag_correlations(std::span<const double> x, std::size_t max_lag)
{
    if (x.size() < 2) {
        return {};
    }
    max_lag = std::min(max_lag, x.size() - 2);
    const std::size_t m = x.size();
    if ((max_lag + 1) * m <= kDirectCrossWork) {
        std::vector<std::optional<double>> out(max_lag + 1);
        for (std::size_t k = 0; k <= max_lag; ++k) {
            out[k] = lag_correlation(x, k);
        }
        return out;
    }

    double mu = 0.0;
    for (double v : x) {
        mu += v;
    }
    mu /= static_cast<double>(m);
    std::vector<double> y(m);
    std::vector<double> p1(m + 1, 0.0);
    std::vector<double> p2(m + 1, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        y[i] = x[i] - mu;
        p1[i + 1] = p1[i] + y[i];
        p2[i + 1] = p2[i] + y[i] * y[i];
    }
    const auto cross = detail::fft_cross_sums(y, max_lag);
    std::vector<std::optional<double>> out(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        const std::size_t n = m - k;
        const double inv = 1.0 / static_cast<double>(n);
        LaggedStats st;
        st.mean0 = p1[n] * inv;
        st.mean_k = (p1[m] - p1[k]) * inv;
        st.var0 = p2[n] * inv - st.mean0 * st.mean0;
        st.var_k = (p2[m] - p2[k]) * inv - st.mean_k * st.mean_k;
        st.cross = cross[k] * inv;
        st.covariance = st.cross - st.mean0 * st.mean_k;
        // Relative to the series scale, anything this small is rounding.
        const double floor = 1e-13 * p2[m] / static_cast<double>(m);
        if (st.var0 <= floor || st.var_k <= floor) {
            out[k] = std::nullopt;
        } else if (k == 0) {
            out[k] = 1.0;
        } else {
            out[k] = correlation_from(st);
        }
    }
    return out;
}

/// Expected C(k) of an i.i.d. series of length M: the two windows share
/// max(0, M - 2k) terms, which biases the product of their means.
inline double null_correlation_mean(std::size_t m, std::size_t k) noexcept
{
    if (k == 0) {
        return 1.0;
    }
    const double overlap = m > 2 * k ? static_cast<double>(m - 2 * k) : 0.0;
    const double n = static_cast<double>(m - k);
    return -overlap / (n * n);
}

/// Large-M variance of C(k) of an i.i.d. series.
inline double null_correlation_variance(std::size_t m, std::size_t k) noexcept
{
    return k == 0 ? 0.0 : 1.0 / static_cast<double>(m - k);
}

// --- segment ensembles -------------------------------------------------------

/// Label series as doubles.
inline std::vector<double> label_series(const SettingSegment& segment)
{
    const auto x = labels(segment);
    return {x.begin(), x.end()};
}

/// Mean spacing (s) of the events passing `filter` in one segment.
inline double mean_spacing(const SettingSegment& segment, EventFilter filter)
{
    const auto dt = time_differences(segment, filter);
    double s = 0.0;
    for (double v : dt) {
        s += v;
    }
    return s / static_cast<double>(dt.size());
}

/// C_E at lag k averaged over the segments (one per run) of a setting.
/// Segments too short for the lag or with a flat window are skipped.
inline std::optional<double> time_diff_correlation(std::span<const SettingSegment> segments, EventFilter filter,
                                                   std::size_t k)
{
    double sum = 0.0;
    int n = 0;
    for (const auto& seg : segments) {
        const auto dt = time_differences(seg, filter);
        if (dt.size() < k + 2) {
            continue;
        }
        if (const auto c = lag_correlation(dt, k)) {
            sum += *c;
            ++n;
        }
    }
    if (n == 0) {
        return std::nullopt;
    }
    return sum / n;
}

/// C_x at lag k averaged over the segments of a setting.
inline std::optional<double> label_correlation(std::span<const SettingSegment> segments, std::size_t k)
{
    double sum = 0.0;
    int n = 0;
    for (const auto& seg : segments) {
        const auto x = label_series(seg);
        if (x.size() < k + 2) {
            continue;
        }
        if (const auto c = lag_correlation(x, k)) {
            sum += *c;
            ++n;
        }
    }
    if (n == 0) {
        return std::nullopt;
    }
    return sum / n;
}

// --- real-time binning -------------------------------------------------------

enum class CorrelationSource { O, H, OH, labels };

inline std::string to_string(CorrelationSource source)
{
    switch (source) {
    case CorrelationSource::O:
        return "O";
    case CorrelationSource::H:
        return "H";
    case CorrelationSource::OH:
        return "OH";
    case CorrelationSource::labels:
        return "x";
    }
    return "?";
}

inline CorrelationSource source_from_string(const std::string& text)
{
    if (text == "O") {
        return CorrelationSource::O;
    }
    if (text == "H") {
        return CorrelationSource::H;
    }
    if (text == "OH") {
        return CorrelationSource::OH;
    }
    if (text == "x") {
        return CorrelationSource::labels;
    }
    throw std::invalid_argument("unknown correlation source '" + text + "' (expected O, H, OH or x)");
}

struct CorrelationBin {
    double center = 0.0; ///< s
    double value = 0.0;
    std::size_t sample_count = 0;
    double null_mean = 0.0;     ///< expected value for independent data
    double null_variance = 0.0; ///< variance of `value` for independent data

    bool valid() const noexcept { return sample_count > 0; }
};

struct CorrelationCurve {
    double bin_width = 0.01;
    CorrelationSource source = CorrelationSource::OH;
    int setting = 0;
    std::vector<CorrelationBin> bins;
};

/// Accumulates per-lag correlations of several series (one per run) into
/// fixed real-time bins. Each lag k of a series with mean spacing <dt> lands
/// at k <dt>; lag 0 is left out since it is 1 by construction. Runs are
/// averaged with equal weight per lag sample.
class CorrelationBinner {
public:
    CorrelationBinner(double bin_width = 0.01, double max_dt = 10.0) : bin_width_(bin_width)
    {
        if (!(bin_width > 0.0)) {
            throw std::invalid_argument("bin width must be positive");
        }
        const auto n = static_cast<std::size_t>(std::floor(max_dt / bin_width + 1e-9));
        sum_.assign(n, 0.0);
        null_mean_.assign(n, 0.0);
        null_var_.assign(n, 0.0);
        count_.assign(n, 0);
    }

    /// Highest lag that can land in a bin for this spacing.
    std::size_t max_lag(double spacing) const noexcept
    {
        return static_cast<std::size_t>(std::ceil(static_cast<double>(count_.size()) * bin_width_ / spacing));
    }

    /// `values[k]` is C(k) of a series of length `length`.
    void add(std::span<const std::optional<double>> values, double spacing, std::size_t length)
    {
        if (!(spacing > 0.0)) {
            throw std::invalid_argument("mean spacing must be positive");
        }
        for (std::size_t k = 1; k < values.size(); ++k) {
            if (!values[k]) {
                continue;
            }
            const double dt = static_cast<double>(k) * spacing;
            const auto bin = static_cast<std::size_t>(dt / bin_width_);
            if (bin >= count_.size()) {
                break;
            }
            sum_[bin] += *values[k];
            null_mean_[bin] += null_correlation_mean(length, k);
            null_var_[bin] += null_correlation_variance(length, k);
            ++count_[bin];
        }
    }

    void merge(const CorrelationBinner& other)
    {
        if (other.count_.size() != count_.size() || other.bin_width_ != bin_width_) {
            throw std::invalid_argument("cannot merge binners with different layouts");
        }
        for (std::size_t i = 0; i < count_.size(); ++i) {
            sum_[i] += other.sum_[i];
            null_mean_[i] += other.null_mean_[i];
            null_var_[i] += other.null_var_[i];
            count_[i] += other.count_[i];
        }
    }

    CorrelationCurve curve(CorrelationSource source, int setting) const
    {
        CorrelationCurve out;
        out.bin_width = bin_width_;
        out.source = source;
        out.setting = setting;
        out.bins.resize(count_.size());
        for (std::size_t i = 0; i < count_.size(); ++i) {
            auto& b = out.bins[i];
            b.center = (static_cast<double>(i) + 0.5) * bin_width_;
            b.sample_count = count_[i];
            if (count_[i] > 0) {
                const double n = static_cast<double>(count_[i]);
                b.value = std::clamp(sum_[i] / n, -1.0, 1.0);
                b.null_mean = null_mean_[i] / n;
                b.null_variance = null_var_[i] / (n * n);
            }
        }
        return out;
    }

private:
    double bin_width_;
    std::vector<double> sum_;
    std::vector<double> null_mean_;
    std::vector<double> null_var_;
    std::vector<std::size_t> count_;
};

/// Bins one per-lag sequence (lag k at k * spacing). An empty input gives a
/// curve with no valid bins.
inline CorrelationCurve bin_correlation(std::span<const std::optional<double>> values, double spacing,
                                        double bin_width = 0.01, double max_dt = 10.0, std::size_t length = 0)
{
    CorrelationBinner binner(bin_width, max_dt);
    if (!values.empty()) {
        binner.add(values, spacing, length > 0 ? length : values.size() + 1);
    }
    return binner.curve(CorrelationSource::OH, 0);
}

/// The series analysed for a source in one segment, with its lag-to-time spacing.
struct LagSeries {
    std::vector<double> values;
    double spacing = 0.0;
};

inline LagSeries lag_series(const SettingSegment& segment, CorrelationSource source)
{
    LagSeries s;
    switch (source) {
    case CorrelationSource::O:
        s.values = time_differences(segment, EventFilter::O);
        break;
    case CorrelationSource::H:
        s.values = time_differences(segment, EventFilter::H);
        break;
    case CorrelationSource::OH:
        s.values = time_differences(segment, EventFilter::OH);
        break;
    case CorrelationSource::labels:
        s.values = label_series(segment);
        s.spacing = mean_spacing(segment, EventFilter::OH);
        return s;
    }
    double sum = 0.0;
    for (double v : s.values) {
        sum += v;
    }
    s.spacing = sum / static_cast<double>(s.values.size());
    return s;
}

/// Adds one segment's correlations for `source` to `binner`.
inline void accumulate_segment(CorrelationBinner& binner, const SettingSegment& segment, CorrelationSource source)
{
    const auto series = lag_series(segment, source);
    const auto values = all_lag_correlations(series.values, binner.max_lag(series.spacing));
    binner.add(values, series.spacing, series.values.size());
}

} // namespace stampcorr
