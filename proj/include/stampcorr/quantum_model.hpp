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

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>

#include "stampcorr/config.hpp"

namespace stampcorr {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle into (-pi, pi].
inline double wrap_phase(double angle) noexcept
{
    double wrapped = std::remainder(angle, kTwoPi);
    if (wrapped <= -std::numbers::pi) {
        wrapped += kTwoPi;
    }
    return wrapped;
}

/// Plane-wave crystal plate: reflection probability R, transmission 1 - R.
class BeamSplitterModel {
public:
    explicit BeamSplitterModel(double reflectivity) : r_(reflectivity)
    {
        if (!(reflectivity > 0.0 && reflectivity < 1.0)) {
            throw std::invalid_argument("reflectivity must lie in (0, 1)");
        }
    }

    double reflectivity() const noexcept { return r_; }
    double transmissivity() const noexcept { return 1.0 - r_; }

private:
    double r_;
};

struct BeamProbabilities {
    double o = 0.0;
    double h = 0.0;
};

/// Detection probabilities of the ideal four-plate interferometer at relative
/// phase `chi`. The remainder 1 - o - h leaves through the mirror plate.
inline BeamProbabilities beam_probabilities(const BeamSplitterModel& bs, double chi) noexcept
{
    const double r = bs.reflectivity();
    const double t = bs.transmissivity();
    const double c = std::cos(chi);
    return {2.0 * r * r * t * (1.0 + c), r * (t * t + r * r) * (1.0 - (2.0 * r * t / (t * t + r * r)) * c)};
}

/// (max - min) / (max + min) of `fringe` sampled on `grid_points` phases in [0, 2pi).
inline double visibility(const std::function<double(double)>& fringe, int grid_points = 10000)
{
    double lo = fringe(0.0);
    double hi = lo;
    for (int i = 1; i < grid_points; ++i) {
        const double v = fringe(kTwoPi * i / grid_points);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi + lo == 0.0) {
        throw std::domain_error("visibility undefined: max + min = 0");
    }
    return (hi - lo) / (hi + lo);
}

/// Fringe parameters of the sinusoidal count model, one set per beam, plus
/// the half-width of the uniform phase fluctuation.
struct FringeParams {
    double a_o = 2780.0;
    double a_h = 4950.0;
    double b_o = 0.74;
    double b_h = 0.42;
    double omega_o = 0.60;
    double omega_h = 0.60;
    double chi_o = -2.71;
    double chi_h = 0.43;
    double eps0 = 0.0;

    /// A_O / (A_O + A_H)
    double o_share() const noexcept { return a_o / (a_o + a_h); }

    /// B_O A_O / A_H, the H-beam fringe amplitude implied by P_O + P_H = 1.
    double coupled_h_amplitude() const noexcept { return b_o * a_o / a_h; }

    void validate() const
    {
        if (!(a_o > 0.0 && a_h > 0.0)) {
            throw std::invalid_argument("fringe means A_O, A_H must be positive");
        }
        if (!(b_o >= 0.0 && b_o <= 1.0)) {
            throw std::invalid_argument("B_O must lie in [0, 1]");
        }
        if (coupled_h_amplitude() > 1.0) {
            throw std::invalid_argument("B_O A_O / A_H exceeds 1: probabilities leave [0, 1]");
        }
        if (!(eps0 >= 0.0)) {
            throw std::invalid_argument("eps0 must be non-negative");
        }
    }
};

/// Time-dependent part of the phase: Y sin(omega (t - t0)).
struct OscillationParams {
    double amplitude = 0.0;
    double omega = kTwoPi / 2.8;
    double t0 = 0.0;

    void validate() const
    {
        if (!(amplitude >= 0.0)) {
            throw std::invalid_argument("oscillation amplitude Y must be non-negative");
        }
        if (!(omega > 0.0)) {
            throw std::invalid_argument("oscillation angular frequency must be positive");
        }
    }

    double period() const noexcept { return kTwoPi / omega; }
};

struct CountPair {
    double o = 0.0;
    double h = 0.0;
};

/// N_O = A_O [1 + B_O cos(Omega_O X + chi_O)], N_H likewise with the H parameters.
inline CountPair count_model(const FringeParams& fp, double setting) noexcept
{
    return {fp.a_o * (1.0 + fp.b_o * std::cos(fp.omega_o * setting + fp.chi_o)),
            fp.a_h * (1.0 + fp.b_h * std::cos(fp.omega_h * setting + fp.chi_h))};
}

/// O/H detection probabilities at total phase `phase`; they sum to one.
inline BeamProbabilities probabilities_at_phase(const FringeParams& fp, double phase) noexcept
{
    const double share = fp.o_share();
    const double p_o = share * (1.0 + fp.b_o * std::cos(phase));
    return {p_o, 1.0 - p_o};
}

/// Relative frequencies P_O, P_H of a neutron landing in each beam at setting X.
inline BeamProbabilities relative_frequencies(const FringeParams& fp, double setting)
{
    if (fp.coupled_h_amplitude() > 1.0 || fp.b_o > 1.0 || fp.b_o < 0.0) {
        throw std::invalid_argument("relative frequencies need 0 <= B_O and B_O A_O / A_H <= 1");
    }
    const double c = std::cos(fp.omega_o * setting + fp.chi_o);
    const double total = fp.a_o + fp.a_h;
    return {fp.a_o / total * (1.0 + fp.b_o * c), fp.a_h / total * (1.0 - fp.coupled_h_amplitude() * c)};
}

/// Mean-count ratio A_H / A_O predicted for reflectivity R.
inline double ratio_from_reflectivity(double r) noexcept
{
    const double t = 1.0 - r;
    return (t * t + r * r) / (2.0 * r * t);
}

struct ReflectivityRoots {
    double plus = 0.5;
    double minus = 0.5;
};

/// Both reflectivities reproducing the observed mean-count ratio alpha >= 1.
inline ReflectivityRoots reflectivity_from_ratio(double alpha)
{
    if (!(alpha >= 1.0)) {
        throw std::domain_error("mean-count ratio below 1 has no reflectivity solution");
    }
    const double root = std::sqrt((alpha - 1.0) / (alpha + 1.0));
    return {(1.0 + root) / 2.0, (1.0 - root) / 2.0};
}

/// Phase seen by a neutron at setting X, time t since the setting started,
/// with fluctuation eps.
inline double instantaneous_phase(const FringeParams& fp, const OscillationParams& op, double setting, double t,
                                  double eps) noexcept
{
    return fp.omega_o * setting + fp.chi_o + eps + op.amplitude * std::sin(op.omega * (t - op.t0));
}

// --- key=value serialisation -----------------------------------------------

inline void store(KeyValueConfig& config, const FringeParams& fp)
{
    config.set("a_o", fp.a_o);
    config.set("a_h", fp.a_h);
    config.set("b_o", fp.b_o);
    config.set("b_h", fp.b_h);
    config.set("omega_o", fp.omega_o);
    config.set("omega_h", fp.omega_h);
    config.set("chi_o", fp.chi_o);
    config.set("chi_h", fp.chi_h);
    config.set("eps0", fp.eps0);
}

inline FringeParams load_fringe(const KeyValueConfig& config, const FringeParams& defaults = {})
{
    FringeParams fp;
    fp.a_o = config.get_double("a_o", defaults.a_o);
    fp.a_h = config.get_double("a_h", defaults.a_h);
    fp.b_o = config.get_double("b_o", defaults.b_o);
    fp.b_h = config.get_double("b_h", defaults.b_h);
    fp.omega_o = config.get_double("omega_o", defaults.omega_o);
    fp.omega_h = config.get_double("omega_h", defaults.omega_h);
    fp.chi_o = config.get_double("chi_o", defaults.chi_o);
    fp.chi_h = config.get_double("chi_h", defaults.chi_h);
    fp.eps0 = config.get_double("eps0", defaults.eps0);
    try {
        fp.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return fp;
}

inline void store(KeyValueConfig& config, const OscillationParams& op)
{
    config.set("osc_amplitude", op.amplitude);
    config.set("osc_omega", op.omega);
    config.set("osc_t0", op.t0);
}

inline OscillationParams load_oscillation(const KeyValueConfig& config, const OscillationParams& defaults = {})
{
    OscillationParams op;
    op.amplitude = config.get_double("osc_amplitude", defaults.amplitude);
    op.omega = config.get_double("osc_omega", defaults.omega);
    op.t0 = config.get_double("osc_t0", defaults.t0);
    try {
        op.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    return op;
}

} // namespace stampcorr
