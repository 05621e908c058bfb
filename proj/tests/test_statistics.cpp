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

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "stampcorr/rng.hpp"
#include "stampcorr/statistics.hpp"

using namespace stampcorr;
using Catch::Approx;

namespace {

double binomial_pmf(int n, int k, double p)
{
    return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)) * std::pow(p, k) *
           std::pow(1.0 - p, n - k);
}

/// Mean and variance of P(phi + e) for e uniform on [-eps0, eps0], by adaptive quadrature.
std::pair<double, double> quadrature_averages(const FringeParams& fp, double x, Beam beam)
{
    using boost::math::quadrature::gauss_kronrod;
    const double phi = fp.omega_o * x + fp.chi_o;
    const auto p = [&](double e) {
        const double po = fp.o_share() * (1.0 + fp.b_o * std::cos(phi + e));
        return beam == Beam::O ? po : 1.0 - po;
    };
    const double w = 2.0 * fp.eps0;
    const double m = gauss_kronrod<double, 61>::integrate(p, -fp.eps0, fp.eps0, 15, 1e-14) / w;
    const double m2 =
        gauss_kronrod<double, 61>::integrate([&](double e) { return p(e) * p(e); }, -fp.eps0, fp.eps0, 15, 1e-14) / w;
    return {m, m2 - m * m};
}

} // namespace

TEST_CASE("binomial moments", "[statistics]")
{
    auto m = binomial_moments(7730, 0.5);
    CHECK(m.mean == 3865.0);
    CHECK(m.variance == 1932.5);
    m = binomial_moments(100, 0.0);
    CHECK(m.mean == 0.0);
    CHECK(m.variance == 0.0);

    // Exhaustive enumeration of Binomial(10, 0.3).
    double mean = 0.0;
    double second = 0.0;
    for (int k = 0; k <= 10; ++k) {
        const double pk = binomial_pmf(10, k, 0.3);
        mean += k * pk;
        second += k * k * pk;
    }
    m = binomial_moments(10, 0.3);
    CHECK(m.mean == Approx(mean).epsilon(1e-12));
    CHECK(m.variance == Approx(second - mean * mean).epsilon(1e-12));
    CHECK_THROWS_AS(binomial_moments(10, 1.5), std::invalid_argument);
}

TEST_CASE("compound variance reductions", "[statistics]")
{
    // Pure Poisson: sigma_N^2 = <N>, no phase fluctuation -> <N><P>.
    for (double n : {10.0, 7730.0, 1e6}) {
        for (double p : {0.0, 0.2, 0.36, 0.9}) {
            CHECK(std::abs(compound_variance({n, n, p, 0.0}) - n * p) <= 1e-10 * std::max(1.0, n * p));
            CHECK(std::abs(compound_variance({n, 0.0, p, 0.0}) - n * p * (1.0 - p)) <= 1e-10 * std::max(1.0, n));
        }
    }
    CHECK_THROWS_AS(compound_variance({10, -1, 0.5, 0}), std::invalid_argument);
    CHECK_THROWS_AS(compound_variance({10, 1, 0.5, 0.3}), std::invalid_argument);
}

TEST_CASE("compound variance O/H symmetry at fixed N", "[statistics][property]")
{
    RandomStream rng(21, 0, StreamPurpose::test);
    for (int i = 0; i < 200; ++i) {
        FringeParams fp;
        fp.b_o = rng.uniform(0.0, 0.9);
        fp.eps0 = rng.uniform(0.0, 0.5);
        const double x = rng.uniform(1.0, 33.0);
        const auto o = uniform_phase_averages(fp, x, Beam::O);
        const auto h = uniform_phase_averages(fp, x, Beam::H);
        const double n = rng.uniform(10.0, 1e4);
        REQUIRE(compound_variance({n, 0.0, o.mean_p, o.var_p}) ==
                Approx(compound_variance({n, 0.0, h.mean_p, h.var_p})).epsilon(1e-12));
    }
}

TEST_CASE("compound variance against Monte Carlo", "[statistics][oracle]")
{
    RandomStream rng(1234, 0, StreamPurpose::test);
    std::mt19937_64 gen(99);
    const int samples = 1000000;
    for (int set = 0; set < 20; ++set) {
        FringeParams fp;
        fp.b_o = rng.uniform(0.2, 0.9);
        fp.chi_o = rng.uniform(-3.0, 3.0);
        fp.eps0 = rng.uniform(0.05, 0.6);
        const double x = 1.0 + std::floor(rng.uniform(0.0, 33.0));
        const double mean_n = rng.uniform(50.0, 800.0);
        const double phi = fp.omega_o * x + fp.chi_o;
        std::poisson_distribution<int> poisson(mean_n);
        double s1 = 0.0;
        double s2 = 0.0;
        std::vector<double> values(samples);
        for (int i = 0; i < samples; ++i) {
            const int n = poisson(gen);
            const double eps = rng.uniform(-fp.eps0, fp.eps0);
            const double p = fp.o_share() * (1.0 + fp.b_o * std::cos(phi + eps));
            std::binomial_distribution<int> binom(n, p);
            values[static_cast<std::size_t>(i)] = binom(gen);
            s1 += values[static_cast<std::size_t>(i)];
        }
        const double mean = s1 / samples;
        double s4 = 0.0;
        for (double v : values) {
            const double d = (v - mean) * (v - mean);
            s2 += d;
            s4 += d * d;
        }
        const double var = s2 / (samples - 1);
        const double se = std::sqrt((s4 / samples - var * var) / samples);
        const auto avg = uniform_phase_averages(fp, x, Beam::O);
        const double model = compound_variance({mean_n, mean_n, avg.mean_p, avg.var_p});
        INFO("set " << set << " model " << model << " sample " << var << " se " << se);
        CHECK(std::abs(var - model) < 3.0 * se);
    }
}

TEST_CASE("uniform phase averages against quadrature", "[statistics][oracle]")
{
    FringeParams fp;
    for (double eps0 : {1e-5, 1e-3, 0.13, 0.5, 1.0}) {
        fp.eps0 = eps0;
        for (int x = 1; x <= 33; ++x) {
            for (Beam beam : {Beam::O, Beam::H}) {
                const auto exact = uniform_phase_averages(fp, x, beam);
                const auto [m, v] = quadrature_averages(fp, x, beam);
                REQUIRE(std::abs(exact.mean_p - m) < 1e-10);
                REQUIRE(std::abs(exact.var_p - v) < 1e-10);
            }
        }
    }
}

TEST_CASE("uniform phase averages: limits and invariants", "[statistics][property]")
{
    FringeParams fp;
    fp.eps0 = 0.0;
    for (int x = 1; x <= 33; ++x) {
        const auto a = uniform_phase_averages(fp, x, Beam::O);
        CHECK(a.mean_p == Approx(relative_frequencies(fp, x).o).epsilon(1e-14));
        CHECK(a.var_p == 0.0);
    }
    for (int i = 0; i <= 100; ++i) {
        fp.eps0 = i / 100.0;
        for (int x = 1; x <= 33; ++x) {
            for (Beam beam : {Beam::O, Beam::H}) {
                const auto a = uniform_phase_averages(fp, x, beam);
                REQUIRE(a.mean_p >= 0.0);
                REQUIRE(a.mean_p <= 1.0);
                REQUIRE(a.var_p <= a.mean_p * (1.0 - a.mean_p));
            }
        }
    }
}

TEST_CASE("exact averages agree with the small-eps0 expansion to third order", "[statistics][property]")
{
    FringeParams fp;
    double worst = 0.0;
    for (double eps0 = 1e-3; eps0 <= 0.3; eps0 *= 1.25) {
        fp.eps0 = eps0;
        for (int x = 1; x <= 33; ++x) {
            const double phi = fp.omega_o * x + fp.chi_o;
            const double amp = fp.o_share() * fp.b_o;
            const auto a = uniform_phase_averages(fp, x, Beam::O);
            const double mean_expansion = fp.o_share() + amp * std::cos(phi) * (1.0 - eps0 * eps0 / 6.0);
            const double var_expansion = eps0 * eps0 / 3.0 * amp * amp * std::sin(phi) * std::sin(phi);
            worst = std::max(worst, std::abs(a.mean_p - mean_expansion) / std::pow(eps0, 3));
            worst = std::max(worst, std::abs(a.var_p - var_expansion) / std::pow(eps0, 3));
        }
    }
    CHECK(worst < 1.0);
}

TEST_CASE("phase variance is minimal at fringe extrema", "[statistics]")
{
    FringeParams fp;
    fp.eps0 = 0.13;
    fp.chi_o = -fp.omega_o * 5; // maximum at X = 5
    const auto at_max = uniform_phase_averages(fp, 5, Beam::O);
    const auto off = uniform_phase_averages(fp, 5 + std::numbers::pi / 2 / fp.omega_o, Beam::O);
    // Only the fourth-order term survives at the extremum.
    CHECK(at_max.var_p < 2e-3 * off.var_p);
    for (double dx : {-0.2, -0.05, 0.05, 0.2}) {
        CHECK(uniform_phase_averages(fp, 5 + dx, Beam::O).var_p > at_max.var_p);
    }
}

TEST_CASE("sinc series branch", "[statistics]")
{
    for (double x : {0.0, 1e-8, 5e-5, 9.9e-5, 1e-4, 0.1, 3.0}) {
        const double direct = x == 0.0 ? 1.0 : std::sin(x) / x;
        CHECK(sinc(x) == Approx(direct).epsilon(1e-15));
        CHECK(sinc(-x) == sinc(x));
    }
}

TEST_CASE("exponential moment ratios", "[statistics]")
{
    RandomStream rng(77, 0, StreamPurpose::test);
    std::vector<double> dt(1000000);
    for (auto& v : dt) {
        v = rng.exponential(1.0 / 1.3e-3);
    }
    const auto r = moment_ratios(dt);
    CHECK_FALSE(r.low_statistics);
    CHECK(r.spread() < 0.01);
    CHECK(r.first == Approx(1.3e-3).epsilon(0.01));

    const std::vector<double> constant(2000, 0.5);
    const auto c = moment_ratios(constant);
    CHECK(c.first == Approx(0.5));
    CHECK(c.second == Approx(0.5 / std::sqrt(2.0)));
    CHECK(c.third == Approx(0.5 / std::cbrt(6.0)));
    CHECK(c.spread() > 0.4);

    // Uniform on [0, 2 mu]: <x> = mu, <x^2> = 4 mu^2 / 3, <x^3> = 2 mu^3.
    std::vector<double> uni(1000000);
    for (auto& v : uni) {
        v = rng.uniform(0.0, 2.0);
    }
    const auto u = moment_ratios(uni);
    CHECK(u.first == Approx(1.0).epsilon(0.005));
    CHECK(u.second == Approx(std::sqrt(2.0 / 3.0)).epsilon(0.005));
    CHECK(u.third == Approx(std::cbrt(1.0 / 3.0)).epsilon(0.005));

    CHECK(moment_ratios(std::vector<double>(10, 1.0)).low_statistics);
    CHECK_THROWS_AS(moment_ratios(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("dispersion test", "[statistics]")
{
    std::mt19937_64 gen(5);
    std::poisson_distribution<int> poisson(7730.0);
    std::vector<double> counts(1221);
    for (auto& c : counts) {
        c = poisson(gen);
    }
    const auto t = dispersion_test(counts);
    CHECK(t.index == Approx(1.0).margin(0.15));
    CHECK(t.p_value > 0.01);
    // Doubly stochastic counts are overdispersed.
    for (std::size_t i = 0; i < counts.size(); ++i) {
        counts[i] += (i % 2 == 0 ? 300.0 : -300.0);
    }
    CHECK(dispersion_test(counts).p_value < 1e-6);
    CHECK_THROWS_AS(dispersion_test(std::vector<double>{3.0}), std::invalid_argument);
}

TEST_CASE("rank correlation", "[statistics]")
{
    const std::vector<double> x{1, 2, 3, 4, 5};
    const std::vector<double> y{10, 20, 30, 40, 50};
    const std::vector<double> z{5, 4, 3, 2, 1};
    CHECK(spearman(x, y) == Approx(1.0));
    CHECK(spearman(x, z) == Approx(-1.0));
    CHECK(ranks(std::vector<double>{3, 1, 3, 2}) == std::vector<double>{3.5, 1, 3.5, 2});
    const std::vector<double> cube{1, 8, 27, 64, 125};
    CHECK(spearman(x, cube) == Approx(1.0));
    CHECK(pearson(x, cube) < 1.0);
}
