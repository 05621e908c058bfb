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

#include "stampcorr/quantum_model.hpp"
#include "stampcorr/rng.hpp"

using namespace stampcorr;
using Catch::Approx;
using std::numbers::pi;

TEST_CASE("ideal interferometer probabilities", "[model]")
{
    const BeamSplitterModel half(0.5);
    auto p = beam_probabilities(half, 0.0);
    CHECK(p.o == Approx(0.5).margin(1e-15));
    CHECK(p.h == Approx(0.0).margin(1e-15));
    p = beam_probabilities(half, pi);
    CHECK(p.o == Approx(0.0).margin(1e-15));
    CHECK(p.h == Approx(0.5).margin(1e-15));

    // R = 0.24, chi = 0, evaluated term by term.
    const double r = 0.24;
    const double t = 0.76;
    p = beam_probabilities(BeamSplitterModel(r), 0.0);
    CHECK(p.o == Approx(2 * 0.0576 * 0.76 * 2).epsilon(1e-14));
    CHECK(p.h == Approx(r * (t * t + r * r) - 2 * r * r * t).epsilon(1e-14));

    CHECK_THROWS_AS(BeamSplitterModel(0.0), std::invalid_argument);
    CHECK_THROWS_AS(BeamSplitterModel(1.0), std::invalid_argument);
}

TEST_CASE("probabilities stay in range and never exceed one", "[model][property]")
{
    for (int i = 1; i < 100; ++i) {
        const BeamSplitterModel bs(i / 100.0);
        for (int j = 0; j < 64; ++j) {
            const auto p = beam_probabilities(bs, kTwoPi * j / 64.0);
            REQUIRE(p.o >= -1e-15);
            REQUIRE(p.h >= -1e-15);
            REQUIRE(p.o + p.h <= 1.0 + 1e-15);
        }
    }
}

TEST_CASE("visibility", "[model]")
{
    for (int i = 1; i <= 9; ++i) {
        const BeamSplitterModel bs(i / 10.0);
        CHECK(visibility([&](double chi) { return beam_probabilities(bs, chi).o; }) == Approx(1.0).margin(1e-12));
    }
    CHECK(visibility([](double) { return 3.0; }) == 0.0);
    CHECK(visibility([](double chi) { return 2780.0 * (1.0 + 0.74 * std::cos(chi)); }) == Approx(0.74).epsilon(1e-9));
    CHECK_THROWS_AS(visibility([](double) { return 0.0; }), std::domain_error);
}

TEST_CASE("count model", "[model]")
{
    FringeParams fp;
    fp.a_o = 2781;
    fp.b_o = 0.74;
    fp.omega_o = 0.60;
    fp.chi_o = -2.75;
    // X where Omega X + chi = 0.
    const double x_max = 2.75 / 0.60;
    CHECK(count_model(fp, x_max).o == Approx(2781 * 1.74).epsilon(1e-12));

    fp.b_o = 0.0;
    for (int x = 1; x <= 33; ++x) {
        CHECK(count_model(fp, x).o == 2781.0);
    }

    // Equal fringe amplitudes in antiphase: the total does not depend on X.
    FringeParams sym;
    sym.a_o = 2780;
    sym.b_o = 0.74;
    sym.a_h = 4950;
    sym.b_h = 2780 * 0.74 / 4950;
    sym.chi_h = sym.chi_o + pi;
    sym.omega_h = sym.omega_o;
    for (int x = 1; x <= 33; ++x) {
        const auto n = count_model(sym, x);
        CHECK(n.o + n.h == Approx(7730.0).epsilon(1e-12));
    }
}

TEST_CASE("relative frequencies sum to one", "[model][property]")
{
    RandomStream rng(3, 0, StreamPurpose::test);
    for (int i = 0; i < 1000; ++i) {
        FringeParams fp;
        fp.a_o = rng.uniform(1.0, 5000.0);
        fp.a_h = rng.uniform(fp.a_o, 10000.0);
        fp.b_o = rng.uniform();
        fp.chi_o = rng.uniform(-pi, pi);
        const auto p = relative_frequencies(fp, rng.uniform(0.0, 40.0));
        REQUIRE(std::abs(p.o + p.h - 1.0) < 1e-12);
    }
    FringeParams fp;
    fp.chi_o = pi / 2 - fp.omega_o; // cos = 0 at X = 1
    CHECK(relative_frequencies(fp, 1.0).o == Approx(2780.0 / 7730.0).epsilon(1e-12));
    CHECK(2780.0 / 7730.0 == Approx(0.36).margin(0.005));
    fp.chi_o = -fp.omega_o; // cos = 1 at X = 1
    CHECK(relative_frequencies(fp, 1.0).o == Approx(2780.0 / 7730.0 * 1.74).epsilon(1e-12));
    fp.b_o = 1.0;
    fp.a_o = 6000;
    fp.a_h = 4000;
    CHECK_THROWS_AS(relative_frequencies(fp, 1.0), std::invalid_argument);
}

TEST_CASE("reflectivity from the mean-count ratio", "[model]")
{
    const auto roots = reflectivity_from_ratio(1.78);
    CHECK(roots.plus == Approx(0.76).margin(0.01));
    CHECK(roots.minus == Approx(0.24).margin(0.01));
    const auto one = reflectivity_from_ratio(1.0);
    CHECK(one.plus == 0.5);
    CHECK(one.minus == 0.5);
    for (double alpha : {1.0, 1.2, 1.78, 3.0, 10.0, 1e3}) {
        const auto r = reflectivity_from_ratio(alpha);
        CHECK(ratio_from_reflectivity(r.plus) == Approx(alpha).epsilon(1e-10));
        CHECK(ratio_from_reflectivity(r.minus) == Approx(alpha).epsilon(1e-10));
    }
    // alpha = 3: sqrt(1/2).
    CHECK(reflectivity_from_ratio(3.0).plus == Approx((1.0 + std::sqrt(0.5)) / 2.0).epsilon(1e-15));
    CHECK_THROWS_AS(reflectivity_from_ratio(0.9), std::domain_error);
}

TEST_CASE("instantaneous phase", "[model]")
{
    FringeParams fp;
    OscillationParams op;
    CHECK(instantaneous_phase(fp, op, 7, 3.3, 0.0) == Approx(fp.omega_o * 7 + fp.chi_o).epsilon(1e-15));
    op.amplitude = 0.2;
    CHECK(op.period() == Approx(2.8).epsilon(1e-15));
    CHECK(instantaneous_phase(fp, op, 7, 0.7, 0.0) == Approx(fp.omega_o * 7 + fp.chi_o + 0.2).epsilon(1e-14));
    CHECK(instantaneous_phase(fp, op, 7, 0.0, 0.05) == Approx(fp.omega_o * 7 + fp.chi_o + 0.05).epsilon(1e-14));
    RandomStream rng(4, 0, StreamPurpose::test);
    for (int i = 0; i < 200; ++i) {
        const double t = rng.uniform(0.0, 10.0);
        const double x = rng.uniform(1.0, 33.0);
        REQUIRE(std::abs(instantaneous_phase(fp, op, x, t, 0.0) - instantaneous_phase(fp, op, x, t + op.period(), 0.0)) <
                1e-12);
    }
}

TEST_CASE("phase wrapping", "[model]")
{
    CHECK(wrap_phase(pi) == Approx(pi));
    CHECK(wrap_phase(-pi) == Approx(pi));
    CHECK(wrap_phase(3 * pi / 2) == Approx(-pi / 2));
    CHECK(wrap_phase(0.3 + 10 * kTwoPi) == Approx(0.3));
}
