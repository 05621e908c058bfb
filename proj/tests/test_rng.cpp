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
#include <set>
#include <vector>

#include "stampcorr/rng.hpp"

using namespace stampcorr;

// Known-answer vectors published with the Random123 reference implementation.
TEST_CASE("Philox4x32-10 known answers", "[rng]")
{
    using C = Philox4x32::Counter;
    using K = Philox4x32::Key;
    CHECK(Philox4x32::apply(C{0, 0, 0, 0}, K{0, 0}) == C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(Philox4x32::apply(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, K{0xffffffffu, 0xffffffffu}) ==
          C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(Philox4x32::apply(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, K{0xa4093822u, 0x299f31d0u}) ==
          C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and independent", "[rng]")
{
    RandomStream a(42, 3, StreamPurpose::labels);
    RandomStream b(42, 3, StreamPurpose::labels);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(a() == b());
    }
    std::set<std::uint64_t> firsts;
    for (std::uint32_t run = 1; run <= 4; ++run) {
        for (auto p : {StreamPurpose::arrivals, StreamPurpose::labels, StreamPurpose::phase_noise}) {
            firsts.insert(RandomStream(42, run, p)());
        }
    }
    firsts.insert(RandomStream(43, 1, StreamPurpose::arrivals)());
    CHECK(firsts.size() == 13);
}

TEST_CASE("stream output is the Philox block split into two words", "[rng]")
{
    RandomStream s(0x0000000500000007ull, 9, StreamPurpose::test);
    const auto out = Philox4x32::apply({0, 0, 9, 99}, {7, 5});
    CHECK(s() == ((std::uint64_t{out[1]} << 32) | out[0]));
    CHECK(s() == ((std::uint64_t{out[3]} << 32) | out[2]));
    CHECK(s.blocks_used() == 1);
}

TEST_CASE("uniform and exponential moments", "[rng]")
{
    RandomStream s(1, 1, StreamPurpose::test);
    const int n = 200000;
    double sum = 0.0;
    double sum2 = 0.0;
    double lo = 1.0;
    double hi = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = s.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
        sum2 += u * u;
    }
    // Mean 1/2 with sd sqrt(1/12/n); 5 sigma.
    CHECK(std::abs(sum / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(std::abs(sum2 / n - 1.0 / 3.0) < 0.005);

    const double rate = 769.0;
    double esum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = s.exponential(rate);
        REQUIRE(x >= 0.0);
        esum += x;
    }
    CHECK(std::abs(esum / n * rate - 1.0) < 5.0 / std::sqrt(n));
}
