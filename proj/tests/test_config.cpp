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

#include <sstream>

#include "stampcorr/config.hpp"
#include "stampcorr/simulator.hpp"

using namespace stampcorr;

namespace {

KeyValueConfig parse(const std::string& text)
{
    std::istringstream in(text);
    return KeyValueConfig::parse(in);
}

} // namespace

TEST_CASE("key = value parsing", "[config]")
{
    const auto kv = parse("# comment\n a = 1.5 \n\nname=collapse # trailing\nflag = yes\nn = -3\n");
    CHECK(kv.get_double("a", 0.0) == 1.5);
    CHECK(kv.get_string("name") == std::optional<std::string>("collapse"));
    CHECK(kv.get_bool("flag", false));
    CHECK(kv.get_int("n", 0) == -3);
    CHECK(kv.get_double("missing", 7.0) == 7.0);
    CHECK(kv.line_of("name") == 4);
    CHECK(kv.keys() == std::vector<std::string>{"a", "name", "flag", "n"});
}

TEST_CASE("config errors carry line numbers", "[config]")
{
    CHECK_THROWS_WITH(parse("a = 1\nbroken line\n"), Catch::Matchers::StartsWith("line 2:"));
    CHECK_THROWS_WITH(parse("a = 1\na = 2\n"), Catch::Matchers::ContainsSubstring("duplicate"));
    CHECK_THROWS_WITH(parse(" = 2\n"), Catch::Matchers::ContainsSubstring("missing key"));
    const auto kv = parse("x = 1\ny = abc\nz = 1.5\nw = maybe\n");
    CHECK_THROWS_WITH(kv.get_double("y", 0.0), Catch::Matchers::StartsWith("line 2:"));
    CHECK_THROWS_WITH(kv.get_int("z", 0), Catch::Matchers::StartsWith("line 3:"));
    CHECK_THROWS_WITH(kv.get_bool("w", false), Catch::Matchers::StartsWith("line 4:"));
    CHECK_THROWS_AS(kv.get_uint64("y", 0), ConfigError);
}

TEST_CASE("unused keys are rejected", "[config]")
{
    const auto kv = parse("n_runs = 3\ndwel = 5\n");
    const auto cfg = load_protocol(kv);
    CHECK(cfg.n_runs == 3);
    CHECK_THROWS_WITH(kv.reject_unused(), Catch::Matchers::ContainsSubstring("dwel"));
}

TEST_CASE("protocol config round trips through text", "[config]")
{
    ProtocolConfig cfg;
    cfg.model = SimulationModel::des;
    cfg.n_runs = 5;
    cfg.dwell = 0.1;
    cfg.arrival_rate = 100.0 / 3.0;
    cfg.seed = 0xfedcba9876543210ull;
    cfg.fp.chi_o = -2.7123456789;
    cfg.op.amplitude = 0.2;
    cfg.eps_mode = EpsilonMode::per_segment;
    cfg.randomize_t0 = true;
    cfg.chi_drift = 0.01;
    KeyValueConfig kv;
    store(kv, cfg);
    std::ostringstream out;
    kv.write(out);
    std::istringstream in(out.str());
    const auto back_kv = KeyValueConfig::parse(in);
    const auto back = load_protocol(back_kv);
    back_kv.reject_unused();
    CHECK(back.model == cfg.model);
    CHECK(back.n_runs == cfg.n_runs);
    CHECK(back.dwell == cfg.dwell);
    CHECK(back.arrival_rate == cfg.arrival_rate);
    CHECK(back.seed == cfg.seed);
    CHECK(back.fp.chi_o == cfg.fp.chi_o);
    CHECK(back.op.amplitude == cfg.op.amplitude);
    CHECK(back.op.omega == cfg.op.omega);
    CHECK(back.eps_mode == cfg.eps_mode);
    CHECK(back.randomize_t0);
    CHECK(back.chi_drift == cfg.chi_drift);
}

TEST_CASE("invalid protocol values are config errors", "[config]")
{
    CHECK_THROWS_AS(load_protocol(parse("gamma = 0\n")), ConfigError);
    CHECK_THROWS_AS(load_protocol(parse("gamma = 1.5\n")), ConfigError);
    CHECK_THROWS_AS(load_protocol(parse("arrival_rate = -1\n")), ConfigError);
    CHECK_THROWS_AS(load_protocol(parse("model = wave\n")), ConfigError);
    CHECK_THROWS_AS(load_protocol(parse("b_o = 1.2\n")), ConfigError);
    CHECK_THROWS_AS(load_protocol(parse("eps0 = -0.1\n")), ConfigError);
    CHECK_THROWS_AS(load_protocol(parse("osc_omega = 0\n")), ConfigError);
    CHECK_THROWS_AS(load_protocol(parse("dwell = 0\n")), ConfigError);
    CHECK_NOTHROW(load_protocol(parse("gamma = 1\n")));
}
