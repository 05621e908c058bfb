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
 * @file simulator.hpp
 * Synthetic experiments in the stamp-file protocol.
 *
 * A run is a reset move followed by n_settings (dwell, move) pairs, the last
 * move replaced by nothing:
 *
 *     [reset][X=1 dwell][move][X=2 dwell] ... [move][X=n dwell]
 *
 * Neutrons arrive as one Poisson stream per run. Each arrival is routed to a
 * detector either by drawing the label from the instantaneous probabilities
 * (collapse model) or by passing it through a network of adaptive beam
 * splitters (event-based model). Runs share nothing but the seed, so they
 * can be generated in any order or in parallel.
 */

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "stampcorr/config.hpp"
#include "stampcorr/error.hpp"
#include "stampcorr/io.hpp"
#include "stampcorr/quantum_model.hpp"
#include "stampcorr/rng.hpp"
#include "stampcorr/timeline.hpp"

namespace stampcorr {

enum class SimulationModel { collapse, des };
enum class EpsilonMode { per_event, per_segment };

struct ProtocolConfig {
    int n_runs = 37;
    int n_settings = 33;
    double dwell = 10.0;          ///< s
    double move_duration = 8.427; ///< s; 33 (dwell + move) = 608.1 s per run
    double arrival_rate = 1.0 / 1.3e-3; ///< detected events per second
    std::uint64_t seed = 1;
    SimulationModel model = SimulationModel::collapse;
    FringeParams fp{};
    OscillationParams op{};
    double reflectivity = 0.24; ///< event-based model only
    double gamma = 0.6;         ///< event-based model only
    EpsilonMode eps_mode = EpsilonMode::per_event;
    bool randomize_t0 = false; ///< draw t0 per dwell, uniform over one oscillation period
    double chi_drift = 0.0;    ///< rad added to the phase per run

    double run_duration() const noexcept { return n_settings * (dwell + move_duration); }

    void validate() const
    {
        if (n_runs < 1 || n_settings < 1) {
            throw ConfigError("n_runs and n_settings must be at least 1");
        }
        if (!(dwell > 0.0 && move_duration > 0.0)) {
            throw ConfigError("dwell and move_duration must be positive");
        }
        if (!(arrival_rate > 0.0)) {
            throw ConfigError("arrival_rate must be positive");
        }
        if (!(gamma > 0.0 && gamma <= 1.0)) {
            throw ConfigError("gamma must lie in (0, 1]");
        }
        if (!(reflectivity > 0.0 && reflectivity < 1.0)) {
            throw ConfigError("reflectivity must lie in (0, 1)");
        }
        try {
            fp.validate();
            op.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    }
};

inline void store(KeyValueConfig& config, const ProtocolConfig& cfg)
{
    config.set("model", std::string(cfg.model == SimulationModel::collapse ? "collapse" : "des"));
    config.set("n_runs", cfg.n_runs);
    config.set("n_settings", cfg.n_settings);
    config.set("dwell", cfg.dwell);
    config.set("move_duration", cfg.move_duration);
    config.set("arrival_rate", cfg.arrival_rate);
    config.set("seed", cfg.seed);
    store(config, cfg.fp);
    store(config, cfg.op);
    config.set("reflectivity", cfg.reflectivity);
    config.set("gamma", cfg.gamma);
    config.set("eps_mode", std::string(cfg.eps_mode == EpsilonMode::per_event ? "per_event" : "per_segment"));
    config.set("randomize_t0", cfg.randomize_t0);
    config.set("chi_drift", cfg.chi_drift);
}

inline ProtocolConfig load_protocol(const KeyValueConfig& config)
{
    ProtocolConfig cfg;
    if (const auto model = config.get_string("model")) {
        if (*model == "collapse") {
            cfg.model = SimulationModel::collapse;
        } else if (*model == "des") {
            cfg.model = SimulationModel::des;
        } else {
            throw ConfigError("model must be 'collapse' or 'des', got '" + *model + "'", config.line_of("model"));
        }
    }
    cfg.n_runs = static_cast<int>(config.get_int("n_runs", cfg.n_runs));
    cfg.n_settings = static_cast<int>(config.get_int("n_settings", cfg.n_settings));
    cfg.dwell = config.get_double("dwell", cfg.dwell);
    cfg.move_duration = config.get_double("move_duration", cfg.move_duration);
    cfg.arrival_rate = config.get_double("arrival_rate", cfg.arrival_rate);
    cfg.seed = config.get_uint64("seed", cfg.seed);
    cfg.fp = load_fringe(config, cfg.fp);
    cfg.op = load_oscillation(config, cfg.op);
    cfg.reflectivity = config.get_double("reflectivity", cfg.reflectivity);
    cfg.gamma = config.get_double("gamma", cfg.gamma);
    if (const auto mode = config.get_string("eps_mode")) {
        if (*mode == "per_event") {
            cfg.eps_mode = EpsilonMode::per_event;
        } else if (*mode == "per_segment") {
            cfg.eps_mode = EpsilonMode::per_segment;
        } else {
            throw ConfigError("eps_mode must be 'per_event' or 'per_segment', got '" + *mode + "'",
                              config.line_of("eps_mode"));
        }
    }
    cfg.randomize_t0 = config.get_bool("randomize_t0", cfg.randomize_t0);
    cfg.chi_drift = config.get_double("chi_drift", cfg.chi_drift);
    cfg.validate();
    return cfg;
}

// --- arrivals and the collapse model -----------------------------------------

/// Poisson arrival times in [0, duration).
inline std::vector<double> generate_arrivals(double rate, double duration, RandomStream& rng)
{
    if (!(rate > 0.0)) {
        throw std::invalid_argument("arrival rate must be positive");
    }
    std::vector<double> out;
    if (!(duration > 0.0)) {
        return out;
    }
    out.reserve(static_cast<std::size_t>(rate * duration * 1.05) + 16);
    double t = rng.exponential(rate);
    while (t < duration) {
        out.push_back(t);
        t += rng.exponential(rate);
    }
    return out;
}

/// Detector label for one neutron at total phase `phase`.
inline Beam collapse_event(const FringeParams& fp, double phase, RandomStream& rng)
{
    return rng.uniform() < probabilities_at_phase(fp, phase).o ? Beam::O : Beam::H;
}

// --- event-based adaptive splitters ------------------------------------------

/// Beam splitter with memory. Input port usage is learned as
/// x <- gamma x + (1 - gamma) e_port, and the last message seen on each port
/// is kept. The outputs are the unitary image of (sqrt(x0) m0, sqrt(x1) m1);
/// the particle leaves through port j with probability |out_j|^2.
class AdaptiveSplitter {
public:
    struct Output {
        int port = 0;
        std::complex<double> message{1.0, 0.0};
    };

    AdaptiveSplitter(double reflectivity, double gamma)
        : t_(std::sqrt(1.0 - reflectivity)), r_(std::sqrt(reflectivity)), gamma_(gamma)
    {
    }

    Output process(int in_port, std::complex<double> message, double u)
    {
        x_[0] *= gamma_;
        x_[1] *= gamma_;
        x_[in_port] += 1.0 - gamma_;
        messages_[in_port] = message;
        const std::complex<double> a0 = std::sqrt(x_[0]) * messages_[0];
        const std::complex<double> a1 = std::sqrt(x_[1]) * messages_[1];
        const std::complex<double> i(0.0, 1.0);
        const std::array<std::complex<double>, 2> out{t_ * a0 + i * r_ * a1, i * r_ * a0 + t_ * a1};
        const double p0 = std::norm(out[0]) / (std::norm(out[0]) + std::norm(out[1]));
        const int port = u < p0 ? 0 : 1;
        const double mag = std::abs(out[port]);
        return {port, mag > 0.0 ? out[port] / mag : std::complex<double>(1.0, 0.0)};
    }

    const std::array<double, 2>& state() const noexcept { return x_; }

private:
    double t_;
    double r_;
    double gamma_;
    std::array<double, 2> x_{1.0, 0.0};
    std::array<std::complex<double>, 2> messages_{std::complex<double>(1.0, 0.0), std::complex<double>(1.0, 0.0)};
};

/// Four adaptive splitters in the two-path layout. Path A (transmitted at
/// the first plate) carries the phase shifter. Particles transmitted at the
/// middle plates leave the interferometer undetected.
class SplitterNetwork {
public:
    SplitterNetwork(double reflectivity, double gamma)
        : bs_{AdaptiveSplitter(reflectivity, gamma), AdaptiveSplitter(reflectivity, gamma),
              AdaptiveSplitter(reflectivity, gamma), AdaptiveSplitter(reflectivity, gamma)}
    {
    }

    /// Routes one neutron; empty when it is lost at a middle plate.
    std::optional<Beam> process(double phase, RandomStream& rng)
    {
        const auto first = bs_[0].process(0, {1.0, 0.0}, rng.uniform());
        AdaptiveSplitter& middle = first.port == 0 ? bs_[1] : bs_[2];
        const auto second = middle.process(0, first.message, rng.uniform());
        if (second.port == 0) {
            return std::nullopt;
        }
        std::complex<double> message = second.message;
        const int in_port = first.port == 0 ? 0 : 1;
        if (in_port == 0) {
            message *= std::polar(1.0, phase);
        }
        const auto last = bs_[3].process(in_port, message, rng.uniform());
        return last.port == 1 ? Beam::O : Beam::H;
    }

    const AdaptiveSplitter& splitter(int index) const { return bs_.at(static_cast<std::size_t>(index)); }

private:
    std::array<AdaptiveSplitter, 4> bs_;
};

// --- protocol ------------------------------------------------------------------

struct SegmentTruth {
    int setting = 0;
    std::int64_t first_tick = 0; ///< first tick of the dwell window
    std::int64_t last_tick = 0;  ///< last tick of the dwell window
    double phase = 0.0;          ///< Omega_O X + chi_O (+ drift), without fluctuations
    double eps = 0.0;            ///< the segment's phase shift in per-segment mode
    double t0 = 0.0;
};

struct SimulatedRun {
    int run = 0;
    std::vector<TimeStamp> o;
    std::vector<TimeStamp> h;
    std::vector<SegmentTruth> truth;
    std::size_t arrivals = 0;
    std::size_t lost = 0;
    std::size_t bumped = 0; ///< same-detector stamps moved to the next free tick
};

inline std::int64_t tick_of(double seconds) noexcept
{
    return 1 + static_cast<std::int64_t>(std::floor(seconds / kTickSeconds));
}

/// One run, 1-based. Depends only on (cfg, run).
inline SimulatedRun simulate_run(const ProtocolConfig& cfg, int run)
{
    cfg.validate();
    SimulatedRun out;
    out.run = run;
    const auto stream_run = static_cast<std::uint32_t>(run);
    RandomStream arrivals_rng(cfg.seed, stream_run, StreamPurpose::arrivals);
    RandomStream labels_rng(cfg.seed, stream_run, StreamPurpose::labels);
    RandomStream noise_rng(cfg.seed, stream_run, StreamPurpose::phase_noise);
    RandomStream offset_rng(cfg.seed, stream_run, StreamPurpose::time_offset);
    RandomStream routing_rng(cfg.seed, stream_run, StreamPurpose::routing);

    const double slot = cfg.dwell + cfg.move_duration;
    const double run_start = (run - 1) * cfg.run_duration();
    const double chi_shift = cfg.chi_drift * (run - 1);
    FringeParams fp = cfg.fp;
    fp.chi_o += chi_shift;

    for (int j = 0; j < cfg.n_settings; ++j) {
        SegmentTruth truth;
        truth.setting = j + 1;
        const double begin = run_start + j * slot + cfg.move_duration;
        truth.first_tick = tick_of(begin);
        truth.last_tick = tick_of(begin + cfg.dwell) - 1;
        truth.phase = fp.omega_o * truth.setting + fp.chi_o;
        if (cfg.eps_mode == EpsilonMode::per_segment) {
            truth.eps = noise_rng.uniform(-cfg.fp.eps0, cfg.fp.eps0);
        }
        truth.t0 = cfg.randomize_t0 ? offset_rng.uniform(0.0, cfg.op.period()) : cfg.op.t0;
        out.truth.push_back(truth);
    }

    const double incident_rate =
        cfg.model == SimulationModel::des ? cfg.arrival_rate / cfg.reflectivity : cfg.arrival_rate;
    const auto times = generate_arrivals(incident_rate, cfg.run_duration(), arrivals_rng);
    out.arrivals = times.size();
    out.o.reserve(times.size());
    out.h.reserve(times.size());

    SplitterNetwork network(cfg.reflectivity, cfg.gamma);
    OscillationParams op = cfg.op;
    std::int64_t last_o = 0;
    std::int64_t last_h = 0;
    for (const double t : times) {
        const int j = std::min(static_cast<int>(t / slot), cfg.n_settings - 1);
        const double into = t - j * slot;
        const bool moving = into < cfg.move_duration;
        double setting = 0.0;
        double eps = 0.0;
        double since = 0.0;
        if (moving) {
            // The shifter sweeps linearly from the previous setting; the
            // reset move comes back from the last one.
            const double from = j == 0 ? cfg.n_settings : j;
            setting = from + (j + 1 - from) * (into / cfg.move_duration);
            since = into;
            op.t0 = cfg.op.t0;
        } else {
            setting = j + 1;
            since = into - cfg.move_duration;
            op.t0 = out.truth[static_cast<std::size_t>(j)].t0;
        }
        if (cfg.eps_mode == EpsilonMode::per_segment && !moving) {
            eps = out.truth[static_cast<std::size_t>(j)].eps;
        } else if (cfg.fp.eps0 > 0.0) {
            eps = noise_rng.uniform(-cfg.fp.eps0, cfg.fp.eps0);
        }
        const double phase = instantaneous_phase(fp, op, setting, since, eps);

        Beam beam;
        if (cfg.model == SimulationModel::collapse) {
            beam = collapse_event(fp, phase, labels_rng);
        } else {
            const auto routed = network.process(phase, routing_rng);
            if (!routed) {
                ++out.lost;
                continue;
            }
            beam = *routed;
        }
        std::int64_t tick = tick_of(run_start + t);
        std::int64_t& last = beam == Beam::O ? last_o : last_h;
        if (tick <= last) {
            tick = last + 1;
            ++out.bumped;
        }
        last = tick;
        (beam == Beam::O ? out.o : out.h).emplace_back(moving ? -tick : tick);
    }
    return out;
}

inline std::string stamp_file_name(int run, Beam beam)
{
    char name[32];
    std::snprintf(name, sizeof name, "run%03d%c.stamp", run, beam == Beam::O ? 'O' : 'H');
    return name;
}

inline constexpr const char* kManifestName = "manifest.cfg";

inline void add_run_to_manifest(KeyValueConfig& manifest, const SimulatedRun& run)
{
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "run%03d", run.run);
    const std::string p(prefix);
    manifest.set(p + ".events_o", static_cast<long long>(run.o.size()));
    manifest.set(p + ".events_h", static_cast<long long>(run.h.size()));
    manifest.set(p + ".arrivals", static_cast<long long>(run.arrivals));
    manifest.set(p + ".lost", static_cast<long long>(run.lost));
    for (const auto& s : run.truth) {
        char seg[48];
        std::snprintf(seg, sizeof seg, "%s.x%02d", prefix, s.setting);
        const std::string q(seg);
        manifest.set(q + ".first_tick", static_cast<long long>(s.first_tick));
        manifest.set(q + ".last_tick", static_cast<long long>(s.last_tick));
        manifest.set(q + ".phase", s.phase);
        manifest.set(q + ".eps", s.eps);
        manifest.set(q + ".t0", s.t0);
    }
}

struct ProtocolSummary {
    int runs = 0;
    std::size_t events = 0;
    std::size_t stationary_events = 0;
    std::size_t lost = 0;
};

/// Writes `n_runs` stamp-file pairs and the manifest into `out_dir`.
/// Runs are generated one at a time so memory stays at one run.
inline ProtocolSummary run_protocol(const ProtocolConfig& cfg, const std::filesystem::path& out_dir)
{
    cfg.validate();
    ensure_directory(out_dir);
    KeyValueConfig manifest;
    store(manifest, cfg);
    ProtocolSummary summary;
    for (int run = 1; run <= cfg.n_runs; ++run) {
        const auto sim = simulate_run(cfg, run);
        write_stamp_file(out_dir / stamp_file_name(run, Beam::O), sim.o);
        write_stamp_file(out_dir / stamp_file_name(run, Beam::H), sim.h);
        add_run_to_manifest(manifest, sim);
        ++summary.runs;
        summary.events += sim.o.size() + sim.h.size();
        summary.lost += sim.lost;
        for (const auto* stream : {&sim.o, &sim.h}) {
            for (const auto& s : *stream) {
                summary.stationary_events += s.moving() ? 0 : 1;
            }
        }
    }
    write_file_atomically(out_dir / kManifestName, [&](std::ostream& os) { manifest.write(os); });
    return summary;
}

} // namespace stampcorr
