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
 * @file timeline.hpp
 * Event data model for time-stamped detector streams.
 *
 * A stamp file holds one signed decimal integer per line (LF-terminated, no
 * header). The magnitude is the clock reading in 25 us ticks; a negative sign
 * marks a detection while the phase shifter was moving. Two files (O and H
 * detector) make up one run. This header parses and writes that format,
 * merges the two streams into one labelled series (dropping O/H pairs that
 * share a tick), and cuts a run into its stationary setting segments.
 *
 * Times stay integer ticks throughout; conversion to seconds happens only
 * where an analysis needs it.
 */

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stampcorr/error.hpp"
#include "stampcorr/io.hpp"

namespace stampcorr {

inline constexpr double kTickSeconds = 25e-6;

class TimeStamp {
public:
    explicit TimeStamp(std::int64_t ticks) : ticks_(ticks)
    {
        if (ticks == 0) {
            throw DataError("time stamp 0 is not representable (sign encodes the moving flag)");
        }
    }

    std::int64_t ticks() const noexcept { return ticks_; }
    std::int64_t magnitude() const noexcept { return ticks_ < 0 ? -ticks_ : ticks_; }
    bool moving() const noexcept { return ticks_ < 0; }
    double seconds() const noexcept { return static_cast<double>(magnitude()) * kTickSeconds; }

    friend bool operator==(TimeStamp, TimeStamp) = default;

private:
    std::int64_t ticks_;
};

/// Detector that fired. The numeric value is the event label x.
enum class Beam : std::int8_t { O = -1, H = +1 };

inline constexpr int label_of(Beam beam) noexcept { return static_cast<int>(beam); }

enum class EventFilter { O, H, OH };

inline bool passes(EventFilter filter, Beam beam) noexcept
{
    switch (filter) {
    case EventFilter::O:
        return beam == Beam::O;
    case EventFilter::H:
        return beam == Beam::H;
    case EventFilter::OH:
        return true;
    }
    return false;
}

inline std::string_view to_string(EventFilter filter) noexcept
{
    switch (filter) {
    case EventFilter::O:
        return "O";
    case EventFilter::H:
        return "H";
    case EventFilter::OH:
        return "OH";
    }
    return "?";
}

struct DetectionEvent {
    TimeStamp time;
    Beam beam;

    int label() const noexcept { return label_of(beam); }
    friend bool operator==(const DetectionEvent&, const DetectionEvent&) = default;
};

/// Stationary counting window for one phase-shifter setting.
struct SettingSegment {
    int setting = 0;
    std::vector<DetectionEvent> events;
    double dwell_seconds = 10.0;

    std::size_t count(Beam beam) const noexcept
    {
        return static_cast<std::size_t>(
            std::count_if(events.begin(), events.end(), [beam](const DetectionEvent& e) { return e.beam == beam; }));
    }
};

struct RunRecord {
    int run = 0;
    std::vector<SettingSegment> segments;
    std::size_t discarded_collisions = 0; ///< events removed, always even
    std::size_t moving_events = 0;

    /// Clock reading (s) of the first stationary event, used to place runs in real time.
    double start_seconds() const noexcept
    {
        for (const auto& s : segments) {
            if (!s.events.empty()) {
                return s.events.front().time.seconds();
            }
        }
        return 0.0;
    }

    std::size_t stationary_events() const noexcept
    {
        std::size_t n = 0;
        for (const auto& s : segments) {
            n += s.events.size();
        }
        return n;
    }
};

// --- stamp files -----------------------------------------------------------

inline void check_monotone(std::span<const TimeStamp> stamps, std::string_view what)
{
    for (std::size_t i = 1; i < stamps.size(); ++i) {
        if (stamps[i].magnitude() <= stamps[i - 1].magnitude()) {
            throw DataError(std::string(what) + ": time stamps not strictly increasing at entry " +
                            std::to_string(i + 1));
        }
    }
}

/// Reads stamps from a stream; `source` names it in error messages.
inline std::vector<TimeStamp> parse_stamps(std::istream& in, std::string_view source = "<stream>")
{
    std::vector<TimeStamp> stamps;
    std::string line;
    int line_no = 0;
    std::int64_t previous = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view text(line);
        while (!text.empty() && (text.back() == '\r' || text.back() == ' ' || text.back() == '\t')) {
            text.remove_suffix(1);
        }
        while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) {
            text.remove_prefix(1);
        }
        if (text.empty()) {
            continue;
        }
        const auto fail = [&](const std::string& why) {
            return DataError(std::string(source) + ":" + std::to_string(line_no) + ": " + why);
        };
        bool negative = false;
        if (text.front() == '+' || text.front() == '-') {
            negative = text.front() == '-';
            text.remove_prefix(1);
        }
        std::int64_t magnitude = 0;
        const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), magnitude);
        if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
            throw fail("malformed time stamp '" + line + "'");
        }
        if (magnitude == 0) {
            throw fail("zero time stamp");
        }
        if (magnitude <= previous) {
            throw fail("time stamps not strictly increasing");
        }
        previous = magnitude;
        stamps.emplace_back(negative ? -magnitude : magnitude);
    }
    if (in.bad()) {
        throw IoError(std::string(source) + ": read error");
    }
    return stamps;
}

inline std::vector<TimeStamp> parse_stamp_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open stamp file " + path.string());
    }
    return parse_stamps(in, path.string());
}

/// Canonical form: explicit sign, decimal magnitude, LF.
inline void write_stamps(std::ostream& out, std::span<const TimeStamp> stamps)
{
    char buf[24];
    for (const auto& s : stamps) {
        buf[0] = s.moving() ? '-' : '+';
        const auto [end, ec] = std::to_chars(buf + 1, buf + sizeof buf - 1, s.magnitude());
        *end = '\n';
        out.write(buf, end - buf + 1);
    }
}

inline void write_stamp_file(const std::filesystem::path& path, std::span<const TimeStamp> stamps)
{
    write_file_atomically(path, [&](std::ostream& out) { write_stamps(out, stamps); });
}

// --- merging and segmentation ----------------------------------------------

struct MergeResult {
    std::vector<DetectionEvent> events;
    std::size_t discarded = 0;
};

/// Merges the O and H detector streams by clock time. Stamps with the same
/// clock reading in both streams are dropped together and counted.
inline MergeResult merge_streams(std::span<const TimeStamp> o, std::span<const TimeStamp> h)
{
    check_monotone(o, "O stream");
    check_monotone(h, "H stream");
    MergeResult result;
    result.events.reserve(o.size() + h.size());
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < o.size() && j < h.size()) {
        const auto mo = o[i].magnitude();
        const auto mh = h[j].magnitude();
        if (mo == mh) {
            result.discarded += 2;
            ++i;
            ++j;
        } else if (mo < mh) {
            result.events.push_back({o[i++], Beam::O});
        } else {
            result.events.push_back({h[j++], Beam::H});
        }
    }
    for (; i < o.size(); ++i) {
        result.events.push_back({o[i], Beam::O});
    }
    for (; j < h.size(); ++j) {
        result.events.push_back({h[j], Beam::H});
    }
    return result;
}

struct SegmentationOptions {
    int settings = 33;
    double dwell_seconds = 10.0;
    double dwell_tolerance = 0.01; ///< fraction of the dwell
};

/// Cuts a merged run into stationary segments: the k-th block of positive
/// stamps becomes setting k; moving (negative) events are dropped and counted.
inline RunRecord segment_by_setting(std::span<const DetectionEvent> events, const SegmentationOptions& options,
                                    int run_index = 1, std::size_t discarded_collisions = 0)
{
    RunRecord record;
    record.run = run_index;
    record.discarded_collisions = discarded_collisions;
    const double max_span_ticks = options.dwell_seconds * (1.0 + options.dwell_tolerance) / kTickSeconds;
    bool in_block = false;
    for (const auto& e : events) {
        if (e.time.moving()) {
            ++record.moving_events;
            in_block = false;
            continue;
        }
        if (!in_block) {
            in_block = true;
            if (static_cast<int>(record.segments.size()) == options.settings) {
                throw DataError("segment count mismatch: more than " + std::to_string(options.settings) +
                                " stationary blocks in run " + std::to_string(run_index));
            }
            SettingSegment segment;
            segment.setting = static_cast<int>(record.segments.size()) + 1;
            segment.dwell_seconds = options.dwell_seconds;
            record.segments.push_back(std::move(segment));
        }
        auto& current = record.segments.back();
        if (!current.events.empty() &&
            static_cast<double>(e.time.magnitude() - current.events.front().time.magnitude()) > max_span_ticks) {
            throw DataError("setting " + std::to_string(current.setting) + " of run " + std::to_string(run_index) +
                            " spans more than the dwell time");
        }
        current.events.push_back(e);
    }
    if (static_cast<int>(record.segments.size()) != options.settings) {
        throw DataError("segment count mismatch: found " + std::to_string(record.segments.size()) +
                        " stationary blocks in run " + std::to_string(run_index) + ", expected " +
                        std::to_string(options.settings));
    }
    return record;
}

/// Consecutive differences (ticks) of the events passing `filter`.
inline std::vector<std::int64_t> tick_differences(const SettingSegment& segment, EventFilter filter)
{
    std::vector<std::int64_t> out;
    std::int64_t previous = 0;
    bool have_previous = false;
    for (const auto& e : segment.events) {
        if (!passes(filter, e.beam)) {
            continue;
        }
        if (have_previous) {
            out.push_back(e.time.magnitude() - previous);
        }
        previous = e.time.magnitude();
        have_previous = true;
    }
    if (!have_previous || out.empty()) {
        throw DataError("setting " + std::to_string(segment.setting) + ": fewer than 2 " +
                        std::string(to_string(filter)) + " events");
    }
    return out;
}

/// Consecutive time differences (s) of the events passing `filter`.
inline std::vector<double> time_differences(const SettingSegment& segment, EventFilter filter)
{
    const auto ticks = tick_differences(segment, filter);
    std::vector<double> out(ticks.size());
    std::transform(ticks.begin(), ticks.end(), out.begin(),
                   [](std::int64_t t) { return static_cast<double>(t) * kTickSeconds; });
    return out;
}

/// The label sequence x_i of a segment (-1 for O, +1 for H).
inline std::vector<int> labels(const SettingSegment& segment)
{
    std::vector<int> out(segment.events.size());
    std::transform(segment.events.begin(), segment.events.end(), out.begin(),
                   [](const DetectionEvent& e) { return e.label(); });
    return out;
}

/// CSV of a merged series: tick, seconds, label, moving_flag, setting.
/// Moving events carry setting 0; stationary blocks are numbered from 1.
inline void write_merged_csv(std::ostream& out, std::span<const DetectionEvent> events)
{
    out << "tick,seconds,label,moving_flag,setting\n";
    int setting = 0;
    bool in_block = false;
    char seconds[32];
    for (const auto& e : events) {
        const bool moving = e.time.moving();
        if (!moving && !in_block) {
            ++setting;
        }
        in_block = !moving;
        std::snprintf(seconds, sizeof seconds, "%.6f", e.time.seconds());
        out << e.time.ticks() << ',' << seconds << ',' << e.label() << ',' << (moving ? 1 : 0) << ','
            << (moving ? 0 : setting) << '\n';
    }
}

} // namespace stampcorr
