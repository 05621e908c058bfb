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

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "stampcorr/error.hpp"
#include "stampcorr/io.hpp"

namespace stampcorr {

/// Flat `key = value` text. `#` starts a comment; blank lines are ignored.
/// Keys keep their first-seen order so files written back are stable.
class KeyValueConfig {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    static KeyValueConfig parse(std::istream& in)
    {
        KeyValueConfig config;
        std::string raw;
        int line_no = 0;
        while (std::getline(in, raw)) {
            ++line_no;
            std::string_view text(raw);
            if (const auto hash = text.find('#'); hash != std::string_view::npos) {
                text = text.substr(0, hash);
            }
            text = trim(text);
            if (text.empty()) {
                continue;
            }
            const auto eq = text.find('=');
            if (eq == std::string_view::npos) {
                throw ConfigError("expected 'key = value', got '" + std::string(text) + "'", line_no);
            }
            const auto key = trim(text.substr(0, eq));
            const auto value = trim(text.substr(eq + 1));
            if (key.empty()) {
                throw ConfigError("missing key", line_no);
            }
            if (config.entries_.count(std::string(key)) != 0) {
                throw ConfigError("duplicate key '" + std::string(key) + "'", line_no);
            }
            config.set(std::string(key), std::string(value), line_no);
        }
        return config;
    }

    static KeyValueConfig load(const std::filesystem::path& path)
    {
        std::ifstream in(path);
        if (!in) {
            throw ConfigError("cannot open config file " + path.string());
        }
        return parse(in);
    }

    void set(const std::string& key, const std::string& value, int line = 0)
    {
        if (entries_.count(key) == 0) {
            order_.push_back(key);
        }
        entries_[key] = Entry{value, line};
    }

    void set(const std::string& key, double value) { set(key, format_double(value)); }
    void set(const std::string& key, long long value) { set(key, std::to_string(value)); }
    void set(const std::string& key, int value) { set(key, std::to_string(value)); }
    void set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }
    void set(const std::string& key, bool value) { set(key, std::string(value ? "true" : "false")); }

    bool contains(const std::string& key) const { return entries_.count(key) != 0; }

    const std::vector<std::string>& keys() const noexcept { return order_; }

    std::optional<std::string> get_string(const std::string& key) const
    {
        const auto it = entries_.find(key);
        if (it == entries_.end()) {
            return std::nullopt;
        }
        used_.insert(key);
        return it->second.value;
    }

    double get_double(const std::string& key, double fallback) const
    {
        const auto it = entries_.find(key);
        if (it == entries_.end()) {
            return fallback;
        }
        used_.insert(key);
        const auto& text = it->second.value;
        char* end = nullptr;
        const double value = std::strtod(text.c_str(), &end);
        if (text.empty() || end != text.c_str() + text.size()) {
            throw ConfigError("'" + key + "' expects a number, got '" + text + "'", it->second.line);
        }
        return value;
    }

    long long get_int(const std::string& key, long long fallback) const
    {
        const auto it = entries_.find(key);
        if (it == entries_.end()) {
            return fallback;
        }
        used_.insert(key);
        const auto& text = it->second.value;
        long long value = 0;
        const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || end != text.data() + text.size()) {
            throw ConfigError("'" + key + "' expects an integer, got '" + text + "'", it->second.line);
        }
        return value;
    }

    std::uint64_t get_uint64(const std::string& key, std::uint64_t fallback) const
    {
        const auto it = entries_.find(key);
        if (it == entries_.end()) {
            return fallback;
        }
        used_.insert(key);
        const auto& text = it->second.value;
        std::uint64_t value = 0;
        const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
        if (ec != std::errc{} || end != text.data() + text.size()) {
            throw ConfigError("'" + key + "' expects an unsigned integer, got '" + text + "'", it->second.line);
        }
        return value;
    }

    bool get_bool(const std::string& key, bool fallback) const
    {
        const auto it = entries_.find(key);
        if (it == entries_.end()) {
            return fallback;
        }
        used_.insert(key);
        const auto& text = it->second.value;
        if (text == "true" || text == "1" || text == "yes") {
            return true;
        }
        if (text == "false" || text == "0" || text == "no") {
            return false;
        }
        throw ConfigError("'" + key + "' expects true/false, got '" + text + "'", it->second.line);
    }

    int line_of(const std::string& key) const
    {
        const auto it = entries_.find(key);
        return it == entries_.end() ? 0 : it->second.line;
    }

    /// Throws on the first key no getter has asked for (typo guard).
    void reject_unused() const
    {
        for (const auto& key : order_) {
            if (used_.count(key) == 0) {
                throw ConfigError("unknown key '" + key + "'", line_of(key));
            }
        }
    }

    void write(std::ostream& out) const
    {
        for (const auto& key : order_) {
            out << key << " = " << entries_.at(key).value << '\n';
        }
    }

private:
    static std::string_view trim(std::string_view s)
    {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
            s.remove_prefix(1);
        }
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
            s.remove_suffix(1);
        }
        return s;
    }

    std::map<std::string, Entry> entries_;
    std::vector<std::string> order_;
    mutable std::set<std::string> used_;
};

} // namespace stampcorr
