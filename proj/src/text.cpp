#include "flames/text.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

namespace flames::text {

std::string_view trim(std::string_view s) {
    auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; };
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

void split(std::string_view line, char delim, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t pos = 0;
    while (true) {
        auto next = line.find(delim, pos);
        if (next == std::string_view::npos) {
            out.push_back(trim(line.substr(pos)));
            return;
        }
        out.push_back(trim(line.substr(pos, next - pos)));
        pos = next + 1;
    }
}

std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> out;
    split(line, delim, out);
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) ==
                      std::tolower(static_cast<unsigned char>(y));
           });
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::optional<std::int64_t> parse_int(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<std::uint64_t> parse_uint(std::string_view s) {
    if (s.empty() || s.front() == '-') return std::nullopt;
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) return std::nullopt;
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

std::optional<Millis> parse_seconds_ms(std::string_view s) {
    if (s.empty()) return std::nullopt;
    bool negative = false;
    if (s.front() == '-' || s.front() == '+') {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    auto dot = s.find('.');
    auto whole_text = s.substr(0, dot);
    if (whole_text.empty() && dot == std::string_view::npos) return std::nullopt;
    std::int64_t whole = 0;
    if (!whole_text.empty()) {
        auto w = parse_uint(whole_text);
        if (!w) return std::nullopt;
        whole = static_cast<std::int64_t>(*w);
    }
    std::int64_t frac = 0;
    if (dot != std::string_view::npos) {
        auto digits = s.substr(dot + 1);
        if (digits.empty() && whole_text.empty()) return std::nullopt;
        int used = 0;
        bool round_up = false;
        for (std::size_t i = 0; i < digits.size(); ++i) {
            char c = digits[i];
            if (c < '0' || c > '9') return std::nullopt;
            if (used < 3) {
                frac = frac * 10 + (c - '0');
                ++used;
            } else if (i == 3) {
                round_up = c >= '5';
            }
        }
        for (; used < 3; ++used) frac *= 10;
        if (round_up) ++frac;
    }
    Millis ms = whole * kMsPerSecond + frac;
    return negative ? -ms : ms;
}

std::string format_seconds_ms(Millis ms) {
    const bool negative = ms < 0;
    const std::uint64_t a = negative ? static_cast<std::uint64_t>(-ms) : static_cast<std::uint64_t>(ms);
    return fmt::format("{}{}.{:03d}", negative ? "-" : "", a / 1000, a % 1000);
}

std::string format_seconds(Millis ms) { return fmt::format("{}", ms / kMsPerSecond); }

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    return fmt::format("{}", v);
}

}  // namespace flames::text
