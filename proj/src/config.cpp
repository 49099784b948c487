#include "flames/config.hpp"

#include <istream>

#include "flames/error.hpp"
#include "flames/io.hpp"
#include "flames/text.hpp"

namespace flames::config {

Config Config::parse(std::istream& in) {
    Config c;
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view t = line;
        if (auto hash = t.find_first_of("#;"); hash != std::string_view::npos) t = t.substr(0, hash);
        t = text::trim(t);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']' || t.size() < 3)
                throw Error(Errc::BadFormat, "config line " + std::to_string(lineno) + ": bad section header");
            section = std::string(text::trim(t.substr(1, t.size() - 2)));
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string_view::npos)
            throw Error(Errc::BadFormat, "config line " + std::to_string(lineno) + ": expected key = value");
        const auto key = text::trim(t.substr(0, eq));
        if (key.empty()) throw Error(Errc::BadFormat, "config line " + std::to_string(lineno) + ": empty key");
        const auto full = section.empty() ? std::string(key) : section + "." + std::string(key);
        c.entries_[full] = std::string(text::trim(t.substr(eq + 1)));
    }
    return c;
}

Config Config::load(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    return parse(in);
}

bool Config::has(std::string_view key) const { return entries_.find(key) != entries_.end(); }

std::optional<std::string> Config::get(std::string_view key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

std::string Config::get_string(std::string_view key, std::string_view fallback) const {
    auto v = get(key);
    return v ? *v : std::string(fallback);
}

double Config::get_double(std::string_view key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    auto d = text::parse_double(*v);
    if (!d) throw Error(Errc::BadFormat, "config key '" + std::string(key) + "': not a number");
    return *d;
}

long long Config::get_int(std::string_view key, long long fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    auto d = text::parse_int(*v);
    if (!d) throw Error(Errc::BadFormat, "config key '" + std::string(key) + "': not an integer");
    return *d;
}

bool Config::get_bool(std::string_view key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    const auto s = text::to_lower(*v);
    if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
    if (s == "false" || s == "no" || s == "0" || s == "off") return false;
    throw Error(Errc::BadFormat, "config key '" + std::string(key) + "': not a boolean");
}

void Config::set(std::string key, std::string value) { entries_[std::move(key)] = std::move(value); }

std::vector<std::string> Config::keys_in(std::string_view section) const {
    std::vector<std::string> out;
    const std::string prefix = std::string(section) + ".";
    for (const auto& [k, v] : entries_)
        if (k.starts_with(prefix)) out.push_back(k.substr(prefix.size()));
    return out;
}

}  // namespace flames::config
