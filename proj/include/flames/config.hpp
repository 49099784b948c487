#pragma once

// Flat key-value configuration with [sections]. Keys are addressed as
// "section.key"; keys before any section header live at the top level.

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace flames::config {

class Config {
public:
    // '#' and ';' start comments. Throws Error{BadFormat} naming the line.
    static Config parse(std::istream& in);
    static Config load(const std::filesystem::path& path);

    bool has(std::string_view key) const;
    std::optional<std::string> get(std::string_view key) const;
    std::string get_string(std::string_view key, std::string_view fallback) const;
    // Throw Error{BadFormat} when present but unparsable.
    double get_double(std::string_view key, double fallback) const;
    long long get_int(std::string_view key, long long fallback) const;
    bool get_bool(std::string_view key, bool fallback) const;

    void set(std::string key, std::string value);
    const std::map<std::string, std::string, std::less<>>& entries() const { return entries_; }
    // Keys under "section.", without the prefix, sorted.
    std::vector<std::string> keys_in(std::string_view section) const;

private:
    std::map<std::string, std::string, std::less<>> entries_;
};

}  // namespace flames::config
