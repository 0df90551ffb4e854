#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace dynaplan {

// INI-style run configuration. Keys are addressed as "section.key"; entries
// before any [section] header live at the bare key. Values are strings until
// a typed getter parses them; parse failures throw rather than fall back.
class RunConfig {
public:
    RunConfig() = default;
    static RunConfig from_file(const std::string& path);
    static RunConfig from_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get(const std::string& key, const std::string& fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value);

    // Stable digest of the parsed key/value map; independent of comments,
    // whitespace and declaration order.
    uint64_t digest() const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

}  // namespace dynaplan
