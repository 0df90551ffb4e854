#include "dynaplan/runconfig.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dynaplan/hashing.hpp"

namespace dynaplan {

namespace {

std::string trim(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) { ++b; }
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) { --e; }
    return s.substr(b, e - b);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) { throw std::runtime_error("cannot open config: " + path); }
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

RunConfig RunConfig::from_string(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) { line = line.substr(0, comment); }
        line = trim(line);
        if (line.empty()) { continue; }
        if (line.front() == '[') {
            if (line.back() != ']') {
                throw std::invalid_argument("config line " + std::to_string(lineno) +
                                         ": unterminated section header");
            }
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) {
                throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty section name");
            }
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": empty key");
        }
        cfg.entries_[section.empty() ? key : section + "." + key] = value;
    }
    return cfg;
}

bool RunConfig::has(const std::string& key) const { return entries_.count(key) > 0; }

std::string RunConfig::get(const std::string& key, const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

int64_t RunConfig::get_int(const std::string& key, int64_t fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) { return fallback; }
    size_t used = 0;
    long long v = 0;
    try {
        v = std::stoll(it->second, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": not an integer: " + it->second);
    }
    if (used != it->second.size()) {
        throw std::invalid_argument("config key " + key + ": not an integer: " + it->second);
    }
    return v;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) { return fallback; }
    size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(it->second, &used);
    } catch (const std::exception&) {
        throw std::invalid_argument("config key " + key + ": not a number: " + it->second);
    }
    if (used != it->second.size()) {
        throw std::invalid_argument("config key " + key + ": not a number: " + it->second);
    }
    return v;
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) { return fallback; }
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (v == "true" || v == "yes" || v == "on" || v == "1") { return true; }
    if (v == "false" || v == "no" || v == "off" || v == "0") { return false; }
    throw std::invalid_argument("config key " + key + ": not a boolean: " + it->second);
}

void RunConfig::set(const std::string& key, const std::string& value) { entries_[key] = value; }

uint64_t RunConfig::digest() const {
    std::string blob;
    for (const auto& [k, v] : entries_) {
        blob += k;
        blob += '=';
        blob += v;
        blob += '\n';
    }
    return fnv1a64(blob);
}

}  // namespace dynaplan
