#include "evd/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace evd::cfg {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues KeyValues::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

KeyValues KeyValues::parse(const std::string& text, const std::string& name) {
    KeyValues kv;
    kv.name_ = name;
    std::istringstream in(text);
    std::string line, section;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(name + ":" + std::to_string(lineno) +
                                  ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(name + ":" + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
        kv.values_[section.empty() ? key : section + "." + key] = value;
    }
    return kv;
}

std::string KeyValues::get_string(const std::string& key,
                                  const std::string& def) const {
    const auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
}

std::string KeyValues::require_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
        throw ConfigError(name_ + ": missing required key '" + key + "'");
    return it->second;
}

double KeyValues::get_double(const std::string& key, double def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(name_ + ": key '" + key + "' is not a number: " +
                          it->second);
    }
}

int KeyValues::get_int(const std::string& key, int def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    try {
        return std::stoi(it->second);
    } catch (const std::exception&) {
        throw ConfigError(name_ + ": key '" + key + "' is not an integer: " +
                          it->second);
    }
}

bool KeyValues::get_bool(const std::string& key, bool def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    std::string v = it->second;
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(name_ + ": key '" + key + "' is not a boolean: " + v);
}

geom::Vec3 KeyValues::get_vec3(const std::string& key,
                               const geom::Vec3& def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return def;
    double x, y, z;
    if (std::sscanf(it->second.c_str(), "%lf %lf %lf", &x, &y, &z) == 3 ||
        std::sscanf(it->second.c_str(), "%lf,%lf,%lf", &x, &y, &z) == 3)
        return {x, y, z};
    throw ConfigError(name_ + ": key '" + key + "' is not a 3-vector: " +
                      it->second);
}

}  // namespace evd::cfg
