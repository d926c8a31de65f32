#pragma once

#include <map>
#include <stdexcept>
#include <string>

#include "evd/geometry.hpp"

namespace evd::cfg {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key-value config with `[section]` headers. Keys are addressed as
/// "section.key"; `#` starts a comment.
class KeyValues {
  public:
    static KeyValues load(const std::string& path);
    static KeyValues parse(const std::string& text, const std::string& name);

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& def) const;
    std::string require_string(const std::string& key) const;
    double get_double(const std::string& key, double def) const;
    int get_int(const std::string& key, int def) const;
    bool get_bool(const std::string& key, bool def) const;
    geom::Vec3 get_vec3(const std::string& key, const geom::Vec3& def) const;

    void set(const std::string& key, const std::string& value) {
        values_[key] = value;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

  private:
    std::map<std::string, std::string> values_;
    std::string name_;
};

}  // namespace evd::cfg
