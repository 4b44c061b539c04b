#ifndef EOFLOW_CONFIG_HPP
#define EOFLOW_CONFIG_HPP

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace eoflow::config {

// INI-style key=value store with [section] grouping. Keys are addressed as
// "section.key". Values are kept as strings and parsed on access.
class RunConfig {
  public:
    RunConfig() = default;

    static RunConfig from_file(const std::string& path);
    static RunConfig from_text(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) > 0; }
    void set(const std::string& key, const std::string& value) { kv_[key] = value; }

    std::string get_str(const std::string& key, const std::string& fallback) const;
    double get_num(const std::string& key, double fallback) const;
    int64_t get_int(const std::string& key, int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Rejects any key not in `known` (config_error naming the key).
    void require_known(const std::set<std::string>& known) const;

    // Deterministic text form: sections sorted, keys sorted within sections.
    std::string resolved_text() const;

    // FNV-1a over the resolved text; embedded in output provenance lines.
    uint64_t hash() const;
    std::string hash_hex() const;

    void write_file(const std::string& path) const;

    const std::map<std::string, std::string>& entries() const { return kv_; }

  private:
    std::map<std::string, std::string> kv_;
};

// Comma-separated numbers ("1,2,3") -> vector; empty string -> empty vector.
std::vector<double> parse_number_list(const std::string& text);
std::vector<int64_t> parse_int_list(const std::string& text);

}  // namespace eoflow::config

#endif
