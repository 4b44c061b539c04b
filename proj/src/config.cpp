#include "eoflow/config.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "eoflow/errors.hpp"

namespace eoflow::config {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("config: cannot open '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
}

RunConfig RunConfig::from_text(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']') {
                throw config_error("config: malformed section at line " +
                                   std::to_string(line_no));
            }
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty()) {
                throw config_error("config: empty section name at line " +
                                   std::to_string(line_no));
            }
            continue;
        }
        size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw config_error("config: expected key=value at line " + std::to_string(line_no) +
                               ": '" + t + "'");
        }
        std::string key = trim(t.substr(0, eq));
        std::string value = trim(t.substr(eq + 1));
        if (key.empty()) {
            throw config_error("config: empty key at line " + std::to_string(line_no));
        }
        if (section.empty()) {
            throw config_error("config: key '" + key + "' outside any [section] at line " +
                               std::to_string(line_no));
        }
        cfg.kv_[section + "." + key] = value;
    }
    return cfg;
}

std::string RunConfig::get_str(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

double RunConfig::get_num(const std::string& key, double fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        size_t pos = 0;
        double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error("config: key '" + key + "' has non-numeric value '" + it->second +
                           "'");
    }
}

int64_t RunConfig::get_int(const std::string& key, int64_t fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    try {
        size_t pos = 0;
        long long v = std::stoll(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing");
        return static_cast<int64_t>(v);
    } catch (const std::exception&) {
        throw config_error("config: key '" + key + "' has non-integer value '" + it->second +
                           "'");
    }
}

bool RunConfig::get_bool(const std::string& key, bool fallback) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw config_error("config: key '" + key + "' has non-boolean value '" + v + "'");
}

void RunConfig::require_known(const std::set<std::string>& known) const {
    for (const auto& [key, value] : kv_) {
        if (known.find(key) == known.end()) {
            throw config_error("config: unknown key '" + key + "'");
        }
    }
}

std::string RunConfig::resolved_text() const {
    // std::map iterates in sorted key order already
    std::string out;
    std::string current_section;
    for (const auto& [key, value] : kv_) {
        size_t dotpos = key.find('.');
        std::string section = key.substr(0, dotpos);
        std::string name = key.substr(dotpos + 1);
        if (section != current_section) {
            if (!out.empty()) out += "\n";
            out += "[" + section + "]\n";
            current_section = section;
        }
        out += name + " = " + value + "\n";
    }
    return out;
}

uint64_t RunConfig::hash() const {
    const uint64_t prime = 1099511628211ull;
    uint64_t h = 14695981039346656037ull;
    for (unsigned char c : resolved_text()) {
        h ^= c;
        h *= prime;
    }
    return h;
}

std::string RunConfig::hash_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash()));
    return std::string(buf);
}

void RunConfig::write_file(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw config_error("config: cannot write '" + path + "'");
    out << resolved_text();
}

std::vector<double> parse_number_list(const std::string& text) {
    std::vector<double> out;
    std::string t = trim(text);
    if (t.empty()) return out;
    std::istringstream in(t);
    std::string item;
    while (std::getline(in, item, ',')) {
        std::string v = trim(item);
        try {
            out.push_back(std::stod(v));
        } catch (const std::exception&) {
            throw config_error("config: bad number '" + v + "' in list '" + text + "'");
        }
    }
    return out;
}

std::vector<int64_t> parse_int_list(const std::string& text) {
    std::vector<int64_t> out;
    for (double v : parse_number_list(text)) out.push_back(static_cast<int64_t>(v));
    return out;
}

}  // namespace eoflow::config
