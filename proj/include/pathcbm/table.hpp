#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pathcbm/error.hpp"

namespace pathcbm {

// Shortest digit run that round-trips a double exactly; used everywhere a
// number is written to disk so that re-exported files are byte-identical.
inline std::string format_double(double x) {
    char buf[64];
    for (int prec = 1; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof(buf), "%.*g", prec, x);
        double back = 0.0;
        std::sscanf(buf, "%lf", &back);
        if (back == x || (back != back && x != x)) return buf;
    }
    return buf;
}

inline std::string format_fixed(double x, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, x);
    return buf;
}

inline double parse_double(std::string_view s, const std::string& context) {
    double value = 0.0;
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end)
        throw ValidationError(context + ": cannot parse number '" + std::string(s) + "'");
    return value;
}

inline long long parse_int(std::string_view s, const std::string& context) {
    long long value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw ValidationError(context + ": cannot parse integer '" + std::string(s) + "'");
    return value;
}

inline std::vector<std::string> split_fields(const std::string& line, char delim = '\t') {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        std::size_t pos = line.find(delim, start);
        if (pos == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return fields;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based source line of each row
};

// Reads a UTF-8 tab-delimited table with a header line. Lines starting with
// '#' and blank lines are skipped. Every row must match the header width.
inline Table read_table(const std::string& path, char delim = '\t') {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open '" + path + "'");
    Table table;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split_fields(line, delim);
        if (table.header.empty()) {
            table.header = std::move(fields);
            continue;
        }
        if (fields.size() != table.header.size())
            throw ValidationError(path + ":" + std::to_string(lineno) + ": expected " +
                                  std::to_string(table.header.size()) + " columns, got " +
                                  std::to_string(fields.size()));
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(lineno);
    }
    if (table.header.empty()) throw ValidationError(path + ": empty file");
    return table;
}

class TableWriter {
public:
    explicit TableWriter(const std::string& path) : out_(path, std::ios::binary) {
        if (!out_) throw ValidationError("cannot write '" + path + "'");
        path_ = path;
    }

    void comment(const std::string& text) { out_ << "# " << text << "\n"; }

    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out_ << '\t';
            out_ << fields[i];
        }
        out_ << '\n';
    }

    void close() {
        out_.close();
        if (!out_) throw std::runtime_error("error writing '" + path_ + "'");
    }

private:
    std::ofstream out_;
    std::string path_;
};

// Key-value config format: one `key = value` per line, '#' comments. Reads
// are tracked so a misspelled key can be reported instead of silently
// ignored.
class Config {
public:
    Config() = default;

    static Config parse(const std::string& text, const std::string& where = "<config>") {
        Config cfg;
        std::istringstream in(text);
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw ValidationError(where + ":" + std::to_string(lineno) +
                                      ": expected 'key = value'");
            std::string key = trim(trimmed.substr(0, eq));
            std::string value = trim(trimmed.substr(eq + 1));
            if (key.empty())
                throw ValidationError(where + ":" + std::to_string(lineno) + ": empty key");
            if (!cfg.values_.emplace(std::move(key), std::move(value)).second)
                throw ValidationError(where + ":" + std::to_string(lineno) + ": duplicate key");
        }
        return cfg;
    }

    static Config from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ValidationError("cannot open config '" + path + "'");
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse(buf.str(), path);
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    // Required-key accessors throw when the key is absent; the two-argument
    // forms fall back instead. Both mark the key as consumed.
    std::string get_string(const std::string& key) const { return require(key); }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        return has(key) ? get_string(key) : fallback;
    }

    double get_double(const std::string& key) const {
        return parse_double(require(key), "config key '" + key + "'");
    }

    double get_double(const std::string& key, double fallback) const {
        return has(key) ? get_double(key) : fallback;
    }

    long long get_int(const std::string& key) const {
        return parse_int(require(key), "config key '" + key + "'");
    }

    long long get_int(const std::string& key, long long fallback) const {
        return has(key) ? get_int(key) : fallback;
    }

    std::uint64_t get_u64(const std::string& key) const {
        const long long v = get_int(key);
        if (v < 0)
            throw ValidationError("config key '" + key + "': expected a non-negative integer");
        return static_cast<std::uint64_t>(v);
    }

    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
        return has(key) ? get_u64(key) : fallback;
    }

    std::size_t get_size(const std::string& key) const {
        return static_cast<std::size_t>(get_u64(key));
    }

    std::size_t get_size(const std::string& key, std::size_t fallback) const {
        return static_cast<std::size_t>(get_u64(key, fallback));
    }

    bool get_bool(const std::string& key) const {
        const std::string v = require(key);
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw ValidationError("config key '" + key + "': expected boolean, got '" + v + "'");
    }

    bool get_bool(const std::string& key, bool fallback) const {
        return has(key) ? get_bool(key) : fallback;
    }

    std::vector<double> get_double_list(const std::string& key) const {
        std::vector<double> out;
        std::stringstream ss(require(key));
        std::string item;
        while (std::getline(ss, item, ',')) {
            std::string t = trim(item);
            if (!t.empty()) out.push_back(parse_double(t, "config key '" + key + "'"));
        }
        return out;
    }

    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const {
        return has(key) ? get_double_list(key) : fallback;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

    // Keys present but never read; call after all consumers have run.
    std::vector<std::string> unused() const {
        std::vector<std::string> keys;
        for (const auto& [key, value] : values_)
            if (!used_.count(key)) keys.push_back(key);
        return keys;
    }

    void require_consumed() const {
        const auto leftover = unused();
        if (leftover.empty()) return;
        std::string msg = "config: unknown key";
        if (leftover.size() > 1) msg += "s";
        for (const auto& key : leftover) msg += " '" + key + "'";
        throw ValidationError(msg);
    }

private:
    const std::string& require(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) throw ValidationError("config: missing key '" + key + "'");
        used_.insert(key);
        return it->second;
    }

    static std::string trim(const std::string& s) {
        std::size_t b = s.find_first_not_of(" \t");
        if (b == std::string::npos) return "";
        std::size_t e = s.find_last_not_of(" \t");
        return s.substr(b, e - b + 1);
    }

    std::map<std::string, std::string> values_;
    mutable std::set<std::string> used_;
};

}  // namespace pathcbm
