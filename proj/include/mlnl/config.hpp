#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "mlnl/errors.hpp"
#include "mlnl/rational.hpp"

namespace mlnl {

using Config = nlohmann::json;

/// Every accepted section and key, with its default and type.
inline const Config& default_config() {
    static const Config c = Config::parse(R"({
  "verify-lemma61": {
    "orders": "1/4,1/2,3/4,0.3,0.61",
    "atoms": "1:0,1.7:1,2.5:2,3-2s:0",
    "points": 20,
    "x_lo": 1e-4,
    "x_hi": 0.45,
    "rel_tol": 1e-6,
    "quad_rel_tol": 1e-11
  },
  "counterexample": {
    "s": "3/8",
    "k": 2,
    "points": 30,
    "x_lo": 1e-3,
    "x_hi": 0.45,
    "residual_tol": 1e-5,
    "window_lo": 1e-5,
    "window_hi": 1e-2,
    "slope_tol": 0.05,
    "log_x_lo": 1e-6,
    "log_x_hi": 1e-4,
    "log_gap_tol": 0.1,
    "leading_points": "1e-3,1e-4,1e-5",
    "leading_tol": 0.02
  },
  "solve": {
    "s": "3/4",
    "kernel": "fractional",
    "N": 1024,
    "grid": "graded",
    "grading": 2.0,
    "method": "direct",
    "damping": 1.0,
    "max_iter": 500,
    "p": "one",
    "q": "one",
    "g": "zero",
    "f": "one",
    "p_min": 1.0,
    "gamma": 0.5,
    "beta": 0.5,
    "fit_lo": 0.0,
    "fit_hi": 0.05,
    "slope_tol": 0.1,
    "agreement_tol": 1e-8,
    "trials": 20,
    "seed": 0
  },
  "barriers": {
    "s": "0.6",
    "R": 1.0,
    "lambdas": "20,40,80,1",
    "lambda_R_min": 10.0,
    "samples": 15,
    "stability_tol": 0.05,
    "distance_orders": "1/4,3/4",
    "r0": 0.5,
    "sigma": 0.2,
    "bisection_steps": 30,
    "poisson_gamma": 0.5,
    "poisson_M": 1.0
  },
  "norms": {
    "f": "sin7",
    "M": 1.3,
    "gamma": 0.5,
    "beta": 0.5,
    "per_side": 200,
    "d_min": 1e-6,
    "stability_tol": 0.1
  }
})");
    return c;
}

namespace detail {

inline std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline Config typed_value(const Config& like, const std::string& raw, const std::string& where) {
    std::string v = trim(raw);
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
    try {
        std::size_t pos = 0;
        if (like.is_number_integer()) {
            long long x = std::stoll(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return x;
        }
        if (like.is_number_float()) {
            double x = std::stod(v, &pos);
            if (pos != v.size()) throw std::invalid_argument(v);
            return x;
        }
        if (like.is_boolean()) {
            if (v == "true") return true;
            if (v == "false") return false;
            throw std::invalid_argument(v);
        }
    } catch (const std::logic_error&) {
        throw ConfigError(where + ": cannot parse '" + v + "'");
    }
    return v;
}

inline void merge_checked(Config& base, const Config& over, const std::string& origin) {
    if (!over.is_object()) throw ConfigError(origin + ": top level must be an object of sections");
    for (auto it = over.begin(); it != over.end(); ++it) {
        if (!base.contains(it.key())) throw ConfigError(origin + ": unknown section [" + it.key() + "]");
        if (!it->is_object()) throw ConfigError(origin + ": section [" + it.key() + "] must be an object");
        Config& sec = base[it.key()];
        for (auto kv = it->begin(); kv != it->end(); ++kv) {
            const std::string where = origin + ": " + it.key() + "." + kv.key();
            if (!sec.contains(kv.key())) throw ConfigError(where + " is not a known key");
            const Config& like = sec[kv.key()];
            const Config& v = kv.value();
            bool ok = (like.is_string() && v.is_string()) || (like.is_boolean() && v.is_boolean()) ||
                      (like.is_number_integer() && v.is_number_integer()) ||
                      (like.is_number_float() && v.is_number());
            if (!ok) throw ConfigError(where + " has the wrong type");
            sec[kv.key()] = like.is_number_float() ? Config(v.get<double>()) : v;
        }
    }
}

}  // namespace detail

/// key = value lines under [section] headers; '#' starts a comment.
inline Config parse_config_text(const std::string& text, const std::string& origin = "config") {
    Config over = Config::object();
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::string where = origin + ":" + std::to_string(lineno);
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where + ": malformed section header");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (!default_config().contains(section)) throw ConfigError(where + ": unknown section [" + section + "]");
            if (!over.contains(section)) over[section] = Config::object();
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
        if (section.empty()) throw ConfigError(where + ": key outside any section");
        std::string key = detail::trim(line.substr(0, eq));
        const Config& sec = default_config()[section];
        if (!sec.contains(key)) throw ConfigError(where + ": unknown key '" + key + "' in [" + section + "]");
        over[section][key] = detail::typed_value(sec[key], line.substr(eq + 1), where);
    }
    Config c = default_config();
    detail::merge_checked(c, over, origin);
    return c;
}

inline Config parse_config_json(const std::string& text, const std::string& origin = "config") {
    Config over;
    try {
        over = Config::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(origin + ": " + e.what());
    }
    Config c = default_config();
    detail::merge_checked(c, over, origin);
    return c;
}

/// Built-in configs addressable by name; configs/<name>.cfg ships the same text.
inline const std::map<std::string, std::string>& config_presets() {
    static const std::map<std::string, std::string> p = {
        {"thm11_s075",
         "[solve]\ns = 3/4\nkernel = fractional\nN = 1024\ngrid = graded\ngrading = 2.0\nmethod = direct\n"
         "p = one\nq = one\ng = zero\nf = one\nfit_hi = 0.05\nslope_tol = 0.1\ntrials = 20\nseed = 0\n"},
    };
    return p;
}

/// Reads a file, or a preset name when no such file exists.
inline Config load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        auto it = config_presets().find(path);
        if (it != config_presets().end()) return parse_config_text(it->second, path);
        throw ConfigError("cannot open config '" + path + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    std::string t = detail::trim(text);
    if (!t.empty() && t.front() == '{') return parse_config_json(text, path);
    return parse_config_text(text, path);
}

inline std::string format_value(const Config& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_float()) {
        std::string s = shortest_repr(v.get<double>());
        if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
        return s;
    }
    return v.dump();
}

inline std::string to_config_text(const Config& c) {
    std::string out;
    for (auto it = c.begin(); it != c.end(); ++it) {
        if (!out.empty()) out += '\n';
        out += "[" + it.key() + "]\n";
        for (auto kv = it->begin(); kv != it->end(); ++kv) out += kv.key() + " = " + format_value(kv.value()) + "\n";
    }
    return out;
}

/// 64-bit FNV-1a of the canonical JSON dump.
inline std::string config_hash(const Config& c) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : c.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::vector<std::string> split_list(const std::string& s, char sep = ',') {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        item = detail::trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
    std::vector<double> out;
    for (const auto& item : split_list(s)) {
        std::size_t pos = 0;
        double v;
        try {
            v = std::stod(item, &pos);
        } catch (const std::logic_error&) {
            throw ConfigError(what + ": cannot parse '" + item + "'");
        }
        if (pos != item.size()) throw ConfigError(what + ": cannot parse '" + item + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError(what + ": empty list");
    return out;
}

/// Named coefficient functions on (0,1); a bare number is a constant.
inline std::function<double(double)> make_coefficient(const std::string& name, double gamma = 0.5) {
    if (name == "one") return [](double) { return 1.0; };
    if (name == "zero") return [](double) { return 0.0; };
    if (name == "two") return [](double) { return 2.0; };
    if (name == "bump") return [](double x) { return std::exp(-(x - 0.5) * (x - 0.5) / 0.02); };
    if (name == "neg_bump") return [](double x) { return 1.0 - 3 * std::exp(-(x - 0.3) * (x - 0.3) / 0.005); };
    if (name == "linear") return [](double x) { return 1.0 + x; };
    if (name == "xpow") return [gamma](double x) { return std::pow(x, -gamma); };
    if (name == "sin7")
        return [gamma](double x) { return std::pow(std::min(x, 1 - x), -gamma) * (1 + 0.3 * std::sin(7 * x)); };
    try {
        std::size_t pos = 0;
        double v = std::stod(name, &pos);
        if (pos == name.size()) return [v](double) { return v; };
    } catch (const std::logic_error&) {
    }
    throw ConfigError("unknown coefficient function '" + name + "'");
}

inline std::vector<std::string> coefficient_names() {
    return {"one", "zero", "two", "bump", "neg_bump", "linear", "xpow", "sin7", "<number>"};
}

}  // namespace mlnl
