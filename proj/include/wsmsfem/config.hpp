#pragma once

// Experiment configuration: plain-text key=value lines under [section]
// headers, '#' comments. Numbers accept fractions such as 1/30; lists are
// comma-separated. Sweep axes take their values from the list given for the
// swept key (eta, epsilon, h or M).

#include "montecarlo.hpp"

#include <cstdlib>
#include <fstream>
#include <map>
#include <set>

namespace wsmsfem {

struct config {
    experiment_plan plan;
    // Full lists as written; plan holds the first entry of each.
    std::vector<double> eps_values;
    std::vector<double> h_values;
    std::vector<long> M_values;
    std::string out_dir = "out";
    bool h_fine_set = false;
    bool h_basis_set = false;
};

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos)
        return {};
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split_list(const std::string& v)
{
    std::vector<std::string> out;
    std::string cur;
    for (char c : v) {
        if (c == ',') {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline double parse_plain(const std::string& t, const std::string& where)
{
    if (t.empty())
        throw config_error(where + ": empty number");
    char* end = nullptr;
    const double v = std::strtod(t.c_str(), &end);
    if (end != t.c_str() + t.size() || !std::isfinite(v))
        throw config_error(where + ": '" + t + "' is not a number");
    return v;
}

/// "x" or "x/y".
inline double parse_number(const std::string& s, const std::string& where)
{
    const std::string t = trim(s);
    const auto slash = t.find('/');
    if (slash == std::string::npos)
        return parse_plain(t, where);
    const double num = parse_plain(trim(t.substr(0, slash)), where);
    const double den = parse_plain(trim(t.substr(slash + 1)), where);
    if (den == 0.0)
        throw config_error(where + ": division by zero in '" + t + "'");
    return num / den;
}

inline long parse_integer(const std::string& s, const std::string& where)
{
    const std::string t = trim(s);
    char* end = nullptr;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || end != t.c_str() + t.size())
        throw config_error(where + ": '" + t + "' is not an integer");
    return static_cast<long>(v);
}

inline std::string format_number(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F&& fmt)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + fmt(v[i]);
    return s;
}

} // namespace detail

inline const std::map<std::string, std::set<std::string>>& config_schema()
{
    static const std::map<std::string, std::set<std::string>> schema{
        {"problem", {"preset", "epsilon", "eta", "kappa", "zeta", "P", "mean_x", "var_x"}},
        {"mesh", {"h", "h_fine", "h_basis"}},
        {"msfem", {"oversampling_ratio"}},
        {"montecarlo", {"M", "seed", "estimators", "norms"}},
        {"output", {"out_dir", "basis_cache_dir"}},
    };
    return schema;
}

/// Checks the invariants of a parsed config; throws config_error.
inline void validate_config(const config& c)
{
    const auto& p = c.plan;
    try {
        p.validate();
    } catch (const std::invalid_argument& e) {
        throw config_error(e.what());
    }
    for (double eta : p.etas)
        if (!(eta >= 0 && eta <= 1))
            throw config_error("eta = " + detail::format_number(eta) + " outside [0,1]");
    for (double eps : c.eps_values)
        for (double h : c.h_values) {
            const double hf = c.h_fine_set ? p.h_fine : eps / 40.0;
            if (!(hf <= eps * (1 + 1e-12) && eps <= h * (1 + 1e-12)))
                throw config_error("resolutions must satisfy h_fine <= epsilon <= h (h_fine=" +
                                   detail::format_number(hf) + ", epsilon=" + detail::format_number(eps) +
                                   ", h=" + detail::format_number(h) + ")");
        }
    for (long M : c.M_values)
        if (M < 2)
            throw config_error("M must be >= 2");
    if (p.preset != "oned-multifreq" && p.preset != "twod-multifreq" && p.preset != "twod-classical")
        throw config_error("unknown preset '" + p.preset + "' (expected oned-multifreq, twod-multifreq or twod-classical)");
}

inline config parse_config(std::istream& is, const std::string& source = "config")
{
    config c;
    auto& p = c.plan;
    std::string section;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    c.eps_values = {p.eps};
    c.h_values = {p.h};
    c.M_values = {p.M};
    while (std::getline(is, line)) {
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        const auto hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw config_error(where + ": malformed section header '" + line + "'");
            section = detail::trim(line.substr(1, line.size() - 2));
            if (!config_schema().count(section))
                throw config_error(where + ": unknown section [" + section + "]");
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw config_error(where + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));
        if (section.empty())
            throw config_error(where + ": key '" + key + "' outside any section");
        if (!config_schema().at(section).count(key)) {
            for (const auto& [sec, keys] : config_schema())
                if (keys.count(key))
                    throw config_error(where + ": key '" + key + "' belongs in [" + sec + "], not [" + section + "]");
            throw config_error(where + ": unknown key '" + key + "'");
        }
        if (!seen.insert(key).second)
            throw config_error(where + ": duplicate key '" + key + "'");
        const auto numbers = [&] {
            std::vector<double> v;
            for (const auto& t : detail::split_list(value))
                v.push_back(detail::parse_number(t, where));
            return v;
        };
        const auto single = [&] {
            const auto v = numbers();
            if (v.size() != 1)
                throw config_error(where + ": '" + key + "' takes a single value");
            return v.front();
        };
        if (key == "preset") {
            p.preset = value;
        } else if (key == "epsilon") {
            c.eps_values = numbers();
        } else if (key == "eta") {
            p.etas = numbers();
        } else if (key == "kappa") {
            p.kappa = single();
        } else if (key == "zeta") {
            p.zeta = single();
        } else if (key == "P") {
            p.P = single();
        } else if (key == "mean_x") {
            p.mean_x = single();
        } else if (key == "var_x") {
            p.var_x = single();
            if (p.var_x < 0)
                throw config_error(where + ": var_x must be non-negative");
        } else if (key == "h") {
            c.h_values = numbers();
        } else if (key == "h_fine") {
            p.h_fine = single();
            c.h_fine_set = true;
        } else if (key == "h_basis") {
            p.h_basis = single();
            c.h_basis_set = true;
        } else if (key == "oversampling_ratio") {
            p.ratio = single();
        } else if (key == "M") {
            c.M_values.clear();
            for (const auto& t : detail::split_list(value))
                c.M_values.push_back(detail::parse_integer(t, where));
        } else if (key == "seed") {
            const long s = detail::parse_integer(value, where);
            if (s < 0)
                throw config_error(where + ": seed must be non-negative");
            p.seed = static_cast<std::uint64_t>(s);
        } else if (key == "estimators") {
            p.estimators = detail::split_list(value);
        } else if (key == "norms") {
            p.norms = detail::split_list(value);
        } else if (key == "out_dir") {
            c.out_dir = value;
        } else if (key == "basis_cache_dir") {
            p.basis_cache_dir = value;
        }
    }
    p.eps = c.eps_values.front();
    p.h = c.h_values.front();
    p.M = c.M_values.front();
    if (!c.h_fine_set)
        p.h_fine = p.eps / 40.0;
    if (!c.h_basis_set)
        p.h_basis = p.eps / 80.0;
    validate_config(c);
    return c;
}

inline config load_config(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw config_error("cannot open config file '" + path + "'");
    return parse_config(is, path);
}

/// Serialises every setting at full precision; parsing the output gives
/// back the same plan.
inline void write_config(std::ostream& os, const config& c)
{
    const auto& p = c.plan;
    const auto num = [](double v) { return detail::format_number(v); };
    os << "[problem]\n"
       << "preset = " << p.preset << "\n"
       << "epsilon = " << detail::join(c.eps_values, num) << "\n"
       << "eta = " << detail::join(p.etas, num) << "\n"
       << "kappa = " << num(p.kappa) << "\n"
       << "zeta = " << num(p.zeta) << "\n"
       << "P = " << num(p.P) << "\n"
       << "mean_x = " << num(p.mean_x) << "\n"
       << "var_x = " << num(p.var_x) << "\n\n"
       << "[mesh]\n"
       << "h = " << detail::join(c.h_values, num) << "\n";
    if (c.h_fine_set)
        os << "h_fine = " << num(p.h_fine) << "\n";
    if (c.h_basis_set)
        os << "h_basis = " << num(p.h_basis) << "\n";
    os << "\n[msfem]\n"
       << "oversampling_ratio = " << num(p.ratio) << "\n\n"
       << "[montecarlo]\n"
       << "M = " << detail::join(c.M_values, [](long m) { return std::to_string(m); }) << "\n"
       << "seed = " << p.seed << "\n"
       << "estimators = " << detail::join(p.estimators, [](const std::string& s) { return s; }) << "\n"
       << "norms = " << detail::join(p.norms, [](const std::string& s) { return s; }) << "\n\n"
       << "[output]\n"
       << "out_dir = " << c.out_dir << "\n";
    if (!p.basis_cache_dir.empty())
        os << "basis_cache_dir = " << p.basis_cache_dir << "\n";
}

} // namespace wsmsfem
