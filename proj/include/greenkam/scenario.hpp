#ifndef GREENKAM_SCENARIO_HPP
#define GREENKAM_SCENARIO_HPP

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "greenkam/common.hpp"
#include "greenkam/model.hpp"

namespace greenkam {

/// Fully validated experiment description: model, task, and the numeric
/// knobs of every stage, with defaults applied.
struct Scenario {
    std::string model = "FreeRotor";
    std::map<std::string, double> params;
    std::string task = "full";
    std::uint64_t seed = 1;
    std::string out_dir;

    // flow
    double flow_h = 2e-3;
    std::string flow_method = "leapfrog";
    double flow_t = 1.0;
    std::vector<double> q0, p0;  // sized by the model dimension when empty

    // green
    double green_T_max = 1200;
    double green_tol = 1e-3;

    // lyapunov
    double lyap_T = 50;
    double lyap_step = 0.5;

    // weakkam
    int grid = 0;  // 0 = default per dimension (512 for n=1, 64 for n=2)
    double tau = 0.2;
    double wk_tol = 1e-5;
    int max_iter = 500;
    int sub_steps = 8;
    double window_radius = 0;
    bool refine = true;
    double barrier_t = 10;
    double patch_radius = 0.05;

    // theorem-3 check
    std::string side = "minus";
    double sampling_error = 0;  // 0 = derived from the grid spacing

    // c1 diagnostic
    int c1_bases = 16;
    int c1_samples = 0;  // 0 = default per dimension
    std::vector<double> support_p;
    double c1_T = 100;
};

namespace detail {

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

inline std::vector<double> parse_list(const std::string& v, int line) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(trim(item)));
        } catch (...) {
            throw ParseError("line " + std::to_string(line) + ": not a number: '" + item + "'");
        }
    }
    if (out.empty())
        throw ParseError("line " + std::to_string(line) + ": empty value list");
    return out;
}

inline double parse_num(const std::string& v, int line) {
    try {
        size_t used = 0;
        double x = std::stod(v, &used);
        if (trim(v.substr(used)).empty()) return x;
    } catch (...) {
    }
    throw ParseError("line " + std::to_string(line) + ": not a number: '" + v + "'");
}

inline bool parse_bool(const std::string& v, int line) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ParseError("line " + std::to_string(line) + ": expected true/false: '" + v + "'");
}

}  // namespace detail

inline Scenario parse_scenario(std::istream& is) {
    Scenario sc;
    static const std::set<std::string> sections = {"scenario", "model",   "flow", "green",
                                                   "lyapunov", "weakkam", "thm3", "c1"};
    static const std::set<std::string> tasks = {"flow",        "green",       "lyapunov",
                                                "weakkam",     "verify-thm2", "verify-thm3",
                                                "c1-diagnostic", "full"};
    static const std::set<std::string> model_keys = {"omega1", "omega2", "a1",
                                                     "a2",     "b1",     "b2"};
    std::set<std::string> seen_sections;
    std::string section = "scenario";
    std::string line;
    int lineno = 0;
    auto err = [&](const std::string& msg) {
        return ParseError("line " + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(is, line)) {
        ++lineno;
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw err("unterminated section header");
            section = detail::trim(s.substr(1, s.size() - 2));
            if (!sections.count(section)) throw err("unknown section '" + section + "'");
            if (!seen_sections.insert(section).second)
                throw err("duplicate section '" + section + "'");
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos) throw err("expected key = value");
        std::string key = detail::trim(s.substr(0, eq));
        std::string val = detail::trim(s.substr(eq + 1));
        auto num = [&] { return detail::parse_num(val, lineno); };
        auto require = [&](bool ok, const std::string& msg) {
            if (!ok) throw err(msg);
        };

        if (section == "scenario") {
            if (key == "model") {
                auto names = model_names();
                require(std::find(names.begin(), names.end(), val) != names.end(),
                        "unknown model '" + val + "'");
                sc.model = val;
            } else if (key == "task") {
                require(tasks.count(val) > 0, "unknown task '" + val + "'");
                sc.task = val;
            } else if (key == "seed") {
                double d = num();
                require(d >= 0 && d == std::floor(d), "seed must be a non-negative integer");
                sc.seed = static_cast<std::uint64_t>(d);
            } else if (key == "out") {
                sc.out_dir = val;
            } else {
                throw err("unknown key '" + key + "' in [scenario]");
            }
        } else if (section == "model") {
            require(model_keys.count(key) > 0, "unknown model parameter '" + key + "'");
            sc.params[key] = num();
        } else if (section == "flow") {
            if (key == "h") {
                sc.flow_h = num();
                require(sc.flow_h > 0 && sc.flow_h <= 0.1, "h must be in (0, 0.1]");
            } else if (key == "method") {
                require(val == "leapfrog" || val == "midpoint",
                        "method must be leapfrog or midpoint");
                sc.flow_method = val;
            } else if (key == "t") {
                sc.flow_t = num();
                require(std::abs(sc.flow_t) <= 1e3, "|t| must be at most 1e3");
            } else if (key == "q") {
                sc.q0 = detail::parse_list(val, lineno);
            } else if (key == "p") {
                sc.p0 = detail::parse_list(val, lineno);
            } else {
                throw err("unknown key '" + key + "' in [flow]");
            }
        } else if (section == "green") {
            if (key == "T_max") {
                sc.green_T_max = num();
                require(sc.green_T_max > 0, "T_max must be positive");
            } else if (key == "tol") {
                sc.green_tol = num();
                require(sc.green_tol > 0, "tol must be positive");
            } else {
                throw err("unknown key '" + key + "' in [green]");
            }
        } else if (section == "lyapunov") {
            if (key == "T") {
                sc.lyap_T = num();
                require(sc.lyap_T > 0, "T must be positive");
            } else if (key == "step") {
                sc.lyap_step = num();
                require(sc.lyap_step > 0, "step must be positive");
            } else {
                throw err("unknown key '" + key + "' in [lyapunov]");
            }
        } else if (section == "weakkam") {
            if (key == "grid") {
                double d = num();
                require(d >= 64 && d == std::floor(d), "grid must be an integer >= 64");
                sc.grid = static_cast<int>(d);
            } else if (key == "tau") {
                sc.tau = num();
                require(sc.tau >= 0.05 && sc.tau <= 0.5, "tau must be in [0.05, 0.5]");
            } else if (key == "tol") {
                sc.wk_tol = num();
                require(sc.wk_tol > 0, "tol must be positive");
            } else if (key == "max_iter") {
                double d = num();
                require(d >= 1 && d == std::floor(d), "max_iter must be a positive integer");
                sc.max_iter = static_cast<int>(d);
            } else if (key == "sub_steps") {
                double d = num();
                require(d >= 4 && d == std::floor(d), "sub_steps must be an integer >= 4");
                sc.sub_steps = static_cast<int>(d);
            } else if (key == "window_radius") {
                sc.window_radius = num();
                require(sc.window_radius >= 0 && sc.window_radius <= 0.5,
                        "window_radius must be in [0, 0.5]");
            } else if (key == "refine") {
                sc.refine = detail::parse_bool(val, lineno);
            } else if (key == "barrier_t") {
                sc.barrier_t = num();
                require(sc.barrier_t > 0 && sc.barrier_t <= 10,
                        "barrier_t must be in (0, 10]");
            } else if (key == "patch_radius") {
                sc.patch_radius = num();
                require(sc.patch_radius > 0 && sc.patch_radius <= 0.25,
                        "patch_radius must be in (0, 0.25]");
            } else {
                throw err("unknown key '" + key + "' in [weakkam]");
            }
        } else if (section == "thm3") {
            if (key == "side") {
                require(val == "minus" || val == "plus", "side must be minus or plus");
                sc.side = val;
            } else if (key == "sampling_error") {
                sc.sampling_error = num();
                require(sc.sampling_error >= 0, "sampling_error must be non-negative");
            } else {
                throw err("unknown key '" + key + "' in [thm3]");
            }
        } else if (section == "c1") {
            if (key == "bases") {
                double d = num();
                require(d >= 1 && d == std::floor(d), "bases must be a positive integer");
                sc.c1_bases = static_cast<int>(d);
            } else if (key == "samples") {
                double d = num();
                require(d >= 20 && d == std::floor(d), "samples must be an integer >= 20");
                sc.c1_samples = static_cast<int>(d);
            } else if (key == "support_p") {
                sc.support_p = detail::parse_list(val, lineno);
            } else if (key == "T") {
                sc.c1_T = num();
                require(sc.c1_T > 0, "T must be positive");
            } else {
                throw err("unknown key '" + key + "' in [c1]");
            }
        }
    }

    // cross-field validation against the model dimension
    TonelliModel m = make_model(sc.model, sc.params);
    if (!sc.q0.empty() && static_cast<int>(sc.q0.size()) != m.n)
        throw ParseError("q has " + std::to_string(sc.q0.size()) + " components, model needs " +
                         std::to_string(m.n));
    if (!sc.p0.empty() && static_cast<int>(sc.p0.size()) != m.n)
        throw ParseError("p has " + std::to_string(sc.p0.size()) + " components, model needs " +
                         std::to_string(m.n));
    if (!sc.support_p.empty() && static_cast<int>(sc.support_p.size()) != m.n)
        throw ParseError("support_p dimension does not match the model");
    if (sc.grid == 0) sc.grid = m.n == 1 ? 512 : 64;
    if (m.n == 1 && sc.grid < 128)
        throw ParseError("grid must be >= 128 for one-dimensional models");
    if (sc.c1_samples == 0) sc.c1_samples = m.n == 1 ? 4096 : 40000;
    return sc;
}

inline Scenario parse_scenario(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ParseError("cannot open scenario file: " + path);
    return parse_scenario(f);
}

}  // namespace greenkam

#endif
