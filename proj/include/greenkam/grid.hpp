#ifndef GREENKAM_GRID_HPP
#define GREENKAM_GRID_HPP

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "greenkam/common.hpp"

namespace greenkam {

/// Scalar values on a uniform grid over [0,1)^n with a periodic
/// interpolation rule. Node (i) sits at q = i/m (row-major for n=2).
struct GridFunction {
    enum class Interp { Linear, CubicPeriodic };

    int n = 1;
    int m = 0;
    Interp interp = Interp::CubicPeriodic;
    std::vector<double> values;

    GridFunction() = default;
    GridFunction(int n_, int m_, Interp ip = Interp::CubicPeriodic)
        : n(n_), m(m_), interp(ip), values(static_cast<size_t>(std::pow(m_, n_)), 0.0) {}

    double spacing() const { return 1.0 / m; }
    size_t size() const { return values.size(); }

    size_t index(int i, int j = 0) const {
        auto w = [this](int k) { return ((k % m) + m) % m; };
        return n == 1 ? static_cast<size_t>(w(i))
                      : static_cast<size_t>(w(i)) * m + static_cast<size_t>(w(j));
    }
    double at(int i, int j = 0) const { return values[index(i, j)]; }
    double& at(int i, int j = 0) { return values[index(i, j)]; }

    Vec node(size_t flat) const {
        Vec q(n);
        if (n == 1) {
            q[0] = static_cast<double>(flat) / m;
        } else {
            q[0] = static_cast<double>(flat / m) / m;
            q[1] = static_cast<double>(flat % m) / m;
        }
        return q;
    }

    double value(const Vec& q) const {
        if (n == 1) return interp1(q[0], [this](int i) { return at(i); });
        // tensor rule: interpolate along axis 1 for the needed axis-0 stencil
        if (interp == Interp::Linear) {
            double x = q[0] * m;
            int i0 = static_cast<int>(std::floor(x));
            double fx = x - i0;
            auto row = [&](int i) { return interp1(q[1], [&](int j) { return at(i, j); }); };
            return (1 - fx) * row(i0) + fx * row(i0 + 1);
        }
        double x = q[0] * m;
        int i0 = static_cast<int>(std::floor(x));
        double fx = x - i0;
        double rows[4];
        for (int s = -1; s <= 2; ++s)
            rows[s + 1] = interp1(q[1], [&](int j) { return at(i0 + s, j); });
        return catmull_rom(rows[0], rows[1], rows[2], rows[3], fx);
    }

    double min_value() const {
        double v = values[0];
        for (double x : values) v = std::min(v, x);
        return v;
    }
    double max_value() const {
        double v = values[0];
        for (double x : values) v = std::max(v, x);
        return v;
    }

    // Centered derivative at a node, one component per axis.
    Vec gradient_at_node(size_t flat) const {
        Vec g(n);
        double d = spacing();
        if (n == 1) {
            int i = static_cast<int>(flat);
            g[0] = (at(i + 1) - at(i - 1)) / (2 * d);
        } else {
            int i = static_cast<int>(flat / m), j = static_cast<int>(flat % m);
            g[0] = (at(i + 1, j) - at(i - 1, j)) / (2 * d);
            g[1] = (at(i, j + 1) - at(i, j - 1)) / (2 * d);
        }
        return g;
    }

    std::string to_text() const {
        std::ostringstream os;
        os << "# greenkam grid function\n";
        os << "n = " << n << "\n";
        os << "m = " << m << "\n";
        os << "interpolation = "
           << (interp == Interp::Linear ? "linear" : "cubic-periodic") << "\n";
        os.precision(17);
        for (double v : values) os << v << "\n";
        return os.str();
    }

    static GridFunction from_text(std::istream& is) {
        GridFunction g;
        std::string line;
        int header = 0;
        while (header < 3 && std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            auto eq = line.find('=');
            if (eq == std::string::npos) throw ParseError("grid header: missing '='");
            std::string key = line.substr(0, eq);
            std::string val = line.substr(eq + 1);
            auto trim = [](std::string s) {
                size_t a = s.find_first_not_of(" \t");
                size_t b = s.find_last_not_of(" \t\r");
                return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
            };
            key = trim(key);
            val = trim(val);
            if (key == "n")
                g.n = std::stoi(val);
            else if (key == "m")
                g.m = std::stoi(val);
            else if (key == "interpolation")
                g.interp = (val == "linear") ? Interp::Linear : Interp::CubicPeriodic;
            else
                throw ParseError("grid header: unknown key '" + key + "'");
            ++header;
        }
        size_t count = static_cast<size_t>(std::pow(g.m, g.n));
        g.values.reserve(count);
        while (g.values.size() < count && std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            g.values.push_back(std::stod(line));
        }
        if (g.values.size() != count) throw ParseError("grid function: value count mismatch");
        return g;
    }

  private:
    static double catmull_rom(double f0, double f1, double f2, double f3, double t) {
        double a = -0.5 * f0 + 1.5 * f1 - 1.5 * f2 + 0.5 * f3;
        double b = f0 - 2.5 * f1 + 2.0 * f2 - 0.5 * f3;
        double c = -0.5 * f0 + 0.5 * f2;
        return ((a * t + b) * t + c) * t + f1;
    }

    template <typename F>
    double interp1(double q, F fetch) const {
        double x = q * m;
        int i0 = static_cast<int>(std::floor(x));
        double t = x - i0;
        if (interp == Interp::Linear) return (1 - t) * fetch(i0) + t * fetch(i0 + 1);
        return catmull_rom(fetch(i0 - 1), fetch(i0), fetch(i0 + 1), fetch(i0 + 2), t);
    }
};

}  // namespace greenkam

#endif
