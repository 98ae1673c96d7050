#ifndef GREENKAM_COMMON_HPP
#define GREENKAM_COMMON_HPP

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>

namespace greenkam {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// ---- error taxonomy ----------------------------------------------------

struct ModelDomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IntegrationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Conjugate vector encountered: the propagated vertical ceased to be a
// graph over the horizontal.
struct ConjugatePointError : std::runtime_error {
    double blowup_time;
    ConjugatePointError(const std::string& msg, double t)
        : std::runtime_error(msg), blowup_time(t) {}
};

struct LimitNotReachedError : std::runtime_error {
    double tail_difference;
    LimitNotReachedError(const std::string& msg, double tail)
        : std::runtime_error(msg), tail_difference(tail) {}
};

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- torus arithmetic (unit torus, fundamental domain [0,1)^n) --------

inline double wrap01(double x) {
    double y = x - std::floor(x);
    if (y >= 1.0) y = 0.0;  // guard against floor rounding
    return y;
}

inline Vec wrap01(Vec q) {
    for (int i = 0; i < q.size(); ++i) q[i] = wrap01(q[i]);
    return q;
}

// Minimal-image difference a-b, each component in [-1/2, 1/2).
inline Vec torus_diff(const Vec& a, const Vec& b) {
    Vec d = a - b;
    for (int i = 0; i < d.size(); ++i) d[i] -= std::round(d[i]);
    return d;
}

inline double torus_dist(const Vec& a, const Vec& b) {
    return torus_diff(a, b).norm();
}

inline Mat symmetrize(const Mat& s) { return 0.5 * (s + s.transpose()); }

// Standard symplectic matrix J, block order (dq; dp).
inline Mat symplectic_j(int n) {
    Mat j = Mat::Zero(2 * n, 2 * n);
    j.topRightCorner(n, n) = Mat::Identity(n, n);
    j.bottomLeftCorner(n, n) = -Mat::Identity(n, n);
    return j;
}

// || M^T J M - J ||, the symplecticity defect of a cocycle factor.
inline double symplectic_defect(const Mat& m) {
    int n = static_cast<int>(m.rows()) / 2;
    Mat j = symplectic_j(n);
    return (m.transpose() * j * m - j).norm();
}

}  // namespace greenkam

#endif
