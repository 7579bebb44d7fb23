#pragma once

// Numeric Birkhoff normal form at the elliptic centers of the first-return
// islands: Newton fixed-point search on the exact return map, cubic Taylor
// reconstruction in the fibered island chart (rho - 3n - 1/4, rho*psi - 1/2)
// (whose O(1/n) head is the shear x1 = x + y - 3n - 1/4, y1 = y/2 - 1/2),
// complex diagonalization of the linear part, the degree-3 homological solve,
// and the twist coefficient alpha2. An empirical rotation-number profile and
// a bounded-orbit island scan provide independent cross-checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "billiard_lab/return_map.hpp"

namespace billiard_lab {

struct NotElliptic : std::runtime_error {
    explicit NotElliptic(const std::string& what) : std::runtime_error(what) {}
};
struct ConditioningFailure : std::runtime_error {
    explicit ConditioningFailure(const std::string& what) : std::runtime_error(what) {}
};
struct Resonance : std::runtime_error {
    explicit Resonance(const std::string& what) : std::runtime_error(what) {}
};
struct OrbitEscaped : std::runtime_error {
    explicit OrbitEscaped(const std::string& what) : std::runtime_error(what) {}
};

using Cx = std::complex<double>;

// Fibered island chart around the anchor (3n + 1/4, 1/2): w = (xt, yt) with
// xt = rho - 3n - 1/4 and yt = rho*psi - 1/2 in the quadrant-I chart.
inline Point2 island_chart(int n, Point2 z) {
    const AdiabaticChart& chartI = semidisc_chart(RegionId::I);
    AdiabaticPoint<double> a = to_adiabatic(chartI, to_polar(z), 4);
    return {a.rho - 3.0 * n - 0.25, a.rho * a.psi - 0.5};
}

inline Point2 island_chart_inverse(int n, Point2 w) {
    const AdiabaticChart& chartI = semidisc_chart(RegionId::I);
    const double rho = 3.0 * n + 0.25 + w.x;
    PolarPoint p = from_adiabatic(chartI, rho, (0.5 + w.y) / rho, 4);
    return to_cartesian(p);
}

struct CubicReturnModel {
    int n = 0;
    Point2 fixed_point{};
    // linear part, quadratic (x^2, xy, y^2) and cubic (x^3, x^2 y, x y^2, y^3)
    // coefficients per output row, all in the shear chart
    std::array<std::array<double, 2>, 2> A{};
    std::array<std::array<double, 3>, 2> F2{};
    std::array<std::array<double, 4>, 2> F3{};
    double fit_residual = 0;
};

struct DiagonalizedModel {
    Cx lambda;  // unit-circle eigenvalue, Im < 0 branch
    Cx v;       // first component of the eigenvector (v, 1)
    // G1[j-2] holds G_{1,j}^k as coefficient of a^k b^{j-k}
    std::array<Cx, 3> G12{};
    std::array<Cx, 4> G13{};
};

struct BirkhoffResult {
    double alpha = 0;  // rotation angle in (0, pi), cos(alpha) = trace/2
    Cx alpha2{};       // twist coefficient
};

// ---------------------------------------------------------------------------
// Fixed point and cubic Taylor fit.
// ---------------------------------------------------------------------------

inline Point2 find_fixed_point(int n, long long cap = 1000000) {
    if (n < 20) throw std::invalid_argument("find_fixed_point: need n >= 20");
    SectorShape shape{pi_v<double>() / 2};
    Point2 z{3.0 * n - 0.75, 1.0};
    auto G = [&](Point2 p) {
        Point2 f = exact_first_return(shape, p, cap).point;
        return Point2{f.x - p.x, f.y - p.y};
    };
    const double h = 1e-7;
    for (int it = 0; it < 60; ++it) {
        Point2 g = G(z);
        if (std::abs(g.x) + std::abs(g.y) < 1e-12) {
            double tr = 0;
            {
                Point2 fx1 = G({z.x + h, z.y}), fx0 = G({z.x - h, z.y});
                Point2 fy1 = G({z.x, z.y + h}), fy0 = G({z.x, z.y - h});
                tr = (fx1.x - fx0.x) / (2 * h) + (fy1.y - fy0.y) / (2 * h) + 2;
            }
            if (std::abs(tr / 2) >= 1)
                throw NotElliptic("find_fixed_point: |trace/2| >= 1 at the result");
            return z;
        }
        Point2 gx1 = G({z.x + h, z.y}), gx0 = G({z.x - h, z.y});
        Point2 gy1 = G({z.x, z.y + h}), gy0 = G({z.x, z.y - h});
        double j11 = (gx1.x - gx0.x) / (2 * h), j12 = (gy1.x - gy0.x) / (2 * h);
        double j21 = (gx1.y - gx0.y) / (2 * h), j22 = (gy1.y - gy0.y) / (2 * h);
        double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-14)
            throw NoConvergence("find_fixed_point: singular Newton Jacobian");
        z.x -= (j22 * g.x - j12 * g.y) / det;
        z.y -= (-j21 * g.x + j11 * g.y) / det;
    }
    throw NoConvergence("find_fixed_point: Newton did not reach 1e-12");
}

namespace detail {

// dense least squares via normal equations with column scaling
inline std::vector<double> lsq_solve(const std::vector<std::vector<double>>& X,
                                     const std::vector<double>& y) {
    const size_t m = X.size(), p = X[0].size();
    std::vector<double> scale(p, 0.0);
    for (size_t j = 0; j < p; ++j) {
        for (size_t i = 0; i < m; ++i) scale[j] = std::max(scale[j], std::abs(X[i][j]));
        if (scale[j] == 0) scale[j] = 1;
    }
    std::vector<std::vector<double>> N(p, std::vector<double>(p + 1, 0.0));
    for (size_t i = 0; i < m; ++i)
        for (size_t j = 0; j < p; ++j) {
            double xj = X[i][j] / scale[j];
            for (size_t k = 0; k < p; ++k) N[j][k] += xj * X[i][k] / scale[k];
            N[j][p] += xj * y[i];
        }
    for (size_t c = 0; c < p; ++c) {
        size_t piv = c;
        for (size_t r = c + 1; r < p; ++r)
            if (std::abs(N[r][c]) > std::abs(N[piv][c])) piv = r;
        std::swap(N[c], N[piv]);
        if (std::abs(N[c][c]) < 1e-300)
            throw ConditioningFailure("lsq_solve: singular normal equations");
        for (size_t r = 0; r < p; ++r) {
            if (r == c) continue;
            double f = N[r][c] / N[c][c];
            for (size_t k = c; k <= p; ++k) N[r][k] -= f * N[c][k];
        }
    }
    std::vector<double> beta(p);
    for (size_t j = 0; j < p; ++j) beta[j] = N[j][p] / N[j][j] / scale[j];
    return beta;
}

}  // namespace detail

inline CubicReturnModel taylor_fit(int n, Point2 fixed_point, double h = 1e-2,
                                   long long cap = 1000000) {
    SectorShape shape{pi_v<double>() / 2};
    const Point2 wc = island_chart(n, fixed_point);
    std::vector<std::vector<double>> X;
    std::vector<double> y1s, y2s;
    for (int i = -3; i <= 3; ++i) {
        for (int j = -3; j <= 3; ++j) {
            Point2 z = island_chart_inverse(n, {wc.x + h * i, wc.y + h * j});
            // regress on the realized chart offsets, not the requested grid
            Point2 w = island_chart(n, z);
            Point2 f = exact_first_return(shape, z, cap).point;
            Point2 fw = island_chart(n, f);
            double a = w.x - wc.x, b = w.y - wc.y;
            X.push_back({1.0, a, b, a * a, a * b, b * b, a * a * a, a * a * b,
                         a * b * b, b * b * b});
            y1s.push_back(fw.x - wc.x);
            y2s.push_back(fw.y - wc.y);
        }
    }
    std::vector<double> c1 = detail::lsq_solve(X, y1s);
    std::vector<double> c2 = detail::lsq_solve(X, y2s);

    CubicReturnModel m;
    m.n = n;
    m.fixed_point = fixed_point;
    m.A = {{{c1[1], c1[2]}, {c2[1], c2[2]}}};
    m.F2 = {{{c1[3], c1[4], c1[5]}, {c2[3], c2[4], c2[5]}}};
    m.F3 = {{{c1[6], c1[7], c1[8], c1[9]}, {c2[6], c2[7], c2[8], c2[9]}}};
    double worst = 0;
    for (size_t i = 0; i < X.size(); ++i) {
        double p1 = 0, p2 = 0;
        for (size_t j = 0; j < c1.size(); ++j) {
            p1 += c1[j] * X[i][j];
            p2 += c2[j] * X[i][j];
        }
        worst = std::max({worst, std::abs(p1 - y1s[i]), std::abs(p2 - y2s[i])});
    }
    m.fit_residual = worst;
    if (worst > 1e-7)
        throw ConditioningFailure("taylor_fit: stencil residual " +
                                  std::to_string(worst) + " exceeds 1e-7");
    return m;
}

// ---------------------------------------------------------------------------
// Complex diagonalization and the twist coefficient.
// ---------------------------------------------------------------------------

namespace detail {

inline double binom(int n, int k) {
    double b = 1;
    for (int i = 0; i < k; ++i) b = b * (n - i) / (i + 1);
    return b;
}

// expand real coefficients of a degree-j homogeneous polynomial in (x1, y1)
// into coefficients over a^k b^{j-k} under x1 = v a + conj(v) b, y1 = a + b
template <size_t J1>
std::array<Cx, J1> complexify(const std::array<double, J1>& coeffs, Cx v) {
    constexpr int j = int(J1) - 1;
    std::array<Cx, J1> out{};
    for (int q = 0; q <= j; ++q) {      // monomial x1^{j-q} y1^q, coeffs[?]
        int p = j - q;                   // power of x1
        double c = coeffs[q];            // coeffs ordered x^j, x^{j-1} y, ..
        if (c == 0) continue;
        for (int s = 0; s <= p; ++s) {
            Cx xs = binom(p, s) * std::pow(v, s) * std::pow(std::conj(v), p - s);
            for (int t = 0; t <= q; ++t) {
                out[s + t] += c * xs * binom(q, t);
            }
        }
    }
    return out;
}

}  // namespace detail

inline DiagonalizedModel diagonalize(const CubicReturnModel& m) {
    const double tr = m.A[0][0] + m.A[1][1];
    if (std::abs(tr / 2) >= 1)
        throw NotElliptic("diagonalize: |trace/2| >= 1");
    DiagonalizedModel d;
    d.lambda = Cx(tr / 2, -std::sqrt(1 - tr * tr / 4));
    if (std::abs(m.A[1][0]) < 1e-300)
        throw NotElliptic("diagonalize: defective linear part");
    d.v = (d.lambda - m.A[1][1]) / m.A[1][0];
    const Cx det = d.v - std::conj(d.v);

    std::array<Cx, 3> f2a = detail::complexify<3>(m.F2[0], d.v);
    std::array<Cx, 3> f2b = detail::complexify<3>(m.F2[1], d.v);
    std::array<Cx, 4> f3a = detail::complexify<4>(m.F3[0], d.v);
    std::array<Cx, 4> f3b = detail::complexify<4>(m.F3[1], d.v);
    for (int k = 0; k < 3; ++k) d.G12[k] = (f2a[k] - std::conj(d.v) * f2b[k]) / det;
    for (int k = 0; k < 4; ++k) d.G13[k] = (f3a[k] - std::conj(d.v) * f3b[k]) / det;
    return d;
}

inline BirkhoffResult birkhoff_twist(const DiagonalizedModel& d) {
    const Cx L = d.lambda;
    for (int k = 1; k <= 4; ++k)
        if (std::abs(std::pow(L, k) - 1.0) < 1e-6)
            throw Resonance("birkhoff_twist: lambda^" + std::to_string(k) +
                            " too close to 1");
    const Cx G0 = d.G12[0], G1 = d.G12[1], G2 = d.G12[2];
    BirkhoffResult out;
    out.alpha = std::acos(std::clamp(L.real(), -1.0, 1.0));
    out.alpha2 = -Cx(0, 1) * (G2 * G1 / (L * L * (L - 1.0)) +
                              std::norm(G1) / (L - 1.0) +
                              2.0 * G1 * G2 / (L * (1.0 - L)) +
                              2.0 * std::norm(G0) / (L * L * L - 1.0) +
                              d.G13[2] / L);
    return out;
}

// ---------------------------------------------------------------------------
// Degree-3 homological solve and an off-normal-form composition check.
// ---------------------------------------------------------------------------

struct ConjugacyCoeffs {
    std::array<Cx, 3> a2{};  // phi2 coefficients of xi^l eta^{2-l}, l = index
    std::array<Cx, 4> a3{};  // phi3 likewise; a3[2] = 0 (resonant term)
    Cx alpha2{};
};

inline ConjugacyCoeffs solve_homological(const DiagonalizedModel& d) {
    const Cx L = d.lambda;
    for (int k = 1; k <= 4; ++k)
        if (std::abs(std::pow(L, k) - 1.0) < 1e-6)
            throw Resonance("solve_homological: resonant denominator");
    ConjugacyCoeffs c;
    const Cx G0 = d.G12[0], G1 = d.G12[1], G2 = d.G12[2];
    c.a2[2] = G2 / (L * (L - 1.0));
    c.a2[1] = G1 / (1.0 - L);
    c.a2[0] = G0 / (1.0 / (L * L) - L);
    const Cx b20 = std::conj(c.a2[0]), b21 = std::conj(c.a2[1]),
             b22 = std::conj(c.a2[2]);
    c.a3[3] = (G1 * b20 + d.G13[3] + 2.0 * c.a2[2] * G2) / (L * L * L - L);
    c.a3[1] = ((c.a2[1] + b22) * G1 + d.G13[1] + 2.0 * c.a2[0] * G2 + 2.0 * b21 * G0) /
              (1.0 / L - L);
    c.a3[0] = (G1 * c.a2[0] + d.G13[0] + 2.0 * b22 * G0) / (1.0 / (L * L * L) - L);
    c.alpha2 = birkhoff_twist(d).alpha2;
    return c;
}

namespace detail {

// bivariate complex polynomial truncated at total degree 3; index [d][k] holds
// the coefficient of xi^k eta^{d-k}
struct Poly3 {
    std::array<std::array<Cx, 4>, 4> c{};
    static Poly3 var(int which) {
        Poly3 p;
        p.c[1][which] = 1;
        return p;
    }
    Poly3 operator+(const Poly3& o) const {
        Poly3 r;
        for (int d = 0; d <= 3; ++d)
            for (int k = 0; k <= d; ++k) r.c[d][k] = c[d][k] + o.c[d][k];
        return r;
    }
    Poly3 operator*(Cx s) const {
        Poly3 r;
        for (int d = 0; d <= 3; ++d)
            for (int k = 0; k <= d; ++k) r.c[d][k] = c[d][k] * s;
        return r;
    }
    Poly3 operator*(const Poly3& o) const {
        Poly3 r;
        for (int d1 = 0; d1 <= 3; ++d1)
            for (int k1 = 0; k1 <= d1; ++k1) {
                if (c[d1][k1] == Cx(0)) continue;
                for (int d2 = 0; d2 + d1 <= 3; ++d2)
                    for (int k2 = 0; k2 <= d2; ++k2)
                        r.c[d1 + d2][k1 + k2] += c[d1][k1] * o.c[d2][k2];
            }
        return r;
    }
};

}  // namespace detail

// Compose the diagonalized cubic map with the solved conjugacy and measure the
// largest coefficient that the degree-3 normal form does not allow; the solve
// is exact at this degree, so the result sits at round-off level.
inline double off_normal_form_residual(const DiagonalizedModel& d,
                                       const ConjugacyCoeffs& c) {
    using detail::Poly3;
    const Cx L = d.lambda;
    Poly3 xi = Poly3::var(1), eta = Poly3::var(0);

    auto phi = [&](bool conj_side) {
        Poly3 A = conj_side ? eta : xi;
        for (int l = 0; l <= 2; ++l) {
            Poly3 mono;
            mono.c[2][conj_side ? 2 - l : l] = 1;  // xi^l eta^{2-l} or mirrored
            A = A + mono * (conj_side ? std::conj(c.a2[l]) : c.a2[l]);
        }
        for (int l = 0; l <= 3; ++l) {
            Poly3 mono;
            mono.c[3][conj_side ? 3 - l : l] = 1;
            A = A + mono * (conj_side ? std::conj(c.a3[l]) : c.a3[l]);
        }
        return A;
    };
    Poly3 a_of = phi(false);   // a(xi, eta)
    Poly3 b_of = phi(true);    // b(xi, eta) = conjugate-mirrored coefficients

    // push (a, b) through the diagonalized map
    auto apply_row = [&](bool second) {
        Poly3 out = (second ? b_of : a_of) * (second ? 1.0 / L : L);
        for (int j = 2; j <= 3; ++j) {
            for (int k = 0; k <= j; ++k) {
                Cx g = (j == 2) ? d.G12[k] : d.G13[k];
                if (second) g = std::conj(g);
                Poly3 term;
                term.c[0][0] = 1;
                const Poly3& first = second ? b_of : a_of;
                const Poly3& other = second ? a_of : b_of;
                for (int i = 0; i < k; ++i) term = term * first;
                for (int i = 0; i < j - k; ++i) term = term * other;
                out = out + term * g;
            }
        }
        return out;
    };
    Poly3 a_img = apply_row(false);
    Poly3 b_img = apply_row(true);

    // target: a(N(xi, eta)), N the normal form xi' = L xi + i L alpha2 xi^2 eta
    Poly3 nxi = xi * L, neta = eta * (1.0 / L);
    {
        Poly3 m;
        m.c[3][2] = Cx(0, 1) * L * c.alpha2;
        nxi = nxi + m;
        Poly3 m2;
        m2.c[3][1] = Cx(0, -1) * (1.0 / L) * std::conj(c.alpha2);
        neta = neta + m2;
    }
    auto compose_target = [&](bool conj_side) {
        Poly3 A = conj_side ? neta : nxi;
        for (int l = 0; l <= 2; ++l) {
            Cx coef = conj_side ? std::conj(c.a2[l]) : c.a2[l];
            Poly3 term;
            term.c[0][0] = 1;
            const Poly3& first = conj_side ? neta : nxi;
            const Poly3& other = conj_side ? nxi : neta;
            for (int i = 0; i < l; ++i) term = term * first;
            for (int i = 0; i < 2 - l; ++i) term = term * other;
            A = A + term * coef;
        }
        for (int l = 0; l <= 3; ++l) {
            Cx coef = conj_side ? std::conj(c.a3[l]) : c.a3[l];
            Poly3 term;
            term.c[0][0] = 1;
            const Poly3& first = conj_side ? neta : nxi;
            const Poly3& other = conj_side ? nxi : neta;
            for (int i = 0; i < l; ++i) term = term * first;
            for (int i = 0; i < 3 - l; ++i) term = term * other;
            A = A + term * coef;
        }
        return A;
    };
    Poly3 a_tgt = compose_target(false);
    Poly3 b_tgt = compose_target(true);

    double worst = 0;
    for (int deg = 1; deg <= 3; ++deg)
        for (int k = 0; k <= deg; ++k) {
            worst = std::max(worst, std::abs(a_img.c[deg][k] - a_tgt.c[deg][k]));
            worst = std::max(worst, std::abs(b_img.c[deg][k] - b_tgt.c[deg][k]));
        }
    return worst;
}

// ---------------------------------------------------------------------------
// Independent empirical estimators.
// ---------------------------------------------------------------------------

struct RotationSample {
    double radius2 = 0;  // mean squared modulus of the diagonal coordinate
    double rotation = 0; // mean angle advance per return, in (0, pi)
};

inline std::vector<RotationSample> rotation_profile(int n,
                                                    const std::vector<double>& radii,
                                                    long long returns = 10000,
                                                    long long cap = 1000000) {
    SectorShape shape{pi_v<double>() / 2};
    Point2 fp = find_fixed_point(n, cap);
    CubicReturnModel model = taylor_fit(n, fp);
    DiagonalizedModel diag = diagonalize(model);
    const Cx det = diag.v - std::conj(diag.v);
    const Point2 wc = island_chart(n, fp);

    auto to_a = [&](Point2 z) {
        Point2 w = island_chart(n, z);
        return (Cx(w.x - wc.x) - std::conj(diag.v) * Cx(w.y - wc.y)) / det;
    };
    const double bound = 0.1;  // |a| escape guard, far outside the island

    std::vector<RotationSample> out;
    for (double r : radii) {
        // a = b = r maps to w = (2 Re(v) r, 2 r)
        Point2 z = island_chart_inverse(
            n, {wc.x + 2 * diag.v.real() * r, wc.y + 2 * r});
        Cx a = to_a(z);
        double sum_adv = 0, sum_r2 = 0;
        for (long long k = 0; k < returns; ++k) {
            z = exact_first_return(shape, z, cap).point;
            Cx a1 = to_a(z);
            if (std::abs(a1) > bound)
                throw OrbitEscaped("rotation_profile: orbit left the island region");
            sum_adv += std::arg(a1 / a);
            sum_r2 += std::norm(a1);
            a = a1;
        }
        RotationSample s;
        s.radius2 = sum_r2 / returns;
        // the diagonal coordinate advances clockwise; report the positive angle
        s.rotation = -sum_adv / returns;
        out.push_back(s);
    }
    return out;
}

inline double island_scan(int n, int grid = 6, long long horizon = 10000,
                          double scale = 0.5, int threads = 1,
                          long long cap = 1000000) {
    SectorShape shape{pi_v<double>() / 2};
    Point2 fp = find_fixed_point(n, cap);
    const Point2 wc = island_chart(n, fp);
    const double hx = 9.0 / 1024, hy = 3.0 / 2048;
    const double diam = 2 * std::hypot(hx, hy);

    std::vector<int> bounded(grid * grid, 0);
    auto run_cell = [&](int idx) {
        int i = idx / grid, j = idx % grid;
        double x1 = wc.x + scale * hx * (2.0 * i / (grid - 1) - 1);
        double y1 = wc.y + scale * hy * (2.0 * j / (grid - 1) - 1);
        Point2 z;
        try {
            z = island_chart_inverse(n, {x1, y1});
        } catch (const std::exception&) {
            return;
        }
        for (long long k = 0; k < horizon; ++k) {
            try {
                z = exact_first_return(shape, z, cap).point;
                Point2 w = island_chart(n, z);
                if (std::hypot(w.x - wc.x, w.y - wc.y) > 2 * diam) return;
            } catch (const std::exception&) {
                return;
            }
        }
        bounded[idx] = 1;
    };
    if (threads <= 1) {
        for (int idx = 0; idx < grid * grid; ++idx) run_cell(idx);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (int idx = t; idx < grid * grid; idx += threads) run_cell(idx);
            });
        for (auto& th : pool) th.join();
    }
    int kept = 0;
    for (int b : bounded) kept += b;
    return double(kept) / (grid * grid);
}

}  // namespace billiard_lab
