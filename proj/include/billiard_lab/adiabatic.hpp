#pragma once

// Adiabatic coordinates (rho, psi) per continuity region, in which F^2 is a
// near-translation: rho is almost conserved and psi advances by 1/rho.
//
//   rho = r Phi1 + Phi2 + Phi3/r + Phi4/r^2
//   psi = Psi + Psi1/r + Psi2/r^2 + Psi3/r^3
//
// Phi1..Phi3 and Psi..Psi2 have closed forms (semi-disc; Phi1, Phi2, Psi,
// Psi1 for the general sector). The closed-form tier pairs with the published
// b2 coefficient; because the exact map's b2 differs (see expansion.hpp), two
// closed-form correction layers delta_phi3 and delta_psi2 are added so that
// the chart actually attains the claimed drift orders under the exact map.
// The last layers Phi4 and Psi3 have no closed form anywhere; they are built
// numerically: the residual forcing is extracted from the exact composition
// at large radius (Richardson extrapolation in multiprecision) and integrated
// as a forced linear ODE.

#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "billiard_lab/expansion.hpp"
#include "billiard_lab/geometry.hpp"
#include "billiard_lab/jet.hpp"
#include "billiard_lab/mp.hpp"

namespace billiard_lab {

struct ResidualTooLarge : std::runtime_error {
    explicit ResidualTooLarge(const std::string& what) : std::runtime_error(what) {}
};
struct NoConvergence : std::runtime_error {
    explicit NoConvergence(const std::string& what) : std::runtime_error(what) {}
};
struct RegionExit : std::runtime_error {
    explicit RegionExit(const std::string& what) : std::runtime_error(what) {}
};

enum class ChartFamily { semidisc, sector };

namespace detail {
template <class S> struct underlying_scalar { using type = S; };
template <class R> struct underlying_scalar<Jet<R>> { using type = R; };

template <class S>
S pi_as() {
    return S(pi<typename underlying_scalar<S>::type>());
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Closed forms, semi-disc regions I-IV. Scalar S may be a Jet for analytic
// derivatives. Domains: regions I/III live on theta in [0, pi/2] with the
// initial conditions at 0; regions II/IV on [pi/2, pi] with them at pi.
// ---------------------------------------------------------------------------

namespace chartfn {

template <class S> S phi1(RegionId, S t) {
    using std::sin;
    return S(1) + sin(t);
}

template <class S> S phi2(RegionId reg, S t) {
    using std::cos;
    S c = cos(t);
    switch (reg) {
        case RegionId::I: return S(1) - c;
        case RegionId::II: return S(1) + c;
        case RegionId::III: return S(-1) + c;
        case RegionId::IV: return S(-1) - c;
        default: throw WrongRegion("phi2: chart regions are I-IV");
    }
}

template <class S> S phi3(RegionId reg, S t) {
    using std::sin;
    S s = sin(t);
    switch (reg) {
        case RegionId::I:
        case RegionId::IV: return (S(2) * s * s * s - s) / (S(6) * (S(1) + s));
        case RegionId::II:
        case RegionId::III:
            return (S(2) * s * s * s - S(12) * s * s - s) / (S(6) * (S(1) + s));
        default: throw WrongRegion("phi3: chart regions are I-IV");
    }
}

// Correction layer: the closed-form phi3 above solves its equation with the
// published b2; the exact map needs the solution with the exact b2. The
// difference solves  d' b - a d + Phi1' (b2_exact - b2_published) = 0  and has
// the closed forms below (checked by the test suite against that equation).
template <class S> S delta_phi3(RegionId reg, S t) {
    using std::sin;
    S s = sin(t);
    switch (reg) {
        case RegionId::I:
        case RegionId::IV: return -s / (S(3) * (S(1) + s));
        case RegionId::II:
        case RegionId::III: return s * (S(6) * s - S(1)) / (S(3) * (S(1) + s));
        default: throw WrongRegion("delta_phi3: chart regions are I-IV");
    }
}

template <class S> S psi(RegionId, S t) {
    using std::cos;
    using std::sin;
    S s = sin(t), c = cos(t);
    S d = S(1) + s;
    return S(1) / S(6) - (c * c + S(2) * c + s * c - S(2) * s - S(2)) / (S(6) * d * d);
}

template <class S> S psi1(RegionId reg, S t) {
    using std::cos;
    using std::sin;
    using std::sqrt;
    S sh = sin(t / S(2)), ch = cos(t / S(2));
    S d = S(1) + sin(t);
    S d52 = d * d * sqrt(d);
    switch (reg) {
        case RegionId::I: return S(-2) * sh * sh * sh / (S(3) * d52);
        case RegionId::II: return S(2) * ch * ch * ch / (S(3) * d52);
        case RegionId::III: return S(2) * sh * sh * sh / (S(3) * d52);
        case RegionId::IV: return S(-2) * ch * ch * ch / (S(3) * d52);
        default: throw WrongRegion("psi1: chart regions are I-IV");
    }
}

template <class S> S psi2(RegionId reg, S t) {
    using std::cos;
    using std::sin;
    S s = sin(t), c = cos(t);
    S c2 = c * c, c3 = c2 * c, c4 = c2 * c2;
    S d = S(1) + s;
    S d5 = d * d * d * d * d;
    switch (reg) {
        case RegionId::I:
            return (S(20) * s - S(33) * c - S(33) * s * c + S(12) * c2 + S(7) * c3 -
                    S(6) * c4 + S(22) * c2 * s - S(6) * c3 * s + S(20)) /
                   (S(36) * d5);
        case RegionId::II: {
            S pi_ = detail::pi_as<S>();
            S num = S(-360) * t + S(360) * pi_ + S(132) * cos(S(2) * t) +
                    S(19) * cos(S(3) * t) - S(144) * sin(S(2) * t) + S(2) * sin(S(3) * t) -
                    S(219) * c - S(462) * s + S(3) * cos(S(4) * t) - S(3) * sin(S(4) * t) +
                    S(216) * t * cos(S(2) * t) + S(36) * t * sin(S(3) * t) +
                    S(540) * pi_ * s - S(540) * t * s - S(216) * pi_ * cos(S(2) * t) -
                    S(36) * pi_ * sin(S(3) * t) - S(335);
            return num / (S(144) * d5);
        }
        case RegionId::III:
            return (S(-144) * t - S(69) * c + S(116) * s + S(108) * t * c2 -
                    S(69) * c * s - S(60) * c2 + S(19) * c3 - S(6) * c4 - S(2) * c2 * s -
                    S(6) * c3 * s - S(144) * t * s + S(36) * t * c2 * s + S(116)) /
                   (S(36) * d5);
        case RegionId::IV:
            return (S(-33) * c - S(20) * s - S(33) * c * s - S(12) * c2 + S(7) * c3 +
                    S(6) * c4 - S(22) * c2 * s - S(6) * c3 * s - S(20)) /
                   (S(36) * d5);
        default: throw WrongRegion("psi2: chart regions are I-IV");
    }
}

// Forcing of the delta_psi2 correction layer (closed form; see delta_phi3).
template <class S> S delta_psi2_forcing(RegionId reg, S t) {
    S db2 = semidisc::b2_exact(reg, t) - semidisc::b2_published(reg, t);
    S p1 = phi1(reg, t);
    S psi_deriv = S(1) / (semidisc::b(reg, t) * p1);
    return psi_deriv * db2 + delta_phi3(reg, t) / (p1 * p1);
}

// ---------------------------------------------------------------------------
// Closed forms, sector regions I-IV (head terms only).
// Domains: I/III on [0, beta] with initial conditions at beta; II/IV on
// [pi - beta, pi] with them at pi - beta.
// ---------------------------------------------------------------------------

template <class S> S sector_phi1(S beta, RegionId reg, S t) {
    using std::cos;
    using std::sin;
    switch (reg) {
        case RegionId::I:
        case RegionId::III: {
            S h = cos((beta - t) / S(2));
            return h * h;
        }
        case RegionId::II:
        case RegionId::IV: {
            S h = sin((beta + t) / S(2));
            return h * h;
        }
        default: throw WrongRegion("sector_phi1: chart regions are I-IV");
    }
}

template <class S> S sector_phi2(S beta, RegionId reg, S t) {
    using std::sin;
    switch (reg) {
        case RegionId::I: return -sin(beta - t) / S(2);
        case RegionId::III: return sin(beta - t) / S(2);
        case RegionId::II: return sin(beta + t) / S(2);
        case RegionId::IV: return -sin(beta + t) / S(2);
        default: throw WrongRegion("sector_phi2: chart regions are I-IV");
    }
}

template <class S> S sector_psi(S beta, RegionId reg, S t) {
    using std::cos;
    using std::sin;
    switch (reg) {
        case RegionId::I:
        case RegionId::III: {
            S u = sin((beta - t) / S(2)) / cos((beta - t) / S(2));
            return -u * u * u / S(6) - u / S(2);
        }
        case RegionId::II:
        case RegionId::IV: {
            S u = cos((beta + t) / S(2)) / sin((beta + t) / S(2));
            return -u * u * u / S(6) - u / S(2);
        }
        default: throw WrongRegion("sector_psi: chart regions are I-IV");
    }
}

template <class S> S sector_psi1(S beta, RegionId reg, S t) {
    using std::cos;
    S sgn = (reg == RegionId::I || reg == RegionId::II) ? S(1) : S(-1);
    switch (reg) {
        case RegionId::I:
        case RegionId::III: {
            S h = cos((beta - t) / S(2));
            S num = cos((beta - t) / S(2)) - cos(S(3) * (beta - t) / S(2));
            return sgn * -num / (S(16) * h * h * h * h * h);
        }
        case RegionId::II:
        case RegionId::IV: {
            S num = cos(beta + t) + S(1);
            S den = cos(S(2) * (beta + t)) - S(4) * cos(beta + t) + S(3);
            return sgn * num / den;
        }
        default: throw WrongRegion("sector_psi1: chart regions are I-IV");
    }
}

}  // namespace chartfn

// ---------------------------------------------------------------------------
// Residuals of the defining first-order ODE system, evaluated analytically
// with jets. All six vanish identically for the closed forms.
// ---------------------------------------------------------------------------

inline std::array<double, 6> semidisc_ode_residuals(RegionId reg, double t) {
    using J = Jet<double>;
    J th = J::variable(t);
    J a = semidisc::a(reg, th), a1 = semidisc::a1(reg, th), a2 = semidisc::a2(reg, th);
    J b = semidisc::b(reg, th), b1 = semidisc::b1(reg, th), b2 = semidisc::b2_published(reg, th);
    J f1 = chartfn::phi1(reg, th), f2 = chartfn::phi2(reg, th), f3 = chartfn::phi3(reg, th);
    J ps = chartfn::psi(reg, th), ps1 = chartfn::psi1(reg, th), ps2 = chartfn::psi2(reg, th);

    double eq1 = (f1.d1() * b.value() + f1.value() * a.value());
    double eq2 = f2.d1() * b.value() + f1.d1() * b1.value() +
                 f1.d2() * b.value() * b.value() / 2 + a.value() * f1.d1() * b.value() +
                 f1.value() * a1.value();
    double eq3 = f3.d1() * b.value() + f1.d3() * b.value() * b.value() * b.value() / 6 +
                 f1.d2() * (b.value() * b1.value() + a.value() * b.value() * b.value() / 2) +
                 f1.d1() * (a1.value() * b.value() + a.value() * b1.value() + b2.value()) +
                 f1.value() * a2.value() + f2.d2() * b.value() * b.value() / 2 +
                 f2.d1() * b1.value() - f3.value() * a.value();
    double eq4 = b.value() * ps.d1() - 1.0 / f1.value();
    double eq5 = b.value() * ps1.d1() + b.value() * b.value() * ps.d2() / 2 +
                 b1.value() * ps.d1() + f2.value() / (f1.value() * f1.value()) -
                 a.value() * ps1.value();
    double eq6 = b.value() * ps2.d1() +
                 b.value() * b.value() * b.value() * ps.d3() / 6 +
                 b.value() * b1.value() * ps.d2() + b2.value() * ps.d1() +
                 (a.value() * a.value() - a1.value()) * ps1.value() +
                 b.value() * b.value() * ps1.d2() / 2 +
                 ps1.d1() * (b1.value() - a.value() * b.value()) -
                 2 * a.value() * ps2.value() +
                 (f1.value() * f3.value() - f2.value() * f2.value()) /
                     (f1.value() * f1.value() * f1.value());
    return {eq1, eq2, eq3, eq4, eq5, eq6};
}

// Residuals of the two correction-layer equations (also identically zero).
inline std::array<double, 2> semidisc_correction_residuals(RegionId reg, double t) {
    using J = Jet<double>;
    J th = J::variable(t);
    J a = semidisc::a(reg, th), b = semidisc::b(reg, th);
    J f1 = chartfn::phi1(reg, th);
    J d3 = chartfn::delta_phi3(reg, th);
    J db2 = semidisc::b2_exact(reg, th) - semidisc::b2_published(reg, th);
    double eqA = d3.d1() * b.value() - a.value() * d3.value() + f1.d1() * db2.value();
    // delta_psi2 itself is integrated numerically; here only its forcing is
    // closed form, so check the ingredient identity Psi' = 1/(b Phi1)
    J ps = chartfn::psi(reg, th);
    double eqB = b.value() * ps.d1() - 1.0 / f1.value();
    return {eqA, eqB};
}

inline std::array<double, 4> sector_ode_residuals(double beta, RegionId reg, double t) {
    using J = Jet<double>;
    J th = J::variable(t);
    J bt(beta);
    J a = sector::a(bt, reg, th), a1 = sector::a1(bt, reg, th);
    J b = sector::b(bt, reg, th), b1 = sector::b1(bt, reg, th);
    J f1 = chartfn::sector_phi1(bt, reg, th), f2 = chartfn::sector_phi2(bt, reg, th);
    J ps = chartfn::sector_psi(bt, reg, th), ps1 = chartfn::sector_psi1(bt, reg, th);
    double eq1 = f1.d1() * b.value() + f1.value() * a.value();
    double eq2 = f2.d1() * b.value() + f1.d1() * b1.value() +
                 f1.d2() * b.value() * b.value() / 2 + a.value() * f1.d1() * b.value() +
                 f1.value() * a1.value();
    double eq4 = b.value() * ps.d1() - 1.0 / f1.value();
    double eq5 = b.value() * ps1.d1() + b.value() * b.value() * ps.d2() / 2 +
                 b1.value() * ps.d1() + f2.value() / (f1.value() * f1.value()) -
                 a.value() * ps1.value();
    return {eq1, eq2, eq4, eq5};
}

// ---------------------------------------------------------------------------
// Small ODE toolbox: adaptive Cash-Karp RK45 with Hermite dense output, and a
// barycentric Chebyshev interpolant for the extracted forcings.
// ---------------------------------------------------------------------------

struct DenseSolution {
    std::vector<double> t;
    std::vector<std::vector<double>> y;   // state at nodes
    std::vector<std::vector<double>> dy;  // derivative at nodes

    bool forward() const { return t.size() < 2 || t.back() >= t.front(); }

    double eval(double x, int comp = 0) const {
        if (t.size() == 1) return y[0][comp];
        // locate the bracketing interval (nodes are monotone in either order)
        size_t lo = 0, hi = t.size() - 1;
        bool fwd = forward();
        auto before = [&](double u, double v) { return fwd ? u <= v : u >= v; };
        if (before(x, t.front())) hi = 1;
        else if (before(t.back(), x)) lo = t.size() - 2;
        else {
            while (hi - lo > 1) {
                size_t mid = (lo + hi) / 2;
                if (before(t[mid], x)) lo = mid;
                else hi = mid;
            }
        }
        double h = t[hi] - t[lo];
        double s = (x - t[lo]) / h;
        double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
        double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
        return h00 * y[lo][comp] + h * h10 * dy[lo][comp] + h01 * y[hi][comp] +
               h * h11 * dy[hi][comp];
    }
};

using OdeRhs = std::function<std::vector<double>(double, const std::vector<double>&)>;

inline DenseSolution integrate_ode(const OdeRhs& rhs, double t0, double t1,
                                   std::vector<double> y0, double atol = 1e-11,
                                   double rtol = 1e-11, double hmax = 1e-3) {
    static const double A[6] = {0, 1.0 / 5, 3.0 / 10, 3.0 / 5, 1, 7.0 / 8};
    static const double B[6][5] = {
        {0, 0, 0, 0, 0},
        {1.0 / 5, 0, 0, 0, 0},
        {3.0 / 40, 9.0 / 40, 0, 0, 0},
        {3.0 / 10, -9.0 / 10, 6.0 / 5, 0, 0},
        {-11.0 / 54, 5.0 / 2, -70.0 / 27, 35.0 / 27, 0},
        {1631.0 / 55296, 175.0 / 512, 575.0 / 13824, 44275.0 / 110592, 253.0 / 4096}};
    static const double C5[6] = {37.0 / 378, 0, 250.0 / 621, 125.0 / 594, 0, 512.0 / 1771};
    static const double C4[6] = {2825.0 / 27648,     0,           18575.0 / 48384,
                                 13525.0 / 55296, 277.0 / 14336, 1.0 / 4};

    int dim = int(y0.size());
    double dir = (t1 >= t0) ? 1.0 : -1.0;
    double t = t0, h = dir * hmax;
    DenseSolution sol;
    sol.t.push_back(t);
    sol.y.push_back(y0);
    sol.dy.push_back(rhs(t, y0));
    std::vector<double> y = y0;
    int guard = 0;
    while (dir * (t1 - t) > 1e-14 && ++guard < 2000000) {
        if (dir * (t + h - t1) > 0) h = t1 - t;
        std::array<std::vector<double>, 6> k;
        k[0] = sol.dy.back();
        bool ok = true;
        std::vector<double> ytmp(dim);
        for (int s = 1; s < 6; ++s) {
            for (int i = 0; i < dim; ++i) {
                double acc = y[i];
                for (int j = 0; j < s; ++j) acc += h * B[s][j] * k[j][i];
                ytmp[i] = acc;
            }
            k[s] = rhs(t + A[s] * h, ytmp);
        }
        std::vector<double> y5(dim);
        double errmax = 0;
        for (int i = 0; i < dim; ++i) {
            double s5 = 0, s4 = 0;
            for (int s = 0; s < 6; ++s) {
                s5 += C5[s] * k[s][i];
                s4 += C4[s] * k[s][i];
            }
            y5[i] = y[i] + h * s5;
            double err = std::abs(h * (s5 - s4));
            double scale = atol + rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
            errmax = std::max(errmax, err / scale);
        }
        ok = errmax <= 1.0;
        if (ok) {
            t += h;
            y = y5;
            sol.t.push_back(t);
            sol.y.push_back(y);
            sol.dy.push_back(rhs(t, y));
        }
        double fac = 0.9 * std::pow(std::max(errmax, 1e-10), -0.2);
        fac = std::min(5.0, std::max(0.2, fac));
        h *= fac;
        if (std::abs(h) > hmax) h = dir * hmax;
        if (std::abs(h) < 1e-12) h = dir * 1e-12;
    }
    return sol;
}

struct ChebInterp {
    double a = 0, b = 1;
    std::vector<double> nodes, vals, w;

    static ChebInterp build(double a, double b, int n, const std::function<double(double)>& f) {
        ChebInterp c;
        c.a = a;
        c.b = b;
        for (int j = 0; j < n; ++j) {
            double ang = (2.0 * j + 1) * 3.14159265358979323846 / (2.0 * n);
            double x = 0.5 * (a + b) + 0.5 * (b - a) * std::cos(ang);
            c.nodes.push_back(x);
            c.vals.push_back(f(x));
            c.w.push_back(((j % 2) ? -1.0 : 1.0) * std::sin(ang));
        }
        return c;
    }

    double eval(double x) const {
        double num = 0, den = 0;
        for (size_t j = 0; j < nodes.size(); ++j) {
            double d = x - nodes[j];
            if (std::abs(d) < 1e-14) return vals[j];
            double q = w[j] / d;
            num += q * vals[j];
            den += q;
        }
        return num / den;
    }
};

// ---------------------------------------------------------------------------
// Chart construction.
// ---------------------------------------------------------------------------

struct OdeTail {
    DenseSolution delta_psi2;  // correction layer at order r^-2 of psi
    DenseSolution phi4;        // order r^-2 of rho
    DenseSolution psi3;        // order r^-3 of psi
    ChebInterp forcing_c4, forcing_d4;
    double e = 0;  // Phi4 at pi/2
    double f = 0;  // Psi3 at pi/2
    double max_closedform_residual = 0;  // numeric integration vs closed forms
    double max_tail_residual = 0;        // tail ODE residual on the tabulation
};

struct AdiabaticChart {
    ChartFamily family = ChartFamily::semidisc;
    RegionId region = RegionId::I;
    double beta = 1.5707963267948966;
    double theta_lo = 0, theta_hi = 1.5707963267948966;  // band
    double theta_init = 0;                               // where ICs are posed
    bool has_tail = false;
    OdeTail tail;
};

namespace detail {

// Richardson elimination of 1/r and 1/r^2 from samples at r, 2r, 4r.
inline double richardson3(double A1, double A2, double A4) {
    double R12 = 2 * A2 - A1;
    double R24 = 2 * A4 - A2;
    return (4 * R24 - R12) / 3;
}

// Forcing of the Phi4 equation: the r^-3 coefficient of rho' - rho under the
// exact branch composition, with rho truncated after the corrected Phi3.
inline double extract_c4(RegionId reg, double theta) {
    using R = mp50;
    SectorShapeT<R> semi(pi<R>() / 2);
    Half h = (reg == RegionId::III || reg == RegionId::IV) ? Half::lower : Half::upper;
    auto rho3 = [&](R r, R t) {
        return r * chartfn::phi1(reg, t) + chartfn::phi2(reg, t) +
               (chartfn::phi3(reg, t) + chartfn::delta_phi3(reg, t)) / r;
    };
    R r0 = R(20000);
    double A[3];
    for (int k = 0; k < 3; ++k) {
        R r = r0 * R(1 << k);
        PolarPointT<R> p{r, R(theta), h};
        PolarPointT<R> q = region_f2_polar(semi, reg, p);
        A[k] = double(r * r * r * (rho3(q.r, q.theta) - rho3(p.r, p.theta)));
    }
    return richardson3(A[0], A[1], A[2]);
}

// Forcing of the Psi3 equation: the r^-4 coefficient of psi' - psi - 1/rho,
// with psi truncated after the corrected Psi2 and rho through Phi4.
inline double extract_d4(RegionId reg, double theta, const DenseSolution& dpsi2,
                         const DenseSolution& phi4) {
    using R = mp50;
    SectorShapeT<R> semi(pi<R>() / 2);
    Half h = (reg == RegionId::III || reg == RegionId::IV) ? Half::lower : Half::upper;
    auto psi2c = [&](R r, R t) {
        return chartfn::psi(reg, t) + chartfn::psi1(reg, t) / r +
               (chartfn::psi2(reg, t) + R(dpsi2.eval(double(t)))) / (r * r);
    };
    auto rho4 = [&](R r, R t) {
        return r * chartfn::phi1(reg, t) + chartfn::phi2(reg, t) +
               (chartfn::phi3(reg, t) + chartfn::delta_phi3(reg, t)) / r +
               R(phi4.eval(double(t))) / (r * r);
    };
    R r0 = R(20000);
    double A[3];
    for (int k = 0; k < 3; ++k) {
        R r = r0 * R(1 << k);
        PolarPointT<R> p{r, R(theta), h};
        PolarPointT<R> q = region_f2_polar(semi, reg, p);
        A[k] = double(r * r * r * r *
                      (psi2c(q.r, q.theta) - psi2c(p.r, p.theta) - R(1) / rho4(p.r, p.theta)));
    }
    return richardson3(A[0], A[1], A[2]);
}

}  // namespace detail

// Builds the chart for one region: cross-checks the closed forms against a
// numerical integration of the defining system, then assembles the numeric
// tail layers (delta_psi2, Phi4, Psi3) by forced linear ODEs.
inline AdiabaticChart solve_phi_psi_odes(RegionId reg, ChartFamily family,
                                         double beta = 1.5707963267948966) {
    const double half_pi = 1.5707963267948966;
    const double pi_ = 2 * half_pi;
    AdiabaticChart chart;
    chart.family = family;
    chart.region = reg;
    chart.beta = beta;
    if (reg != RegionId::I && reg != RegionId::II && reg != RegionId::III &&
        reg != RegionId::IV)
        throw WrongRegion("solve_phi_psi_odes: chart regions are I-IV");
    bool low_band = (reg == RegionId::I || reg == RegionId::III);

    if (family == ChartFamily::sector) {
        chart.theta_lo = low_band ? 0.0 : pi_ - beta;
        chart.theta_hi = low_band ? beta : pi_;
        chart.theta_init = low_band ? beta : pi_ - beta;
        // numeric cross-check of the four closed forms on the band
        double maxres = 0;
        auto closed = [&](double t, int comp) {
            switch (comp) {
                case 0: return chartfn::sector_phi1(beta, reg, t);
                case 1: return chartfn::sector_phi2(beta, reg, t);
                case 2: return chartfn::sector_psi(beta, reg, t);
                default: return chartfn::sector_psi1(beta, reg, t);
            }
        };
        OdeRhs rhs = [&, reg, beta](double t, const std::vector<double>& y) {
            using J = Jet<double>;
            J th = J::variable(t), bt(beta);
            J a = sector::a(bt, reg, th), a1 = sector::a1(bt, reg, th);
            J b = sector::b(bt, reg, th), b1 = sector::b1(bt, reg, th);
            J f1 = chartfn::sector_phi1(bt, reg, th);
            J f2 = chartfn::sector_phi2(bt, reg, th);
            J ps = chartfn::sector_psi(bt, reg, th);
            std::vector<double> d(4);
            d[0] = -y[0] * a.value() / b.value();
            d[1] = -(f1.d1() * b1.value() + f1.d2() * b.value() * b.value() / 2 +
                     a.value() * f1.d1() * b.value() + f1.value() * a1.value()) /
                   b.value();
            d[2] = 1.0 / (b.value() * y[0]);
            d[3] = -(b.value() * b.value() * ps.d2() / 2 + b1.value() * ps.d1() +
                     f2.value() / (f1.value() * f1.value()) - a.value() * y[3]) /
                   b.value();
            return d;
        };
        DenseSolution num = integrate_ode(rhs, chart.theta_init,
                                          low_band ? chart.theta_lo : chart.theta_hi,
                                          {1.0, 0.0, 0.0, 0.0});
        for (size_t i = 0; i < num.t.size(); ++i)
            for (int c = 0; c < 4; ++c)
                maxres = std::max(maxres, std::abs(num.y[i][c] - closed(num.t[i], c)));
        if (maxres > 1e-7)
            throw ResidualTooLarge("sector chart: closed form vs ODE mismatch " +
                                   std::to_string(maxres));
        chart.tail.max_closedform_residual = maxres;
        return chart;
    }

    // semi-disc
    chart.theta_lo = low_band ? 0.0 : half_pi;
    chart.theta_hi = low_band ? half_pi : pi_;
    chart.theta_init = low_band ? 0.0 : pi_;
    double t_end = low_band ? half_pi : half_pi;  // far end of the band

    // 1. numeric cross-check of the six closed forms
    {
        OdeRhs rhs = [reg](double t, const std::vector<double>& y) {
            using J = Jet<double>;
            J th = J::variable(t);
            J a = semidisc::a(reg, th), a1 = semidisc::a1(reg, th), a2 = semidisc::a2(reg, th);
            J b = semidisc::b(reg, th), b1 = semidisc::b1(reg, th);
            J b2 = semidisc::b2_published(reg, th);
            J f1 = chartfn::phi1(reg, th), f2 = chartfn::phi2(reg, th);
            J ps = chartfn::psi(reg, th), ps1 = chartfn::psi1(reg, th);
            std::vector<double> d(6);
            d[0] = -y[0] * a.value() / b.value();
            d[1] = -(f1.d1() * b1.value() + f1.d2() * b.value() * b.value() / 2 +
                     a.value() * f1.d1() * b.value() + f1.value() * a1.value()) /
                   b.value();
            d[2] = -(f1.d3() * b.value() * b.value() * b.value() / 6 +
                     f1.d2() * (b.value() * b1.value() + a.value() * b.value() * b.value() / 2) +
                     f1.d1() * (a1.value() * b.value() + a.value() * b1.value() + b2.value()) +
                     f1.value() * a2.value() + f2.d2() * b.value() * b.value() / 2 +
                     f2.d1() * b1.value() - y[2] * a.value()) /
                   b.value();
            d[3] = 1.0 / (b.value() * y[0]);
            d[4] = -(b.value() * b.value() * ps.d2() / 2 + b1.value() * ps.d1() +
                     f2.value() / (f1.value() * f1.value()) - a.value() * y[4]) /
                   b.value();
            d[5] = -(b.value() * b.value() * b.value() * ps.d3() / 6 +
                     b.value() * b1.value() * ps.d2() + b2.value() * ps.d1() +
                     (a.value() * a.value() - a1.value()) * ps1.value() +
                     b.value() * b.value() * ps1.d2() / 2 +
                     ps1.d1() * (b1.value() - a.value() * b.value()) -
                     2 * a.value() * y[5] +
                     (f1.value() * y[2] - f2.value() * f2.value()) /
                         (f1.value() * f1.value() * f1.value())) /
                   b.value();
            return d;
        };
        std::vector<double> ic{1, 0, 0, low_band ? 0.0 : 2.0 / 3.0, 0, 0};
        DenseSolution num = integrate_ode(rhs, chart.theta_init, t_end, ic);
        double maxres = 0;
        for (size_t i = 0; i < num.t.size(); ++i) {
            double t = num.t[i];
            maxres = std::max(maxres, std::abs(num.y[i][0] - chartfn::phi1(reg, t)));
            maxres = std::max(maxres, std::abs(num.y[i][1] - chartfn::phi2(reg, t)));
            maxres = std::max(maxres, std::abs(num.y[i][2] - chartfn::phi3(reg, t)));
            maxres = std::max(maxres, std::abs(num.y[i][3] - chartfn::psi(reg, t)));
            maxres = std::max(maxres, std::abs(num.y[i][4] - chartfn::psi1(reg, t)));
            maxres = std::max(maxres, std::abs(num.y[i][5] - chartfn::psi2(reg, t)));
        }
        if (maxres > 1e-7)
            throw ResidualTooLarge("semidisc chart: closed form vs ODE mismatch " +
                                   std::to_string(maxres));
        chart.tail.max_closedform_residual = maxres;
    }

    // 2. delta_psi2 correction layer (closed-form forcing)
    {
        OdeRhs rhs = [reg](double t, const std::vector<double>& y) {
            double a = semidisc::a(reg, t), b = semidisc::b(reg, t);
            double D3 = chartfn::delta_psi2_forcing(reg, t);
            return std::vector<double>{(2 * a * y[0] - D3) / b};
        };
        chart.tail.delta_psi2 = integrate_ode(rhs, chart.theta_init, t_end, {0.0});
    }

    // 3. Phi4 from the extracted r^-3 forcing of rho' - rho
    {
        chart.tail.forcing_c4 = ChebInterp::build(
            chart.theta_lo, chart.theta_hi, 33,
            [reg](double t) { return detail::extract_c4(reg, t); });
        const ChebInterp& C4 = chart.tail.forcing_c4;
        OdeRhs rhs = [reg, &C4](double t, const std::vector<double>& y) {
            double a = semidisc::a(reg, t), b = semidisc::b(reg, t);
            return std::vector<double>{(2 * a * y[0] - C4.eval(t)) / b};
        };
        chart.tail.phi4 = integrate_ode(rhs, chart.theta_init, t_end, {0.0});
        chart.tail.e = chart.tail.phi4.eval(half_pi);
    }

    // 4. Psi3 from the extracted r^-4 forcing of psi' - psi - 1/rho
    {
        const DenseSolution& dpsi2 = chart.tail.delta_psi2;
        const DenseSolution& phi4 = chart.tail.phi4;
        chart.tail.forcing_d4 = ChebInterp::build(
            chart.theta_lo, chart.theta_hi, 33,
            [&](double t) { return detail::extract_d4(reg, t, dpsi2, phi4); });
        const ChebInterp& D4 = chart.tail.forcing_d4;
        OdeRhs rhs = [reg, &D4](double t, const std::vector<double>& y) {
            double a = semidisc::a(reg, t), b = semidisc::b(reg, t);
            return std::vector<double>{(3 * a * y[0] - D4.eval(t)) / b};
        };
        chart.tail.psi3 = integrate_ode(rhs, chart.theta_init, t_end, {0.0});
        chart.tail.f = chart.tail.psi3.eval(half_pi);
    }

    // 5. tail ODE residuals on the tabulations (Hermite derivative vs RHS)
    {
        double maxres = 0;
        auto check = [&](const DenseSolution& s, int order, const std::function<double(double)>& forcing) {
            for (size_t i = 0; i < s.t.size(); ++i) {
                double t = s.t[i];
                double a = semidisc::a(chart.region, t), b = semidisc::b(chart.region, t);
                double res = s.dy[i][0] * b - order * a * s.y[i][0] + forcing(t);
                maxres = std::max(maxres, std::abs(res));
            }
        };
        check(chart.tail.delta_psi2, 2,
              [reg](double t) { return chartfn::delta_psi2_forcing(reg, t); });
        check(chart.tail.phi4, 2, [&](double t) { return chart.tail.forcing_c4.eval(t); });
        check(chart.tail.psi3, 3, [&](double t) { return chart.tail.forcing_d4.eval(t); });
        chart.tail.max_tail_residual = maxres;
        if (maxres > 1e-8)
            throw ResidualTooLarge("tail ODE residual " + std::to_string(maxres));
    }

    chart.has_tail = true;
    return chart;
}

// ---------------------------------------------------------------------------
// Chart evaluation, inversion, and drift measurement.
// ---------------------------------------------------------------------------

template <class Real>
struct AdiabaticPoint {
    Real rho, psi;
};

// order k keeps Phi1..Phik and Psi..Psi_{k-1}; the full semi-disc chart is
// order 4, the sector chart order 2. The corrected Phi3/Psi2 (closed form +
// correction layer) are what the chart uses; the uncorrected closed forms are
// available separately through chartfn.
template <class Real>
AdiabaticPoint<Real> to_adiabatic(const AdiabaticChart& chart, const PolarPointT<Real>& p,
                                  int order = 4) {
    Real r = p.r, t = p.theta;
    double td = double(t);
    const double slack = 0.3;  // images under one F^2 step may overshoot the band
    if (td < chart.theta_lo - slack || td > chart.theta_hi + slack)
        throw WrongRegion("to_adiabatic: theta outside the chart band");
    if (chart.family == ChartFamily::sector) {
        if (order < 1 || order > 2)
            throw std::invalid_argument("to_adiabatic: sector chart has orders 1..2");
        Real bt(chart.beta);
        Real rho = r * chartfn::sector_phi1(bt, chart.region, t);
        Real psi = chartfn::sector_psi(bt, chart.region, t);
        if (order >= 2) {
            rho = rho + chartfn::sector_phi2(bt, chart.region, t);
            psi = psi + chartfn::sector_psi1(bt, chart.region, t) / r;
        }
        return {rho, psi};
    }
    if (order < 1 || order > 4)
        throw std::invalid_argument("to_adiabatic: semidisc chart has orders 1..4");
    RegionId reg = chart.region;
    Real rho = r * chartfn::phi1(reg, t);
    Real psi = chartfn::psi(reg, t);
    if (order >= 2) {
        rho = rho + chartfn::phi2(reg, t);
        psi = psi + chartfn::psi1(reg, t) / r;
    }
    if (order >= 3) {
        rho = rho + (chartfn::phi3(reg, t) + chartfn::delta_phi3(reg, t)) / r;
        psi = psi + (chartfn::psi2(reg, t) + Real(chart.tail.delta_psi2.eval(td))) / (r * r);
    }
    if (order >= 4) {
        rho = rho + Real(chart.tail.phi4.eval(td)) / (r * r);
        psi = psi + Real(chart.tail.psi3.eval(td)) / (r * r * r);
    }
    return {rho, psi};
}

// Newton inversion of to_adiabatic. Seeded by the head terms: Psi is strictly
// monotone on the band (Psi' = 1/(b Phi1) > 0), so bisection pins theta0.
inline PolarPoint from_adiabatic(const AdiabaticChart& chart, double rho, double psi,
                                 int order = 4) {
    auto psi_head = [&](double t) {
        return chart.family == ChartFamily::sector
                   ? chartfn::sector_psi(chart.beta, chart.region, t)
                   : chartfn::psi(chart.region, t);
    };
    auto phi1 = [&](double t) {
        return chart.family == ChartFamily::sector
                   ? chartfn::sector_phi1(chart.beta, chart.region, t)
                   : chartfn::phi1(chart.region, t);
    };
    auto phi2 = [&](double t) {
        return chart.family == ChartFamily::sector
                   ? chartfn::sector_phi2(chart.beta, chart.region, t)
                   : chartfn::phi2(chart.region, t);
    };
    double lo = chart.theta_lo, hi = chart.theta_hi;
    double target = std::min(std::max(psi, psi_head(lo) + 1e-13), psi_head(hi) - 1e-13);
    for (int i = 0; i < 80; ++i) {
        double mid = 0.5 * (lo + hi);
        (psi_head(mid) < target ? lo : hi) = mid;
    }
    double t0 = 0.5 * (lo + hi);
    double r0 = (rho - phi2(t0)) / phi1(t0);

    Half half = (chart.region == RegionId::III || chart.region == RegionId::IV)
                    ? Half::lower
                    : Half::upper;
    double r = r0, t = t0;
    for (int it = 0; it < 50; ++it) {
        AdiabaticPoint<double> F = to_adiabatic(chart, PolarPoint{r, t, half}, order);
        double gr = F.rho - rho, gp = F.psi - psi;
        if (std::abs(gr) + rho * std::abs(gp) < 1e-12 * rho) return {r, t, half};
        double hr = 1e-7 * r, ht = 1e-8;
        AdiabaticPoint<double> Fr = to_adiabatic(chart, PolarPoint{r + hr, t, half}, order);
        AdiabaticPoint<double> Ft = to_adiabatic(chart, PolarPoint{r, t + ht, half}, order);
        double j11 = (Fr.rho - F.rho) / hr, j12 = (Ft.rho - F.rho) / ht;
        double j21 = (Fr.psi - F.psi) / hr, j22 = (Ft.psi - F.psi) / ht;
        double det = j11 * j22 - j12 * j21;
        if (det == 0) break;
        r -= (j22 * gr - j12 * gp) / det;
        t -= (-j21 * gr + j11 * gp) / det;
    }
    throw NoConvergence("from_adiabatic: Newton did not reach 1e-12*rho");
}

// Measures rho' - rho and psi' - psi - 1/rho under the exact second iterate.
template <class Real>
struct DriftSample {
    Real d_rho, d_psi;
};

template <class Real>
DriftSample<Real> adiabatic_drift(const AdiabaticChart& chart, const SectorShapeT<Real>& shape,
                                  const PolarPointT<Real>& p, int order = 4) {
    {
        Point2T<Real> z = to_cartesian(p);
        RegionId reg = classify_region(shape, z);
        if (reg != chart.region) throw RegionExit("adiabatic_drift: start not in the region");
    }
    PolarPointT<Real> q = region_f2_polar(shape, chart.region, p);
    AdiabaticPoint<Real> A = to_adiabatic(chart, p, order);
    AdiabaticPoint<Real> B = to_adiabatic(chart, q, order);
    return {B.rho - A.rho, B.psi - A.psi - Real(1) / A.rho};
}

// Dense chart tabulation for export: theta, Phi1..Phi3, delta_phi3, Phi4,
// Psi..Psi2, delta_psi2, Psi3.
inline std::vector<std::vector<double>> chart_tabulation(const AdiabaticChart& chart,
                                                         int samples = 200) {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i <= samples; ++i) {
        double t = chart.theta_lo + (chart.theta_hi - chart.theta_lo) * i / samples;
        std::vector<double> row{t};
        if (chart.family == ChartFamily::sector) {
            row.push_back(chartfn::sector_phi1(chart.beta, chart.region, t));
            row.push_back(chartfn::sector_phi2(chart.beta, chart.region, t));
            row.push_back(chartfn::sector_psi(chart.beta, chart.region, t));
            row.push_back(chartfn::sector_psi1(chart.beta, chart.region, t));
        } else {
            row.push_back(chartfn::phi1(chart.region, t));
            row.push_back(chartfn::phi2(chart.region, t));
            row.push_back(chartfn::phi3(chart.region, t));
            row.push_back(chartfn::delta_phi3(chart.region, t));
            row.push_back(chart.tail.phi4.eval(t));
            row.push_back(chartfn::psi(chart.region, t));
            row.push_back(chartfn::psi1(chart.region, t));
            row.push_back(chartfn::psi2(chart.region, t));
            row.push_back(chart.tail.delta_psi2.eval(t));
            row.push_back(chart.tail.psi3.eval(t));
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace billiard_lab
