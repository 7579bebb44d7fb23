#pragma once

// Large-radius expansions of the second iterate F^2 per continuity region, in
// the half-plane polar charts:
//   r' = r + a + a1/r + a2/r^2 + a3/r^3 + O(r^-4)
//   t' = t + b/r + b1/r^2 + b2/r^3 + b3/r^4 + O(r^-5)
//
// Two coefficient tiers exist for the semi-disc:
//   - `published`: the reference closed forms for a..a2, b..b2. Its b2 carries
//     a known transcription defect (constant 2/3 off in regions I/IV and a
//     nonconstant error in II/III), kept verbatim because the adiabatic chart
//     closed forms and the tabulated chart values are internally consistent
//     with it.
//   - `exact`: coefficients of the exact map's series (independently derived
//     symbolically and re-verified against the map numerically by the test
//     suite), including the corrected b2 and the next orders a3, b3. Only this
//     tier attains the full O(r^-4)/O(r^-5) remainders.
//
// The sector-family coefficients (a, a1, b, b1 with remainder O(r^-2)) and the
// singular-line asymptotics theta(r) = t0 + c/r are also provided here.

#include <cmath>
#include <stdexcept>
#include <vector>
#include <algorithm>
#include <functional>

#include "billiard_lab/geometry.hpp"

namespace billiard_lab {

struct WrongRegion : std::runtime_error {
    explicit WrongRegion(const std::string& what) : std::runtime_error(what) {}
};
struct InsufficientRange : std::runtime_error {
    explicit InsufficientRange(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Semi-disc coefficients.
// Regions I-IV share b = 2(1+sin t); region V has a = -4cos t, b = 4 sin t.
// a1/a2/b2 pair up as {I,IV} and {II,III}.
// ---------------------------------------------------------------------------

namespace semidisc {

template <class S> S a(RegionId reg, S t) {
    using std::cos;
    using std::sin;
    if (reg == RegionId::V) return S(-4) * cos(t);
    return S(-2) * cos(t);
}

template <class S> S a1(RegionId reg, S t) {
    using std::sin;
    S s = sin(t);
    switch (reg) {
        case RegionId::I:
        case RegionId::IV: return S(2) * s * s;
        case RegionId::II:
        case RegionId::III: return S(2) * s * s + S(4) * s;
        case RegionId::V: return S(8) * s * s;
        default: throw WrongRegion("semidisc a1: region VI has no expansion");
    }
}

template <class S> S a2(RegionId reg, S t) {
    using std::cos;
    using std::sin;
    S c = cos(t);
    switch (reg) {
        case RegionId::I:
        case RegionId::IV: return S(4) * c - S(4) * c * c * c;
        case RegionId::II:
        case RegionId::III: return S(8) * c + S(4) * sin(S(2) * t) - S(4) * c * c * c;
        case RegionId::V: return S(32) * c - S(32) * c * c * c;
        default: throw WrongRegion("semidisc a2: region VI has no expansion");
    }
}

template <class S> S b(RegionId reg, S t) {
    using std::sin;
    if (reg == RegionId::V) return S(4) * sin(t);
    return S(2) * (S(1) + sin(t));
}

template <class S> S b1(RegionId reg, S t) {
    using std::cos;
    using std::sin;
    if (reg == RegionId::V) return S(8) * sin(S(2) * t);
    return S(4) * cos(t) * (S(1) + sin(t));
}

template <class S> S b2_published(RegionId reg, S t) {
    using std::cos;
    using std::sin;
    switch (reg) {
        case RegionId::I:
        case RegionId::IV:
            return S(6) * cos(S(2) * t) + S(8) / S(3) * sin(S(3) * t) + S(5) / S(3);
        case RegionId::II:
        case RegionId::III:
            return S(8) * cos(S(2) * t) + S(8) / S(3) * sin(S(3) * t) + S(4) * sin(t) - S(1) / S(3);
        case RegionId::V: return S(64) / S(3) * sin(S(3) * t);
        default: throw WrongRegion("semidisc b2: region VI has no expansion");
    }
}

// Exact-series tier (regions I-IV).
template <class S> S b2_exact(RegionId reg, S t) {
    using std::sin;
    S s = sin(t);
    switch (reg) {
        case RegionId::I:
        case RegionId::IV:
            return S(-32) / S(3) * s * s * s - S(12) * s * s + S(8) * s + S(25) / S(3);
        case RegionId::II:
        case RegionId::III:
            return S(-32) / S(3) * s * s * s - S(16) * s * s + S(4) * s + S(25) / S(3);
        default: throw WrongRegion("semidisc b2_exact: regions I-IV only");
    }
}

template <class S> S a3_exact(RegionId reg, S t) {
    using std::cos;
    using std::sin;
    S s = sin(t), c = cos(t);
    S s2 = s * s, c2 = c * c;
    switch (reg) {
        case RegionId::I:
        case RegionId::IV:
            // 8 sin^2 - 10 sin^4
            return S(8) * s2 - S(10) * s2 * s2;
        case RegionId::II:
        case RegionId::III:
            return S(-10) * s2 * s2 - S(24) * s2 * s - S(8) * s2 + S(14) * s + S(8);
        default: throw WrongRegion("semidisc a3_exact: regions I-IV only");
    }
    (void)c2;
}

template <class S> S b3_exact(RegionId reg, S t) {
    using std::cos;
    using std::sin;
    S s = sin(t), c = cos(t);
    S s2 = s * s, s3 = s2 * s, s4 = s2 * s2;
    S c5 = c * c * c * c * c;
    switch (reg) {
        case RegionId::I:
        case RegionId::IV:
            return S(-128) * s4 * c - S(32) * s3 * c + S(216) * s2 * c + S(16) * s * c +
                   S(128) * c5 - S(110) * c;
        case RegionId::II:
        case RegionId::III:
            return S(-40) * s4 * c - S(32) * s3 * c + S(16) * s2 * c - S(16) * s * c +
                   S(40) * c5 - S(26) * c;
        default: throw WrongRegion("semidisc b3_exact: regions I-IV only");
    }
}

}  // namespace semidisc

// Truncated semi-disc expansion, published tier, order in 1..3.
template <class Real>
PolarPointT<Real> f2_asym_semidisc(RegionId reg, const PolarPointT<Real>& p, int order) {
    if (order < 1 || order > 3) throw std::invalid_argument("f2_asym_semidisc: order in 1..3");
    Real r = p.r, t = p.theta;
    Real rp = r + semidisc::a(reg, t);
    Real tp = t + semidisc::b(reg, t) / r;
    if (order >= 2) {
        rp = rp + semidisc::a1(reg, t) / r;
        tp = tp + semidisc::b1(reg, t) / (r * r);
    }
    if (order >= 3) {
        rp = rp + semidisc::a2(reg, t) / (r * r);
        tp = tp + semidisc::b2_published(reg, t) / (r * r * r);
    }
    // regions I/II map the upper chart to itself; III/IV the lower chart
    Half h = (reg == RegionId::III || reg == RegionId::IV || reg == RegionId::VI)
                 ? Half::lower
                 : Half::upper;
    return {rp, tp, h};
}

// Full exact-series truncation (regions I-IV): remainders O(r^-4), O(r^-5).
template <class Real>
PolarPointT<Real> f2_asym_semidisc_exact(RegionId reg, const PolarPointT<Real>& p) {
    Real r = p.r, t = p.theta;
    Real r2 = r * r, r3 = r2 * r, r4 = r3 * r;
    Real rp = r + semidisc::a(reg, t) + semidisc::a1(reg, t) / r + semidisc::a2(reg, t) / r2 +
              semidisc::a3_exact(reg, t) / r3;
    Real tp = t + semidisc::b(reg, t) / r + semidisc::b1(reg, t) / r2 +
              semidisc::b2_exact(reg, t) / r3 + semidisc::b3_exact(reg, t) / r4;
    Half h = (reg == RegionId::III || reg == RegionId::IV) ? Half::lower : Half::upper;
    return {rp, tp, h};
}

// ---------------------------------------------------------------------------
// Sector-family coefficients (remainder O(r^-2)).
// ---------------------------------------------------------------------------

namespace sector {

template <class S> S a(S beta, RegionId reg, S t) {
    using std::sin;
    switch (reg) {
        case RegionId::I:
        case RegionId::III: return S(-2) * sin(beta - t);
        case RegionId::II:
        case RegionId::IV: return S(-2) * sin(beta + t);
        default: return S(0);  // V, VI
    }
}

template <class S> S a1(S beta, RegionId reg, S t) {
    using std::cos;
    switch (reg) {
        case RegionId::I: return S(1) + cos(S(2) * (beta - t));
        case RegionId::III: return S(1) + cos(S(2) * (beta - t)) + S(4) * cos(beta - t);
        case RegionId::II: return S(1) + cos(S(2) * (beta + t)) - S(4) * cos(beta + t);
        case RegionId::IV: return S(1) + cos(S(2) * (beta + t));
        default: return S(0);
    }
}

template <class S> S b(S beta, RegionId reg, S t) {
    using std::cos;
    switch (reg) {
        case RegionId::I:
        case RegionId::III: return S(2) + S(2) * cos(beta - t);
        case RegionId::II:
        case RegionId::IV: return S(2) - S(2) * cos(beta + t);
        default: return S(4);
    }
}

template <class S> S b1(S beta, RegionId reg, S t) {
    using std::sin;
    switch (reg) {
        case RegionId::I:
        case RegionId::III: return S(4) * sin(beta - t) + S(2) * sin(S(2) * (beta - t));
        case RegionId::II:
        case RegionId::IV: return S(4) * sin(beta + t) - S(2) * sin(S(2) * (beta + t));
        default: return S(0);
    }
}

}  // namespace sector

template <class Real>
PolarPointT<Real> f2_asym_sector(Real beta, RegionId reg, const PolarPointT<Real>& p,
                                 int order = 2) {
    if (order < 1 || order > 2) throw std::invalid_argument("f2_asym_sector: order in 1..2");
    Real r = p.r, t = p.theta;
    Real rp = r + sector::a(beta, reg, t);
    Real tp = t + sector::b(beta, reg, t) / r;
    if (order >= 2) {
        rp = rp + sector::a1(beta, reg, t) / r;
        tp = tp + sector::b1(beta, reg, t) / (r * r);
    }
    Half h = (reg == RegionId::III || reg == RegionId::IV || reg == RegionId::VI)
                 ? Half::lower
                 : Half::upper;
    return {rp, tp, h};
}

// ---------------------------------------------------------------------------
// Singular lines: theta(r) = t0 + c/r + O(r^-2) in the half-plane charts.
// l1, l2, l3 bound the upper-chart regions; the primed lines the lower chart.
// ---------------------------------------------------------------------------

enum class SingularLine { l1, l2, l3, l1p, l2p, l3p };

template <class Real>
Real singular_line_theta(Real beta, SingularLine line, Real r) {
    using std::cos;
    const Real pi_ = detail::pi<Real>();
    switch (line) {
        case SingularLine::l1: return -cos(beta) / r;
        case SingularLine::l1p: return pi_ - (Real(2) + cos(beta)) / r;
        case SingularLine::l2: return beta - Real(1) / r;
        case SingularLine::l2p: return pi_ - beta - Real(3) / r;
        case SingularLine::l3: return pi_ - beta - Real(1) / r;
        case SingularLine::l3p: return beta - Real(3) / r;
    }
    throw std::invalid_argument("singular_line_theta: bad line id");
}

// ---------------------------------------------------------------------------
// Order-of-accuracy measurement: least-squares slope of log(max error) against
// log(r), separately for the radial and angular components.
// ---------------------------------------------------------------------------

struct OrderFitRow {
    double r;
    double err_r;
    double err_theta;
};

struct OrderFitResult {
    double slope_r = 0;
    double slope_theta = 0;
    std::vector<OrderFitRow> rows;
};

inline double least_squares_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double n = double(xs.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// exact/approx: PolarPoint -> PolarPoint in a common scalar type Real.
template <class Real, class ExactMap, class ApproxMap>
OrderFitResult order_fit(ExactMap&& exact, ApproxMap&& approx,
                         const std::vector<Real>& radii, const std::vector<Real>& thetas,
                         Half half = Half::upper) {
    using std::abs;
    using std::log;
    if (radii.size() < 4) throw InsufficientRange("order_fit: need at least 4 radii");
    OrderFitResult res;
    std::vector<double> lx, ler, let;
    for (Real r : radii) {
        Real er = 0, et = 0;
        for (Real t : thetas) {
            PolarPointT<Real> p{r, t, half};
            PolarPointT<Real> pe = exact(p);
            PolarPointT<Real> pa = approx(p);
            er = std::max(er, Real(abs(pe.r - pa.r)));
            et = std::max(et, Real(abs(pe.theta - pa.theta)));
        }
        res.rows.push_back({double(r), double(er), double(et)});
        lx.push_back(std::log(double(r)));
        ler.push_back(std::log(double(er)));
        let.push_back(std::log(double(et)));
    }
    res.slope_r = least_squares_slope(lx, ler);
    res.slope_theta = least_squares_slope(lx, let);
    return res;
}

// Exact F^2 viewed in the half-plane polar charts, usable as `exact` argument.
template <class Real>
PolarPointT<Real> f2_exact_polar(const SectorShapeT<Real>& shape, const PolarPointT<Real>& p) {
    Point2T<Real> z = to_cartesian(p);
    SupportKind k1, k2;
    z = f2_step(shape, z, &k1, &k2);
    return to_polar(z);
}

}  // namespace billiard_lab
