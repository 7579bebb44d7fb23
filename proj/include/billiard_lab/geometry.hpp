#pragma once

// Exact outer billiard map around a circular sector and the continuity-region
// decomposition of its second iterate.
//
// The sector with opening parameter beta in (0, pi/2] is
//     S_beta = { x^2 + y^2 <= 1, y >= -cos(beta) },
// with corner vertices O1 = (sin beta, -cos beta) and O2 = (-sin beta, -cos beta)
// on the unit circle. beta = pi/2 gives the semi-disc with flat side on y = 0;
// the frame shift (0, -cos beta) is (0, 0) in that case, so the semi-disc is
// centered exactly as the generic sector.
//
// The outer billiard map sends z (outside the shape) to 2p - z where p is the
// support point: the unique boundary point such that the line through z and p
// supports the shape and the shape lies to the right of the ray z -> 2p - z.

#include <cmath>
#include <stdexcept>
#include <string>
#include <array>
#include <optional>

namespace billiard_lab {

struct OnSingularity : std::runtime_error {
    explicit OnSingularity(const std::string& what) : std::runtime_error(what) {}
};
struct InsideShape : std::runtime_error {
    explicit InsideShape(const std::string& what) : std::runtime_error(what) {}
};
struct Ambiguous : std::runtime_error {
    explicit Ambiguous(const std::string& what) : std::runtime_error(what) {}
};

template <class Real>
struct Point2T {
    Real x{}, y{};
    friend Point2T operator+(Point2T a, Point2T b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2T operator-(Point2T a, Point2T b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2T operator*(Real s, Point2T a) { return {s * a.x, s * a.y}; }
};
using Point2 = Point2T<double>;

template <class Real>
Real cross(Point2T<Real> a, Point2T<Real> b) { return a.x * b.y - a.y * b.x; }

template <class Real>
Real norm2(Point2T<Real> a) { return a.x * a.x + a.y * a.y; }

enum class Half { upper, lower };

namespace detail {
// pi at the full working precision of Real (a decimal literal would cap the
// accuracy of multiprecision instantiations)
template <class Real>
const Real& pi() {
    using std::atan2;
    static const Real value = atan2(Real(0), Real(-1));
    return value;
}
}  // namespace detail

// Polar chart with the lower half-plane angle shifted by pi so that both
// charts use theta in [0, pi]: upper-half theta is the true polar angle,
// lower-half theta is the true polar angle plus pi (mod 2pi).
template <class Real>
struct PolarPointT {
    Real r{};
    Real theta{};
    Half half = Half::upper;
};
using PolarPoint = PolarPointT<double>;

template <class Real>
Point2T<Real> to_cartesian(const PolarPointT<Real>& p) {
    using std::cos;
    using std::sin;
    Real t = p.theta;
    Real cx = p.r * cos(t), cy = p.r * sin(t);
    if (p.half == Half::lower) return {-cx, -cy};
    return {cx, cy};
}

template <class Real>
PolarPointT<Real> to_polar(const Point2T<Real>& z) {
    using std::atan2;
    using std::sqrt;
    Real r = sqrt(norm2(z));
    Real t = atan2(z.y, z.x);
    if (t >= Real(0)) return {r, t, Half::upper};
    return {r, t + detail::pi<Real>(), Half::lower};
}

template <class Real>
struct SectorShapeT {
    Real beta;
    Real sb, cb;  // sin(beta), cos(beta)

    explicit SectorShapeT(Real beta_) : beta(beta_) {
        using std::cos;
        using std::sin;
        sb = sin(beta_);
        cb = cos(beta_);
    }

    Point2T<Real> vertex1() const { return {sb, -cb}; }
    Point2T<Real> vertex2() const { return {-sb, -cb}; }

    // Signed "outside-ness": positive iff z is strictly outside the shape.
    bool contains(const Point2T<Real>& z) const {
        return norm2(z) <= Real(1) && z.y >= -cb;
    }
};
using SectorShape = SectorShapeT<double>;

enum class SupportKind { vertex1, vertex2, tangency };

template <class Real>
struct SupportPointT {
    SupportKind kind;
    Point2T<Real> location;
};
using SupportPoint = SupportPointT<double>;

enum class RegionId { I, II, III, IV, V, VI };

inline const char* region_name(RegionId r) {
    switch (r) {
        case RegionId::I: return "I";
        case RegionId::II: return "II";
        case RegionId::III: return "III";
        case RegionId::IV: return "IV";
        case RegionId::V: return "V";
        case RegionId::VI: return "VI";
    }
    return "?";
}

namespace detail {

// All boundary points of the sector that can be extremal orthogonally to the
// direction d: the two vertices plus the arc points +-n (unit normals of d)
// when they lie on the arc part of the boundary.
template <class Real>
int side_check_points(const SectorShapeT<Real>& shape, Point2T<Real> d,
                      std::array<Point2T<Real>, 4>& out) {
    using std::sqrt;
    int cnt = 0;
    out[cnt++] = shape.vertex1();
    out[cnt++] = shape.vertex2();
    Real len = sqrt(norm2(d));
    if (len > Real(0)) {
        Point2T<Real> n{-d.y / len, d.x / len};
        if (n.y >= -shape.cb) out[cnt++] = n;
        if (-n.y >= -shape.cb) out[cnt++] = Point2T<Real>{-n.x, -n.y};
    }
    return cnt;
}

}  // namespace detail

// Support point by candidate enumeration: the two vertices and the two circle
// tangency points from z are tested; a candidate p survives when the whole
// shape lies weakly on one side of the line through z and p and the shape is
// on the right of the ray z -> 2p - z. A tie between two surviving candidates
// farther apart than tol means z sits on a singular line.
template <class Real>
SupportPointT<Real> support_point(const SectorShapeT<Real>& shape, const Point2T<Real>& z,
                                  Real tol = Real(1e-9)) {
    using std::abs;
    using std::sqrt;
    if (shape.contains(z)) throw InsideShape("support_point: point inside the shape");

    std::array<SupportPointT<Real>, 4> cands;
    int nc = 0;
    cands[nc++] = {SupportKind::vertex1, shape.vertex1()};
    cands[nc++] = {SupportKind::vertex2, shape.vertex2()};
    Real n2 = norm2(z);
    if (n2 > Real(1)) {
        Real s = sqrt(n2 - Real(1));
        Point2T<Real> tp{(z.x + s * z.y) / n2, (z.y - s * z.x) / n2};
        Point2T<Real> tm{(z.x - s * z.y) / n2, (z.y + s * z.x) / n2};
        if (tp.y >= -shape.cb - tol) cands[nc++] = {SupportKind::tangency, tp};
        if (tm.y >= -shape.cb - tol) cands[nc++] = {SupportKind::tangency, tm};
    }

    std::optional<SupportPointT<Real>> best;
    for (int i = 0; i < nc; ++i) {
        Point2T<Real> d = cands[i].location - z;
        std::array<Point2T<Real>, 4> chk;
        int nchk = detail::side_check_points(shape, d, chk);
        bool right_ok = true;   // shape weakly on the right of z -> 2p - z
        for (int k = 0; k < nchk; ++k) {
            Real c = cross(d, chk[k] - z);
            if (c > tol) { right_ok = false; break; }
        }
        if (!right_ok) continue;
        if (best) {
            Point2T<Real> diff = best->location - cands[i].location;
            if (norm2(diff) > tol * tol)
                throw Ambiguous("support_point: two support candidates (singular line)");
        } else {
            best = cands[i];
        }
    }
    if (!best) throw OnSingularity("support_point: no valid support candidate");
    return *best;
}

// One outer billiard step, z -> 2p - z.
template <class Real>
Point2T<Real> outer_billiard_step(const SectorShapeT<Real>& shape, const Point2T<Real>& z,
                                  Real tol = Real(1e-9)) {
    SupportPointT<Real> p = support_point(shape, z, tol);
    return {Real(2) * p.location.x - z.x, Real(2) * p.location.y - z.y};
}

// Fast support classification for hot loops. Equivalent to support_point (the
// test suite checks agreement); branches directly on the half-plane cuts that
// separate the vertex fans from the tangency fan.
template <class Real>
SupportKind fast_step(const SectorShapeT<Real>& shape, Point2T<Real>& z) {
    using std::sqrt;
    if (z.y >= -shape.cb && z.x * shape.sb - z.y * shape.cb >= Real(1)) {
        z = {Real(2) * shape.sb - z.x, Real(-2) * shape.cb - z.y};
        return SupportKind::vertex1;
    }
    if (z.y <= -shape.cb && z.x * shape.sb + z.y * shape.cb >= Real(-1)) {
        z = {Real(-2) * shape.sb - z.x, Real(-2) * shape.cb - z.y};
        return SupportKind::vertex2;
    }
    Real n2 = norm2(z);
    Real s = sqrt(n2 - Real(1));
    Point2T<Real> p{(z.x + s * z.y) / n2, (z.y - s * z.x) / n2};
    z = {Real(2) * p.x - z.x, Real(2) * p.y - z.y};
    return SupportKind::tangency;
}

// Second iterate with the pair of support kinds used.
template <class Real>
Point2T<Real> f2_step(const SectorShapeT<Real>& shape, Point2T<Real> z,
                      SupportKind* k1 = nullptr, SupportKind* k2 = nullptr) {
    SupportKind a = fast_step(shape, z);
    Real ymid = z.y;
    (void)ymid;
    SupportKind b = fast_step(shape, z);
    if (k1) *k1 = a;
    if (k2) *k2 = b;
    return z;
}

// Continuity region of F^2 at z, defined by the support kinds of z and F(z):
//   (vertex1, tangency) -> I      (tangency, vertex2) -> II
//   (tangency, vertex1) -> III    (vertex2, tangency) -> IV
//   (tangency, tangency) -> V in the upper half-plane, VI in the lower
//   (vertex1, vertex2)  -> V (thin fan between I and II at moderate radius)
template <class Real>
RegionId classify_region(const SectorShapeT<Real>& shape, const Point2T<Real>& z) {
    SupportKind a, b;
    Point2T<Real> zz = z;
    (void)f2_step(shape, zz, &a, &b);
    if (a == SupportKind::vertex1 && b == SupportKind::tangency) return RegionId::I;
    if (a == SupportKind::tangency && b == SupportKind::vertex2) return RegionId::II;
    if (a == SupportKind::tangency && b == SupportKind::vertex1) return RegionId::III;
    if (a == SupportKind::vertex2 && b == SupportKind::tangency) return RegionId::IV;
    if (a == SupportKind::tangency && b == SupportKind::tangency)
        return z.y > -shape.cb ? RegionId::V : RegionId::VI;
    if (a == SupportKind::vertex1 && b == SupportKind::vertex2) return RegionId::V;
    throw OnSingularity("classify_region: unexpected support pair");
}

namespace detail {

template <class Real>
Point2T<Real> reflect_vertex1(const SectorShapeT<Real>& shape, Point2T<Real> z) {
    return {Real(2) * shape.sb - z.x, Real(-2) * shape.cb - z.y};
}
template <class Real>
Point2T<Real> reflect_vertex2(const SectorShapeT<Real>& shape, Point2T<Real> z) {
    return {Real(-2) * shape.sb - z.x, Real(-2) * shape.cb - z.y};
}
template <class Real>
Point2T<Real> tangency_step(Point2T<Real> z) {
    using std::sqrt;
    Real n2 = norm2(z);
    Real s = sqrt(n2 - Real(1));
    Point2T<Real> p{(z.x + s * z.y) / n2, (z.y - s * z.x) / n2};
    return {Real(2) * p.x - z.x, Real(2) * p.y - z.y};
}

}  // namespace detail

// F^2 as the fixed two-step composition belonging to a region. Unlike f2_step
// this does not re-classify the point, so it analytically continues a region's
// branch right up to (and slightly past) the region boundary; expansions are
// compared against the branch, not against the re-classified map.
template <class Real>
Point2T<Real> region_f2(const SectorShapeT<Real>& shape, RegionId reg, Point2T<Real> z) {
    using detail::reflect_vertex1;
    using detail::reflect_vertex2;
    using detail::tangency_step;
    switch (reg) {
        case RegionId::I: return tangency_step(reflect_vertex1(shape, z));
        case RegionId::II: return reflect_vertex2(shape, tangency_step(z));
        case RegionId::III: return reflect_vertex1(shape, tangency_step(z));
        case RegionId::IV: return tangency_step(reflect_vertex2(shape, z));
        case RegionId::V: return reflect_vertex2(shape, reflect_vertex1(shape, z));
        case RegionId::VI: return tangency_step(tangency_step(z));
    }
    throw std::invalid_argument("region_f2: bad region id");
}

// region_f2 in the half-plane polar charts with the outgoing angle unwrapped
// by continuity (theta' may leave [0, pi] near a chart seam).
template <class Real>
PolarPointT<Real> region_f2_polar(const SectorShapeT<Real>& shape, RegionId reg,
                                  const PolarPointT<Real>& p) {
    using std::atan2;
    using std::sqrt;
    Point2T<Real> z = to_cartesian(p);
    Point2T<Real> w = region_f2(shape, reg, z);
    Real rp = sqrt(norm2(w));
    // angle advance measured relative to z, immune to the chart cut
    Real dtheta = atan2(cross(z, w), z.x * w.x + z.y * w.y);
    return {rp, p.theta + dtheta, p.half};
}

// Central finite-difference determinant of DF at z. The map is a piecewise
// point reflection, so the determinant is exactly 1 inside each region.
template <class Real>
Real jacobian_det(const SectorShapeT<Real>& shape, const Point2T<Real>& z, Real h) {
    auto F = [&](Point2T<Real> w) { return outer_billiard_step(shape, w); };
    SupportPointT<Real> p0 = support_point(shape, z);
    for (Point2T<Real> d : {Point2T<Real>{h, 0}, Point2T<Real>{-h, 0},
                            Point2T<Real>{0, h}, Point2T<Real>{0, -h}}) {
        SupportPointT<Real> p = support_point(shape, z + d);
        if (p.kind != p0.kind)
            throw OnSingularity("jacobian_det: stencil straddles a discontinuity");
    }
    Point2T<Real> fx1 = F(z + Point2T<Real>{h, 0}), fx0 = F(z + Point2T<Real>{-h, 0});
    Point2T<Real> fy1 = F(z + Point2T<Real>{0, h}), fy0 = F(z + Point2T<Real>{0, -h});
    Real j11 = (fx1.x - fx0.x) / (2 * h), j12 = (fy1.x - fy0.x) / (2 * h);
    Real j21 = (fx1.y - fx0.y) / (2 * h), j22 = (fy1.y - fy0.y) / (2 * h);
    return j11 * j22 - j12 * j21;
}

}  // namespace billiard_lab
