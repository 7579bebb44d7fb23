#pragma once

// Piecewise-linear cylinder dynamics: the sawtooth map
//   L(R, phi) = (R + delta*({phi - R} - 1/2), {phi - R}),  delta in (0, 4),
// its linear conjugation to a piecewise clockwise rotation by
// alpha = acos(1 - delta/2) about the centers ((4n - delta)/(2 s), 1/2) with
// s = sqrt(delta) sqrt(4 - delta), the invariant regular 2m-gons that exist
// exactly when alpha = pi/m, escape/recurrence statistics for perturbed
// orbits against those polygon barriers, and the leading-order Fermi-Ulam
// collision map, which shares the same linear part under (R, phi) = (I, tau).

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "billiard_lab/return_map.hpp"

namespace billiard_lab {

struct OnBoundary : std::runtime_error {
    explicit OnBoundary(const std::string& what) : std::runtime_error(what) {}
};
struct NotClosed : std::runtime_error {
    explicit NotClosed(const std::string& what) : std::runtime_error(what) {}
};
struct EnergyTooLow : std::runtime_error {
    explicit EnergyTooLow(const std::string& what) : std::runtime_error(what) {}
};

struct SawtoothSystem {
    double delta = 1.0;  // branch slope parameter, elliptic for delta in (0,4)
    int k = 1;           // linear iterates per application of the perturbed map
    // optional size-O(1/R) displacement added after the k linear iterates
    std::function<CylinderState(const CylinderState&)> perturbation{};

    double alpha() const { return std::acos(1.0 - delta / 2.0); }
};

// One application of the piecewise-affine map. The continuity branches are
// the strips n - 1 < R - phi < n; states within 1e-12 of a branch boundary
// are rejected rather than silently assigned.
inline CylinderState sawtooth_step(const SawtoothSystem& sys, CylinderState s) {
    const double u = detail::frac(s.phi - s.R);
    if (std::min(u, 1.0 - u) < 1e-12)
        throw OnBoundary("sawtooth_step: state on a continuity-branch boundary");
    return {s.R + sys.delta * (u - 0.5), u};
}

// Branch-resolved step: applies the branch-n affine formula on the closed
// strip n - 1 <= R - phi <= n. Useful for states on the measure-zero branch
// boundaries (for example polygon vertices), where the guarded step refuses.
inline CylinderState sawtooth_branch_step(const SawtoothSystem& sys,
                                          CylinderState s, long long n) {
    const double u = s.phi - s.R + double(n);
    return {s.R + sys.delta * (u - 0.5), u};
}

// k linear iterates followed by the optional perturbation displacement.
inline CylinderState perturbed_step(const SawtoothSystem& sys, CylinderState s) {
    for (int i = 0; i < sys.k; ++i) s = sawtooth_step(sys, s);
    if (sys.perturbation) {
        CylinderState d = sys.perturbation(s);
        s.R += d.R;
        s.phi = detail::frac(s.phi + d.phi);
    }
    return s;
}

// ---------------------------------------------------------------------------
// Linear conjugation to a piecewise rotation.
// ---------------------------------------------------------------------------

namespace detail {
inline double saw_scale(double delta) {
    return std::sqrt(delta) * std::sqrt(4.0 - delta);
}
}  // namespace detail

// (Rb, phib) = [[2/s, -delta/s], [0, 1]] (R, phi) with s = sqrt(delta(4-delta));
// each branch then acts as a clockwise rotation by alpha about its center.
inline CylinderState conjugate(const SawtoothSystem& sys, CylinderState s) {
    const double sc = detail::saw_scale(sys.delta);
    return {(2.0 * s.R - sys.delta * s.phi) / sc, s.phi};
}

inline CylinderState conjugate_inverse(const SawtoothSystem& sys, CylinderState s) {
    const double sc = detail::saw_scale(sys.delta);
    return {(sc * s.R + sys.delta * s.phi) / 2.0, s.phi};
}

// Center of the branch-n rotation in conjugated coordinates.
inline Point2 rotation_center(const SawtoothSystem& sys, long long n) {
    return {(4.0 * n - sys.delta) / (2.0 * detail::saw_scale(sys.delta)), 0.5};
}

inline long long branch_index(CylinderState s) {
    return (long long)std::floor(s.R - s.phi) + 1;
}

struct RhombusDomain {
    long long n = 0;
    Point2 center{};                  // conjugated coordinates
    std::array<Point2, 4> vertices{}; // lower-left, lower-right, upper-right,
                                      // upper-left; interior angle alpha
};

inline RhombusDomain rhombus_domain(const SawtoothSystem& sys, long long n) {
    auto conj = [&](double R, double phi) {
        CylinderState c = conjugate(sys, {R, phi});
        return Point2{c.R, c.phi};
    };
    RhombusDomain d;
    d.n = n;
    d.center = rotation_center(sys, n);
    d.vertices = {conj(n - 1.0, 0), conj(double(n), 0), conj(n + 1.0, 1),
                  conj(double(n), 1)};
    return d;
}

// ---------------------------------------------------------------------------
// Invariant polygons at rotation angle pi/m.
// ---------------------------------------------------------------------------

struct InvariantPolygon {
    int m = 0;
    long long n = 0;
    Point2 center{};
    std::vector<Point2> vertices;  // 2m points, clockwise
};

namespace detail {

inline Point2 rotate_about(Point2 p, Point2 c, double cos_a, double sin_a) {
    const double x = p.x - c.x, y = p.y - c.y;
    // clockwise rotation
    return {c.x + cos_a * x + sin_a * y, c.y - sin_a * x + cos_a * y};
}

// intersection of lines through (p1, p2) and (q1, q2)
inline Point2 line_intersection(Point2 p1, Point2 p2, Point2 q1, Point2 q2) {
    const double dx1 = p2.x - p1.x, dy1 = p2.y - p1.y;
    const double dx2 = q2.x - q1.x, dy2 = q2.y - q1.y;
    const double den = dx1 * dy2 - dy1 * dx2;
    if (std::abs(den) < 1e-300)
        throw NotClosed("line_intersection: parallel rotated edges");
    const double t = ((q1.x - p1.x) * dy2 - (q1.y - p1.y) * dx2) / den;
    return {p1.x + t * dx1, p1.y + t * dy1};
}

}  // namespace detail

// Rotate the lower branch boundary (the line carrying the edge pair a, a')
// through successive clockwise rotations by alpha about the branch center;
// when alpha = pi/m the 2m rotated lines close up and bound a regular 2m-gon
// with apothem 1/2.
inline InvariantPolygon build_invariant_polygon(int m, long long n, double delta) {
    if (m < 3) throw std::invalid_argument("build_invariant_polygon: need m >= 3");
    SawtoothSystem sys;
    sys.delta = delta;
    const double a = sys.alpha();
    const double ca = std::cos(a), sa = std::sin(a);
    const Point2 c = rotation_center(sys, n);

    // two points spanning the lower boundary line phib = 0
    std::vector<std::array<Point2, 2>> lines;
    std::array<Point2, 2> line = {Point2{c.x - 1.0, 0.0}, Point2{c.x + 1.0, 0.0}};
    for (int i = 0; i < 2 * m + 1; ++i) {
        lines.push_back(line);
        line = {detail::rotate_about(line[0], c, ca, sa),
                detail::rotate_about(line[1], c, ca, sa)};
    }
    const double gap = std::hypot(lines[2 * m][0].x - lines[0][0].x,
                                  lines[2 * m][0].y - lines[0][0].y);
    if (gap > 1e-10)
        throw NotClosed("build_invariant_polygon: 2m rotations miss closure by " +
                        std::to_string(gap));

    InvariantPolygon poly;
    poly.m = m;
    poly.n = n;
    poly.center = c;
    for (int i = 0; i < 2 * m; ++i)
        poly.vertices.push_back(detail::line_intersection(
            lines[i][0], lines[i][1], lines[i + 1][0], lines[i + 1][1]));
    return poly;
}

inline InvariantPolygon scaled_polygon(const InvariantPolygon& p, double factor) {
    InvariantPolygon q = p;
    for (Point2& v : q.vertices)
        v = {p.center.x + factor * (v.x - p.center.x),
             p.center.y + factor * (v.y - p.center.y)};
    return q;
}

// convex membership by signed edge tests (winding orientation detected from
// the vertex order), with an edge tolerance
inline bool polygon_contains(const InvariantPolygon& p, Point2 q, double tol = 1e-12) {
    const size_t k = p.vertices.size();
    double orient = 0;
    {
        Point2 a = p.vertices[0], b = p.vertices[1];
        orient = (b.x - a.x) * (p.center.y - a.y) - (b.y - a.y) * (p.center.x - a.x);
    }
    const double sign = orient >= 0 ? 1.0 : -1.0;
    for (size_t i = 0; i < k; ++i) {
        Point2 a = p.vertices[i], b = p.vertices[(i + 1) % k];
        double cr = (b.x - a.x) * (q.y - a.y) - (b.y - a.y) * (q.x - a.x);
        if (sign * cr < -tol * std::hypot(b.x - a.x, b.y - a.y)) return false;
    }
    return true;
}

// ---------------------------------------------------------------------------
// Escape experiments against polygon barriers.
// ---------------------------------------------------------------------------

// half of the G-band clearance at band exponent e: (1/2) (1/2^e) (1-cos a)/sin a
inline double half_band_width(double alpha, int band_exponent) {
    return 0.5 * std::pow(0.5, band_exponent) *
           (1.0 - std::cos(alpha)) / std::sin(alpha);
}

struct OrbitStats {
    double max_R = 0;          // largest conjugated radius reached
    long long crossings = 0;   // steps spent beyond a barrier's rightmost vertex
    long long recurrences = 0; // entries into a G band
    double max_jump = 0;       // largest perturbation displacement applied
    bool hit_boundary = false; // stopped on a continuity-branch boundary
    long long steps_run = 0;
};

struct EscapeStats {
    std::vector<OrbitStats> orbits;
    long long total_crossings = 0;
    long long total_recurrences = 0;
    double max_jump = 0;
};

// Barrier polygons are the invariant 2m-gons built at cylinder index 4^e; the
// G band of each is the annulus between the polygon and its (1 - 1/2^e)-scaled
// copy. Seeds must start strictly left of every barrier.
inline EscapeStats escape_experiment(const SawtoothSystem& sys,
                                     const std::vector<CylinderState>& seeds,
                                     long long steps,
                                     const std::vector<InvariantPolygon>& barriers,
                                     int threads = 1) {
    struct Barrier {
        InvariantPolygon outer, inner;
        double right_x = 0, left_x = 0;
    };
    std::vector<Barrier> bars;
    for (const InvariantPolygon& p : barriers) {
        Barrier b;
        b.outer = p;
        const int e = std::max(1, (int)std::llround(std::log(double(p.n)) /
                                                    std::log(4.0)));
        b.inner = scaled_polygon(p, 1.0 - std::pow(0.5, e));
        b.right_x = b.left_x = p.vertices[0].x;
        for (const Point2& v : p.vertices) {
            b.right_x = std::max(b.right_x, v.x);
            b.left_x = std::min(b.left_x, v.x);
        }
        bars.push_back(b);
    }
    // seeds must lie in the left complement component of every barrier:
    // outside the polygon and left of its center
    for (const CylinderState& s : seeds) {
        const CylinderState w = conjugate(sys, s);
        for (const Barrier& b : bars)
            if (w.R >= b.outer.center.x ||
                polygon_contains(b.outer, {w.R, w.phi}, -1e-9))
                throw std::invalid_argument(
                    "escape_experiment: seed not strictly left of a barrier");
    }

    EscapeStats stats;
    stats.orbits.resize(seeds.size());
    auto run_orbit = [&](size_t idx) {
        OrbitStats& o = stats.orbits[idx];
        CylinderState s = seeds[idx];
        o.max_R = conjugate(sys, s).R;
        std::vector<bool> in_band(bars.size(), false);
        for (long long step = 0; step < steps; ++step) {
            try {
                for (int i = 0; i < sys.k; ++i) s = sawtooth_step(sys, s);
            } catch (const OnBoundary&) {
                o.hit_boundary = true;
                return;
            }
            if (sys.perturbation) {
                CylinderState d = sys.perturbation(s);
                o.max_jump = std::max(o.max_jump, std::hypot(d.R, d.phi));
                s.R += d.R;
                s.phi = detail::frac(s.phi + d.phi);
            }
            CylinderState w = conjugate(sys, s);
            o.max_R = std::max(o.max_R, w.R);
            for (size_t b = 0; b < bars.size(); ++b) {
                if (w.R > bars[b].right_x) ++o.crossings;
                const Point2 q{w.R, w.phi};
                const bool band = polygon_contains(bars[b].outer, q) &&
                                  !polygon_contains(bars[b].inner, q);
                if (band && !in_band[b]) ++o.recurrences;
                in_band[b] = band;
            }
            ++o.steps_run;
        }
    };
    if (threads <= 1) {
        for (size_t i = 0; i < seeds.size(); ++i) run_orbit(i);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (size_t i = t; i < seeds.size(); i += size_t(threads))
                    run_orbit(i);
            });
        for (auto& th : pool) th.join();
    }
    for (const OrbitStats& o : stats.orbits) {
        stats.total_crossings += o.crossings;
        stats.total_recurrences += o.recurrences;
        stats.max_jump = std::max(stats.max_jump, o.max_jump);
    }
    return stats;
}

// ---------------------------------------------------------------------------
// Fermi-Ulam leading collision map.
// ---------------------------------------------------------------------------

struct FermiUlamModel {
    double delta = 1.0;
    double delta1 = 0.0;  // coefficient of the 1/I correction
    double i_min = 1e-6;  // domain floor; the 1/I correction diverges at I = 0
};

struct FermiUlamState {
    double tau = 0, I = 0;
};

// (tau, I) -> (tau - I mod 1, I + delta*(taub - 1/2)) plus the 1/I correction
// delta1*((taub - 1/2)^2 - 1/12)/I; shares its linear part with the sawtooth
// map under (R, phi) = (I, tau).
inline FermiUlamState fermi_ulam_step(const FermiUlamModel& model, double tau,
                                      double I) {
    if (I < model.i_min)
        throw EnergyTooLow("fermi_ulam_step: I = " + std::to_string(I) +
                           " below the domain floor");
    const double taub = detail::frac(tau - I);
    double Ib = I + model.delta * (taub - 0.5);
    if (model.delta1 != 0)
        Ib += model.delta1 * ((taub - 0.5) * (taub - 0.5) - 1.0 / 12.0) / I;
    return {taub, Ib};
}

}  // namespace billiard_lab
