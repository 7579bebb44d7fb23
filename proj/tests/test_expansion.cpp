#include "doctest.h"

#include <cmath>
#include <vector>

#include "billiard_lab/expansion.hpp"
#include "billiard_lab/geometry.hpp"
#include "billiard_lab/mp.hpp"

using namespace billiard_lab;

namespace {
const double PI = 3.14159265358979323846;

template <class Real>
std::vector<Real> theta_band(RegionId reg) {
    // interior angles of each region's chart band, away from the bounding lines
    std::vector<Real> out;
    Real lo, hi;
    switch (reg) {
        case RegionId::I:
        case RegionId::III: lo = Real(0.15); hi = Real(1.35); break;
        default: lo = Real(1.80); hi = Real(3.0); break;  // II, IV
    }
    for (int i = 0; i < 9; ++i) out.push_back(lo + (hi - lo) * Real(i) / Real(8));
    return out;
}

template <class Real>
std::vector<Real> geometric_radii(Real lo, int count, Real factor = Real(2)) {
    std::vector<Real> out;
    Real r = lo;
    for (int i = 0; i < count; ++i, r = r * factor) out.push_back(r);
    return out;
}
}  // namespace

TEST_CASE("first-order coefficient examples") {
    PolarPoint p{1000.0, 0.0, Half::upper};
    PolarPoint q = f2_asym_semidisc(RegionId::I, p, 1);
    CHECK(q.r == doctest::Approx(998.0).epsilon(1e-12));
    CHECK(q.theta == doctest::Approx(0.002).epsilon(1e-12));

    PolarPoint pv{1000.0, PI / 2, Half::upper};
    PolarPoint qv = f2_asym_semidisc(RegionId::V, pv, 1);
    CHECK(qv.r == doctest::Approx(1000.0).epsilon(1e-15));
    CHECK(qv.theta == doctest::Approx(PI / 2 + 0.004).epsilon(1e-12));
}

TEST_CASE("semi-disc coefficients equal sector coefficients at beta = pi/2") {
    double beta = PI / 2;
    for (RegionId reg : {RegionId::I, RegionId::II, RegionId::III, RegionId::IV}) {
        for (int i = 0; i <= 100; ++i) {
            double t = 0.02 + (PI - 0.04) * i / 100.0;
            CHECK(std::abs(semidisc::a(reg, t) - sector::a(beta, reg, t)) < 1e-12);
            CHECK(std::abs(semidisc::a1(reg, t) - sector::a1(beta, reg, t)) < 1e-12);
            CHECK(std::abs(semidisc::b(reg, t) - sector::b(beta, reg, t)) < 1e-12);
            CHECK(std::abs(semidisc::b1(reg, t) - sector::b1(beta, reg, t)) < 1e-12);
        }
    }
}

TEST_CASE("sector endpoint and double-tangency values") {
    double beta = PI / 3;
    CHECK(sector::b(beta, RegionId::II, PI - beta) == doctest::Approx(4.0));
    PolarPoint p{500.0, 1.3, Half::upper};
    PolarPoint q = f2_asym_sector(beta, RegionId::V, p);
    CHECK(q.r == doctest::Approx(500.0));
    CHECK(q.theta == doctest::Approx(1.3 + 4.0 / 500.0).epsilon(1e-12));

    // the exact map conserves r exactly in the double-tangency band
    SectorShapeT<double> shape(beta);
    PolarPointT<double> pe = f2_exact_polar(shape, p);
    CHECK(std::abs(pe.r - 500.0) < 1e-9);
    CHECK(std::abs(pe.theta - q.theta) < 1e-5);
}

TEST_CASE("b stays positive on every region band") {
    for (double beta : {PI / 6, PI / 4, PI / 3, PI / 2}) {
        for (RegionId reg : {RegionId::I, RegionId::II, RegionId::III, RegionId::IV,
                             RegionId::V}) {
            for (int i = 0; i <= 200; ++i) {
                double t = 0.01 + (PI - 0.02) * i / 200.0;
                if (reg == RegionId::V && (t < 0.05 || t > PI - 0.05)) continue;
                if (beta == PI / 2) {
                    CHECK(semidisc::b(reg, t) > 0.0);
                }
                CHECK(sector::b(beta, reg, t) > 0.0);
            }
        }
    }
}

TEST_CASE("singular line examples") {
    CHECK(singular_line_theta(PI / 2, SingularLine::l2, 100.0) ==
          doctest::Approx(PI / 2 - 0.01).epsilon(1e-12));
    CHECK(singular_line_theta(PI / 2, SingularLine::l3p, 100.0) ==
          doctest::Approx(PI / 2 - 0.03).epsilon(1e-12));
    CHECK(singular_line_theta(PI / 3, SingularLine::l1, 200.0) ==
          doctest::Approx(-0.0025).epsilon(1e-12));
}

TEST_CASE("singular line asymptotics track the true region boundaries") {
    // the upper-chart boundary I -> V sits on theta = beta - 3/r; the V -> II
    // boundary on theta = beta - 1/r (semi-disc chart angles)
    SectorShape semi(PI / 2);
    for (double r : {200.0, 400.0, 800.0, 1600.0}) {
        auto region_at = [&](double th) {
            return classify_region(semi, {r * std::cos(th), r * std::sin(th)});
        };
        double lo = PI / 2 - 6.0 / r, hi = PI / 2 - 2.0 / r;
        REQUIRE(region_at(lo) == RegionId::I);
        REQUIRE(region_at(hi) == RegionId::V);
        for (int it = 0; it < 60; ++it) {
            double mid = 0.5 * (lo + hi);
            (region_at(mid) == RegionId::I ? lo : hi) = mid;
        }
        double predicted = singular_line_theta(PI / 2, SingularLine::l3p, r);
        CHECK(std::abs(0.5 * (lo + hi) - predicted) < 20.0 / (r * r));
    }
}

TEST_CASE("published truncation error slopes") {
    using R = long double;
    SectorShapeT<R> semi((R)PI / 2);
    auto exact = [&](PolarPointT<R> p) { return f2_exact_polar(semi, p); };
    auto radii = geometric_radii<R>(500, 6);
    for (RegionId reg : {RegionId::I, RegionId::II}) {
        auto thetas = theta_band<R>(reg);
        auto fit1 = order_fit<R>(exact,
                                 [&](PolarPointT<R> p) { return f2_asym_semidisc(reg, p, 1); },
                                 radii, thetas);
        CHECK(fit1.slope_r == doctest::Approx(-1.0).epsilon(0.3));
        CHECK(fit1.slope_theta == doctest::Approx(-2.0).epsilon(0.3));
        auto fit2 = order_fit<R>(exact,
                                 [&](PolarPointT<R> p) { return f2_asym_semidisc(reg, p, 2); },
                                 radii, thetas);
        CHECK(fit2.slope_r == doctest::Approx(-2.0).epsilon(0.3));
        CHECK(fit2.slope_theta == doctest::Approx(-3.0).epsilon(0.3));
        // the third-order published theta series saturates at slope -3: its
        // r^-3 coefficient differs from the exact series coefficient
        auto fit3 = order_fit<R>(exact,
                                 [&](PolarPointT<R> p) { return f2_asym_semidisc(reg, p, 3); },
                                 radii, thetas);
        CHECK(fit3.slope_r == doctest::Approx(-3.0).epsilon(0.3));
        CHECK(fit3.slope_theta == doctest::Approx(-3.0).epsilon(0.3));
    }
}

TEST_CASE("exact-series truncation reaches the full remainder orders") {
    using R = mp50;
    SectorShapeT<R> semi(pi_v<R>() / 2);
    auto exact = [&](PolarPointT<R> p) { return f2_exact_polar(semi, p); };
    auto radii = geometric_radii<R>(R(1000), 6);
    for (RegionId reg : {RegionId::I, RegionId::II, RegionId::III, RegionId::IV}) {
        Half h = (reg == RegionId::III || reg == RegionId::IV) ? Half::lower : Half::upper;
        auto fit = order_fit<R>(exact,
                                [&](PolarPointT<R> p) { return f2_asym_semidisc_exact(reg, p); },
                                radii, theta_band<R>(reg), h);
        CHECK(fit.slope_r == doctest::Approx(-4.0).epsilon(0.12));
        CHECK(fit.slope_theta == doctest::Approx(-5.0).epsilon(0.12));
    }
}

TEST_CASE("sector truncation error slopes at beta = pi/3") {
    using R = mp50;
    R beta = pi_v<R>() / 3;
    SectorShapeT<R> shape(beta);
    auto exact = [&](PolarPointT<R> p) { return f2_exact_polar(shape, p); };
    auto radii = geometric_radii<R>(R(1000), 6);
    std::vector<R> thetas;
    for (int i = 0; i < 9; ++i) thetas.push_back(R(0.1) + R(0.8) * R(i) / R(8));
    auto fit = order_fit<R>(exact,
                            [&](PolarPointT<R> p) { return f2_asym_sector(beta, RegionId::I, p); },
                            radii, thetas);
    CHECK(fit.slope_r == doctest::Approx(-2.0).epsilon(0.15));
    CHECK(fit.slope_theta == doctest::Approx(-3.0).epsilon(0.15));
}

TEST_CASE("order_fit needs at least four radii") {
    using R = double;
    auto id = [](PolarPointT<R> p) { return p; };
    std::vector<R> radii{10, 20, 30};
    std::vector<R> th{0.5};
    CHECK_THROWS_AS(order_fit<R>(id, id, radii, th), InsufficientRange);
}
