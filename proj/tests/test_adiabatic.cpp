#include "doctest.h"

#include <cmath>
#include <map>
#include <vector>

#include "billiard_lab/adiabatic.hpp"

using namespace billiard_lab;

namespace {
const double PI = 3.14159265358979323846;
const double HPI = PI / 2;

// chart construction is expensive (multiprecision forcing extraction), so
// build each region once and share across test cases
const AdiabaticChart& chart_for(RegionId reg) {
    static std::map<RegionId, AdiabaticChart> cache;
    auto it = cache.find(reg);
    if (it == cache.end())
        it = cache.emplace(reg, solve_phi_psi_odes(reg, ChartFamily::semidisc)).first;
    return it->second;
}

double slope_of(const std::vector<double>& rs, const std::vector<double>& es) {
    std::vector<double> lx, ly;
    for (size_t i = 0; i < rs.size(); ++i) {
        lx.push_back(std::log(rs[i]));
        ly.push_back(std::log(es[i]));
    }
    return least_squares_slope(lx, ly);
}
}  // namespace

// ---------------------------------------------------------------------------
// Endpoint and midpoint values of the chart functions and their derivatives.
// Each row lists, at a fixed angle:
//   Phi1, Phi1', Phi1'', Phi1''', Phi2, Phi2', Phi2'', Phi3, Phi3',
//   Psi, Psi', Psi'', Psi''', Psi1, Psi1', Psi1'', Psi2, Psi2'
// ---------------------------------------------------------------------------

TEST_CASE("chart function values and derivatives at band endpoints and midpoint") {
    struct Row {
        RegionId reg;
        double t;
        double v[18];
    };
    const double P = PI;
    std::vector<Row> rows = {
        {RegionId::I, 0.0,
         {1, 1, 0, -1, 0, 0, 1, 0, -1.0 / 6,
          0, 0.5, -1, 3, 0, 0, 0, 0, 1.0 / 12}},
        {RegionId::I, HPI,
         {2, 0, -1, 0, 1, 1, 0, 1.0 / 12, 0,
          1.0 / 3, 1.0 / 8, 0, 1.0 / 8, -1.0 / 24, -1.0 / 16, -1.0 / 12, 5.0 / 144,
          11.0 / 192}},
        {RegionId::II, P,
         {1, -1, 0, 1, 0, 0, 1, 0, 1.0 / 6,
          2.0 / 3, 0.5, 1, 3, 0, 0, 0, 0, 1.0 / 12}},
        {RegionId::II, HPI,
         {2, 0, -1, 0, 1, -1, 0, -11.0 / 12, 0,
          1.0 / 3, 1.0 / 8, 0, 1.0 / 8, 1.0 / 24, -1.0 / 16, 1.0 / 12,
          P / 8 - 29.0 / 144, -25.0 / 192}},
        {RegionId::III, 0.0,
         {1, 1, 0, -1, 0, 0, -1, 0, -1.0 / 6,
          0, 0.5, -1, 3, 0, 0, 0, 0, 1.0 / 12}},
        {RegionId::III, HPI,
         {2, 0, -1, 0, -1, -1, 0, -11.0 / 12, 0,
          1.0 / 3, 1.0 / 8, 0, 1.0 / 8, 1.0 / 24, 1.0 / 16, 1.0 / 12,
          -P / 8 + 29.0 / 144, -25.0 / 192}},
        {RegionId::IV, P,
         {1, -1, 0, 1, 0, 0, -1, 0, 1.0 / 6,
          2.0 / 3, 0.5, 1, 3, 0, 0, 0, 0, 1.0 / 12}},
        {RegionId::IV, HPI,
         {2, 0, -1, 0, -1, 1, 0, 1.0 / 12, 0,
          1.0 / 3, 1.0 / 8, 0, 1.0 / 8, -1.0 / 24, 1.0 / 16, -1.0 / 12,
          -5.0 / 144, 11.0 / 192}},
    };
    for (const Row& row : rows) {
        CAPTURE(region_name(row.reg));
        CAPTURE(row.t);
        using J = Jet<double>;
        J t = J::variable(row.t);
        J f1 = chartfn::phi1(row.reg, t), f2 = chartfn::phi2(row.reg, t);
        J f3 = chartfn::phi3(row.reg, t);
        J ps = chartfn::psi(row.reg, t), p1 = chartfn::psi1(row.reg, t);
        J p2 = chartfn::psi2(row.reg, t);
        const double* v = row.v;
        CHECK(std::abs(f1.value() - v[0]) < 1e-9);
        CHECK(std::abs(f1.d1() - v[1]) < 1e-9);
        CHECK(std::abs(f1.d2() - v[2]) < 1e-9);
        CHECK(std::abs(f1.d3() - v[3]) < 1e-9);
        CHECK(std::abs(f2.value() - v[4]) < 1e-9);
        CHECK(std::abs(f2.d1() - v[5]) < 1e-9);
        CHECK(std::abs(f2.d2() - v[6]) < 1e-9);
        CHECK(std::abs(f3.value() - v[7]) < 1e-9);
        CHECK(std::abs(f3.d1() - v[8]) < 1e-9);
        CHECK(std::abs(ps.value() - v[9]) < 1e-9);
        CHECK(std::abs(ps.d1() - v[10]) < 1e-9);
        CHECK(std::abs(ps.d2() - v[11]) < 1e-9);
        CHECK(std::abs(ps.d3() - v[12]) < 1e-9);
        CHECK(std::abs(p1.value() - v[13]) < 1e-9);
        CHECK(std::abs(p1.d1() - v[14]) < 1e-9);
        CHECK(std::abs(p1.d2() - v[15]) < 1e-9);
        CHECK(std::abs(p2.value() - v[16]) < 1e-9);
        CHECK(std::abs(p2.d1() - v[17]) < 1e-9);
    }
}

TEST_CASE("closed forms satisfy the defining equations on the whole band") {
    for (RegionId reg : {RegionId::I, RegionId::II, RegionId::III, RegionId::IV}) {
        bool low = (reg == RegionId::I || reg == RegionId::III);
        double lo = low ? 1e-3 : HPI + 1e-3;
        double hi = low ? HPI - 1e-3 : PI - 1e-3;
        double maxres = 0;
        for (int i = 0; i <= 1000; ++i) {
            double t = lo + (hi - lo) * i / 1000.0;
            auto res = semidisc_ode_residuals(reg, t);
            for (double r : res) maxres = std::max(maxres, std::abs(r));
            auto cres = semidisc_correction_residuals(reg, t);
            for (double r : cres) maxres = std::max(maxres, std::abs(r));
        }
        CAPTURE(region_name(reg));
        CHECK(maxres < 1e-8);
    }
}

TEST_CASE("sector closed forms satisfy their equations") {
    for (double beta : {PI / 3, 1.1, HPI}) {
        for (RegionId reg : {RegionId::I, RegionId::II, RegionId::III, RegionId::IV}) {
            bool low = (reg == RegionId::I || reg == RegionId::III);
            double lo = low ? 1e-3 : PI - beta + 1e-3;
            double hi = low ? beta - 1e-3 : PI - 1e-3;
            double maxres = 0;
            for (int i = 0; i <= 1000; ++i) {
                double t = lo + (hi - lo) * i / 1000.0;
                auto res = sector_ode_residuals(beta, reg, t);
                for (double r : res) maxres = std::max(maxres, std::abs(r));
            }
            CAPTURE(beta);
            CAPTURE(region_name(reg));
            CHECK(maxres < 1e-8);
        }
    }
}

TEST_CASE("opening the sector to the half-plane rescales the leading factor") {
    // at the half-disc opening the sector's leading radial factor is exactly
    // half of the semi-disc one (the semi-disc radius normalization differs
    // by a factor of 2)
    for (RegionId reg : {RegionId::I, RegionId::II, RegionId::III, RegionId::IV}) {
        bool low = (reg == RegionId::I || reg == RegionId::III);
        for (int i = 0; i <= 200; ++i) {
            double t = (low ? 0.0 : HPI) + HPI * i / 200.0;
            CHECK(std::abs(2 * chartfn::sector_phi1(HPI, reg, t) - chartfn::phi1(reg, t)) <
                  1e-12);
        }
    }
}

TEST_CASE("chart construction cross-checks closed forms and builds the tail") {
    const AdiabaticChart& chart = chart_for(RegionId::I);
    CHECK(chart.has_tail);
    CHECK(chart.tail.max_closedform_residual < 1e-7);
    CHECK(chart.tail.max_tail_residual < 1e-8);
    // the two unknown mid-band tail values exist and are finite; nothing in
    // the suite depends on their numeric values
    CHECK(std::isfinite(chart.tail.e));
    CHECK(std::isfinite(chart.tail.f));
    // tail layers vanish at the initial angle
    CHECK(std::abs(chart.tail.phi4.eval(chart.theta_init)) < 1e-12);
    CHECK(std::abs(chart.tail.psi3.eval(chart.theta_init)) < 1e-12);
    CHECK(std::abs(chart.tail.delta_psi2.eval(chart.theta_init)) < 1e-12);
}

TEST_CASE("adiabatic image of a reference point") {
    const AdiabaticChart& chart = chart_for(RegionId::I);
    PolarPoint p{1000.0, HPI, Half::upper};
    auto A = to_adiabatic(chart, p, 4);
    // head terms: r Phi1 + Phi2 = 2000 + 1; the 1/r layer carries the
    // closed-form 1/12 plus the exact-coefficient correction -1/6; the 1/r^2
    // layer is the numeric tail value
    double expected_rho = 2000.0 + 1.0 + (1.0 / 12 - 1.0 / 6) / 1000.0 +
                          chart.tail.e / 1e6;
    CHECK(std::abs(A.rho - expected_rho) < 1e-12);
    CHECK(std::abs(chartfn::phi3(RegionId::I, HPI) - 1.0 / 12) < 1e-15);
    CHECK(std::abs(chartfn::delta_phi3(RegionId::I, HPI) + 1.0 / 6) < 1e-15);
    double expected_psi = 1.0 / 3 + (-1.0 / 24) / 1000.0 +
                          (5.0 / 144 + chart.tail.delta_psi2.eval(HPI)) / 1e6 +
                          chart.tail.f / 1e9;
    CHECK(std::abs(A.psi - expected_psi) < 1e-12);
}

TEST_CASE("chart inversion round trip") {
    for (RegionId reg : {RegionId::I, RegionId::II, RegionId::III, RegionId::IV}) {
        const AdiabaticChart& chart = chart_for(reg);
        bool low = (reg == RegionId::I || reg == RegionId::III);
        Half h = (reg == RegionId::III || reg == RegionId::IV) ? Half::lower : Half::upper;
        for (double r : {50.0, 300.0, 5000.0}) {
            for (double u : {0.2, 0.8, 1.35}) {
                double t = (low ? 0.0 : HPI) + u;
                PolarPoint p{r, t, h};
                auto A = to_adiabatic(chart, p, 4);
                PolarPoint q = from_adiabatic(chart, A.rho, A.psi, 4);
                CAPTURE(region_name(reg));
                CAPTURE(r);
                CAPTURE(t);
                CHECK(std::abs(q.r - r) < 1e-10 * r);
                CHECK(std::abs(q.theta - t) < 1e-10);
            }
        }
    }
}

TEST_CASE("drift orders of the semi-disc chart under the exact second iterate") {
    using R = mp50;
    SectorShapeT<R> semi(pi_v<R>() / 2);
    for (RegionId reg : {RegionId::I, RegionId::II}) {
        const AdiabaticChart& chart = chart_for(reg);
        bool low = (reg == RegionId::I);
        for (double t : {0.5, 1.0}) {
            double theta = (low ? 0.0 : HPI + 0.05) + t;
            std::vector<double> rs, e_rho3, e_rho4, e_psi3, e_psi4;
            for (double r = 100; r <= 1600; r *= 2) {
                PolarPointT<R> p{R(r), R(theta), low ? Half::upper : Half::upper};
                auto d3 = adiabatic_drift(chart, semi, p, 3);
                auto d4 = adiabatic_drift(chart, semi, p, 4);
                rs.push_back(r);
                e_rho3.push_back(std::abs(double(d3.d_rho)));
                e_rho4.push_back(std::abs(double(d4.d_rho)));
                e_psi3.push_back(std::abs(double(d3.d_psi)));
                e_psi4.push_back(std::abs(double(d4.d_psi)));
            }
            CAPTURE(region_name(reg));
            CAPTURE(theta);
            CHECK(std::abs(slope_of(rs, e_rho3) - (-3.0)) < 0.3);
            CHECK(std::abs(slope_of(rs, e_rho4) - (-4.0)) < 0.3);
            CHECK(std::abs(slope_of(rs, e_psi3) - (-4.0)) < 0.3);
            CHECK(std::abs(slope_of(rs, e_psi4) - (-5.0)) < 0.3);
        }
    }
}

TEST_CASE("drift orders of the sector chart") {
    using R = mp50;
    double beta = PI / 3;
    SectorShapeT<R> shape{R(beta)};
    AdiabaticChart chart = solve_phi_psi_odes(RegionId::I, ChartFamily::sector, beta);
    for (double theta : {0.3, 0.7}) {
        std::vector<double> rs, e_rho, e_psi;
        for (double r = 100; r <= 1600; r *= 2) {
            PolarPointT<R> p{R(r), R(theta), Half::upper};
            auto d = adiabatic_drift(chart, shape, p, 2);
            rs.push_back(r);
            e_rho.push_back(std::abs(double(d.d_rho)));
            e_psi.push_back(std::abs(double(d.d_psi)));
        }
        CAPTURE(theta);
        CHECK(std::abs(slope_of(rs, e_rho) - (-2.0)) < 0.3);
        CHECK(std::abs(slope_of(rs, e_psi) - (-3.0)) < 0.3);
    }
}

TEST_CASE("drift rejects starts outside the chart region") {
    using R = mp50;
    SectorShapeT<R> semi(pi_v<R>() / 2);
    const AdiabaticChart& chart = chart_for(RegionId::I);
    // this angle is well inside the band of region II
    PolarPointT<R> p{R(500), R(1.8), Half::upper};
    CHECK_THROWS_AS(adiabatic_drift(chart, semi, p, 3), RegionExit);
}

TEST_CASE("to_adiabatic validates its inputs") {
    const AdiabaticChart& chart = chart_for(RegionId::I);
    CHECK_THROWS_AS(to_adiabatic(chart, PolarPoint{100.0, 2.5, Half::upper}, 4), WrongRegion);
    CHECK_THROWS_AS(to_adiabatic(chart, PolarPoint{100.0, 0.5, Half::upper}, 7),
                    std::invalid_argument);
}
