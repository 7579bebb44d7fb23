#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <vector>

#include "billiard_lab/normal_form.hpp"
#include "doctest.h"

using namespace billiard_lab;

namespace {

struct IslandData {
    Point2 fp{};
    CubicReturnModel model{};
    DiagonalizedModel diag{};
    BirkhoffResult twist{};
};

const IslandData& island_data(int n) {
    static std::map<int, IslandData> cache;
    auto it = cache.find(n);
    if (it == cache.end()) {
        IslandData d;
        d.fp = find_fixed_point(n);
        d.model = taylor_fit(n, d.fp);
        d.diag = diagonalize(d.model);
        d.twist = birkhoff_twist(d.diag);
        it = cache.emplace(n, d).first;
    }
    return it->second;
}

}  // namespace

TEST_CASE("fixed point: Newton locates the island center near the anchor") {
    SectorShape shape{pi_v<double>() / 2};

    Point2 fp60 = find_fixed_point(60);
    CHECK(std::hypot(fp60.x - 179.25, fp60.y - 1.0) < 0.5);
    Point2 img = exact_first_return(shape, fp60).point;
    CHECK(std::hypot(img.x - fp60.x, img.y - fp60.y) < 1e-10);

    // the offset from the seed (3n - 3/4, 1) scales like 1/n
    std::vector<double> scaled;
    for (int n : {40, 80, 160}) {
        Point2 fp = island_data(n).fp;
        scaled.push_back(n * std::hypot(fp.x - (3.0 * n - 0.75), fp.y - 1.0));
    }
    double lo = *std::min_element(scaled.begin(), scaled.end());
    double hi = *std::max_element(scaled.begin(), scaled.end());
    CHECK(lo > 0.01);
    CHECK(hi / lo < 2.0);
}

TEST_CASE("cubic fit: area preservation and elliptic trace approaching -7/9") {
    std::vector<double> cos_err;
    for (int n : {40, 80, 160}) {
        const IslandData& d = island_data(n);
        double det = d.model.A[0][0] * d.model.A[1][1] -
                     d.model.A[0][1] * d.model.A[1][0];
        CHECK(std::abs(det - 1.0) < 1e-5);
        CHECK(d.model.fit_residual < 1e-9);
        double cosa = (d.model.A[0][0] + d.model.A[1][1]) / 2;
        cos_err.push_back(std::abs(cosa + 7.0 / 9.0));
    }
    CHECK(cos_err[0] / cos_err[1] > 1.4);
    CHECK(cos_err[1] / cos_err[2] > 1.4);
    CHECK(cos_err[2] < 0.02);
}

TEST_CASE("cubic fit: coefficient limits of the rescaled return map") {
    // leading-row y^3 coefficient: n^2 * F3 -> 1360/729
    const double y3_target = 1360.0 / 729.0;
    std::vector<double> y3_err;
    double max_f2_prev = 0;
    for (int n : {40, 80, 160}) {
        const IslandData& d = island_data(n);
        double y3 = n * double(n) * d.model.F3[0][3];
        CHECK(y3 == doctest::Approx(y3_target).epsilon(0.11));
        y3_err.push_back(std::abs(y3 - y3_target));

        // quadratic block vanishes at rate n^-2: magnitudes at 2n drop by ~4
        double max_f2 = 0;
        for (int r = 0; r < 2; ++r)
            for (int k = 0; k < 3; ++k)
                max_f2 = std::max(max_f2, std::abs(d.model.F2[r][k]));
        if (max_f2_prev > 0) CHECK(max_f2 < 0.6 * max_f2_prev);
        max_f2_prev = max_f2;
    }
    CHECK(y3_err[2] < y3_err[1]);
    CHECK(y3_err[1] < y3_err[0]);
    CHECK(y3_err[2] < 0.06);

    // diagonalized cubic resonant-adjacent coefficient:
    // n^2 * G13[2] -> -32/81 + (28 sqrt(2)/81) i
    const Cx g_target(-32.0 / 81.0, 28.0 * std::sqrt(2.0) / 81.0);
    const IslandData& d160 = island_data(160);
    Cx g = 160.0 * 160.0 * d160.diag.G13[2];
    CHECK(std::abs(g - g_target) < 0.06 * std::abs(g_target));
}

TEST_CASE("twist coefficient: n^2 alpha2 approaches -4 sqrt(2)/9, nearly real") {
    const double target = -4.0 * std::sqrt(2.0) / 9.0;
    std::vector<double> re_err;
    for (int n : {40, 80, 160}) {
        const IslandData& d = island_data(n);
        CHECK(std::abs(std::abs(d.diag.lambda) - 1.0) < 1e-9);
        CHECK(d.diag.lambda.imag() < 0);
        double re = n * double(n) * d.twist.alpha2.real();
        double im = n * double(n) * d.twist.alpha2.imag();
        CHECK(std::abs(im / re) < 0.15);
        re_err.push_back(std::abs(re - target));
    }
    CHECK(re_err[2] < re_err[0]);
    double re160 = 160.0 * 160.0 * island_data(160).twist.alpha2.real();
    CHECK(re160 == doctest::Approx(target).epsilon(0.15));
}

TEST_CASE("homological solve: conjugated map matches the twist normal form") {
    for (int n : {40, 160}) {
        const IslandData& d = island_data(n);
        ConjugacyCoeffs c = solve_homological(d.diag);
        CHECK(c.a3[2] == Cx(0));
        CHECK(std::abs(c.alpha2 - d.twist.alpha2) < 1e-15);
        CHECK(off_normal_form_residual(d.diag, c) < 1e-12);
    }
}

TEST_CASE("rotation profile: empirical rotation number extrapolates to alpha "
          "with slope set by the twist") {
    const int n = 80;
    const IslandData& d = island_data(n);
    std::vector<double> radii{5e-4, 1e-3, 1.5e-3, 2e-3, 2.5e-3, 3e-3};
    std::vector<RotationSample> prof = rotation_profile(n, radii, 10000);
    REQUIRE(prof.size() == radii.size());

    // least-squares line rotation = intercept + slope * radius2
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const RotationSample& s : prof) {
        sx += s.radius2;
        sy += s.rotation;
        sxx += s.radius2 * s.radius2;
        sxy += s.radius2 * s.rotation;
    }
    double m = prof.size();
    double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    double intercept = (sy - slope * sx) / m;

    CHECK(std::abs(intercept - d.twist.alpha) < 1e-3);
    // positive-angle convention: the rotation grows with radius, at rate
    // -Re(alpha2) > 0
    CHECK(slope > 0);
    CHECK(std::abs(slope) == doctest::Approx(-d.twist.alpha2.real()).epsilon(0.3));
}

TEST_CASE("island scan: the bounded fraction survives and a far start is "
          "flagged unbounded") {
    // reduced horizon keeps this a smoke check; the full-depth scan runs in
    // the acceptance suite
    double f1 = island_scan(40, 6, 2000, 0.5, 1);
    double f4 = island_scan(40, 6, 2000, 0.5, 4);
    CHECK(f1 == f4);  // thread fan-out must not change the verdict
    CHECK(f1 > 0.9);

    // a start ten island-diameters out is never captured: it exceeds the
    // scan's 2*diam bound criterion within the first thousand returns
    const int n = 160;
    SectorShape shape{pi_v<double>() / 2};
    Point2 fp = island_data(n).fp;
    Point2 wc = island_chart(n, fp);
    const double diam = 2 * std::hypot(9.0 / 1024, 3.0 / 2048);
    Point2 z = island_chart_inverse(
        n, {wc.x + 10 * diam * 0.47, wc.y + 10 * diam * 0.16});
    bool exceeded = false;
    for (int k = 0; k < 1000 && !exceeded; ++k) {
        Point2 w = island_chart(n, z);
        if (std::hypot(w.x - wc.x, w.y - wc.y) > 2 * diam) exceeded = true;
        z = exact_first_return(shape, z).point;
    }
    CHECK(exceeded);
}

TEST_CASE("guards: ellipticity, resonance, and domain checks") {
    CHECK_THROWS_AS(find_fixed_point(10), std::invalid_argument);

    CubicReturnModel hyper;
    hyper.A = {{{2.0, 0.0}, {1.0, 2.0}}};
    CHECK_THROWS_AS(diagonalize(hyper), NotElliptic);

    DiagonalizedModel res;
    res.lambda = Cx(std::cos(2 * pi_v<double>() / 3),
                    -std::sin(2 * pi_v<double>() / 3));  // lambda^3 = 1
    res.v = Cx(0, 1);
    CHECK_THROWS_AS(birkhoff_twist(res), Resonance);
    CHECK_THROWS_AS(solve_homological(res), Resonance);
}
