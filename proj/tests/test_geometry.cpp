#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "billiard_lab/geometry.hpp"

using namespace billiard_lab;

namespace {
const double PI = 3.14159265358979323846;
const SectorShape semidisc(PI / 2);

double dist(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }
}  // namespace

TEST_CASE("five-periodic orbit of the semi-disc") {
    Point2 z0{2 + std::sqrt(3.0), 1.0};
    Point2 z = z0;

    // first step lands on the mirror image through the corner vertex (1, 0)
    Point2 z1 = outer_billiard_step(semidisc, z);
    CHECK(dist(z1, {-std::sqrt(3.0), -1.0}) < 1e-12);

    for (int i = 0; i < 5; ++i) z = outer_billiard_step(semidisc, z);
    CHECK(dist(z, z0) < 1e-9);
}

TEST_CASE("orbit step (0,2) -> (sqrt3, -1)") {
    Point2 z{0.0, 2.0};
    Point2 w = outer_billiard_step(semidisc, z);
    CHECK(dist(w, {std::sqrt(3.0), -1.0}) < 1e-12);
}

TEST_CASE("support point examples") {
    auto s1 = support_point(semidisc, {2 + std::sqrt(3.0), 1.0});
    CHECK(s1.kind == SupportKind::vertex1);
    CHECK(dist(s1.location, {1.0, 0.0}) < 1e-12);

    auto s2 = support_point(semidisc, {0.0, 2.0});
    CHECK(s2.kind == SupportKind::tangency);
    CHECK(dist(s2.location, {std::sqrt(3.0) / 2, 0.5}) < 1e-12);

    auto s3 = support_point(semidisc, {-2 - std::sqrt(3.0), 1.0});
    CHECK(s3.kind == SupportKind::tangency);
    CHECK(dist(s3.location, {0.0, 1.0}) < 1e-12);

    // vertex support away from the arc: below the flat side the supporting
    // corner is the left vertex (the shape must lie right of the image ray)
    auto s4 = support_point(semidisc, {3.0, -1.0});
    CHECK(s4.kind == SupportKind::vertex2);
    Point2 w = outer_billiard_step(semidisc, {3.0, -1.0});
    CHECK(dist(w, {-5.0, 1.0}) < 1e-12);
}

TEST_CASE("reflection identity z + F(z) = 2 p") {
    std::mt19937_64 rng(12345);
    std::uniform_real_distribution<double> ang(0.0, 2 * PI), rad(2.0, 50.0);
    for (int i = 0; i < 200; ++i) {
        double r = rad(rng), t = ang(rng);
        Point2 z{r * std::cos(t), r * std::sin(t)};
        SupportPoint p;
        try {
            p = support_point(semidisc, z);
        } catch (const Ambiguous&) {
            continue;
        }
        Point2 w = outer_billiard_step(semidisc, z);
        CHECK(std::abs(w.x + z.x - 2 * p.location.x) < 1e-14 * (1 + r));
        CHECK(std::abs(w.y + z.y - 2 * p.location.y) < 1e-14 * (1 + r));
    }
}

TEST_CASE("fast_step agrees with support enumeration") {
    for (double beta : {PI / 2, PI / 3, PI / 6}) {
        SectorShape shape(beta);
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> ang(0.0, 2 * PI), rad(1.5, 300.0);
        int checked = 0;
        for (int i = 0; i < 500; ++i) {
            double r = rad(rng), t = ang(rng);
            Point2 z{r * std::cos(t), r * std::sin(t)};
            SupportPoint p;
            try {
                p = support_point(shape, z);
            } catch (const Ambiguous&) {
                continue;
            }
            Point2 zf = z;
            SupportKind k = fast_step(shape, zf);
            CHECK(k == p.kind);
            Point2 w = outer_billiard_step(shape, z);
            CHECK(dist(zf, w) < 1e-11 * (1 + r));
            ++checked;
        }
        CHECK(checked > 400);
    }
}

TEST_CASE("region classification at large radius") {
    // upper chart bands: I below theta = pi/2 - 3/r, the vertex fan V between
    // x = 1 and x = 3, II above theta = pi/2 - 1/r
    CHECK(classify_region(semidisc, {100.0, 0.5}) == RegionId::I);
    CHECK(classify_region(semidisc, {2.0, 100.0}) == RegionId::V);
    double r = 100.0;
    CHECK(classify_region(semidisc, {r * std::cos(PI / 2 - 0.1), r * std::sin(PI / 2 - 0.1)}) ==
          RegionId::I);
    CHECK(classify_region(semidisc, {0.5, 100.0}) == RegionId::II);
    // lower chart: III mirrors I, IV mirrors II; the chart angle of (x, y) in
    // the lower half-plane is the polar angle of (-x, -y)
    CHECK(classify_region(semidisc, {-100.0 * std::cos(0.5), -100.0 * std::sin(0.5)}) ==
          RegionId::III);
    CHECK(classify_region(semidisc, {-0.5, -100.0}) == RegionId::IV);
    // the lower-chart double-tangency band around theta = pi/2
    CHECK(classify_region(semidisc, {-2.0, -100.0}) == RegionId::VI);
}

TEST_CASE("region compositions match F o F") {
    // named compositions per region
    auto R1 = [&](Point2 z) { return Point2{2 * semidisc.sb - z.x, -2 * semidisc.cb - z.y}; };
    auto R2 = [&](Point2 z) { return Point2{-2 * semidisc.sb - z.x, -2 * semidisc.cb - z.y}; };
    auto T = [&](Point2 z) {
        double n2 = norm2(z), s = std::sqrt(n2 - 1);
        Point2 p{(z.x + s * z.y) / n2, (z.y - s * z.x) / n2};
        return Point2{2 * p.x - z.x, 2 * p.y - z.y};
    };

    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> rad(50.0, 500.0), u01(0.0, 1.0);
    int counts[5] = {0, 0, 0, 0, 0};
    for (int i = 0; i < 6000; ++i) {
        double r = rad(rng);
        double t = u01(rng) * 2 * PI;
        Point2 z{r * std::cos(t), r * std::sin(t)};
        RegionId reg;
        try {
            reg = classify_region(semidisc, z);
        } catch (const std::exception&) {
            continue;
        }
        Point2 direct = f2_step(semidisc, z);
        Point2 composed;
        switch (reg) {
            case RegionId::I: composed = T(R1(z)); counts[0]++; break;
            case RegionId::II: composed = R2(T(z)); counts[1]++; break;
            case RegionId::III: composed = R1(T(z)); counts[2]++; break;
            case RegionId::IV: composed = T(R2(z)); counts[3]++; break;
            case RegionId::V: composed = R2(R1(z)); counts[4]++; break;
            default: continue;
        }
        CHECK(dist(direct, composed) < 1e-10 * (1 + r));
    }
    for (int k = 0; k < 4; ++k) CHECK(counts[k] > 100);
}

TEST_CASE("jacobian determinant is 1") {
    CHECK(std::abs(jacobian_det(semidisc, {50.0, 3.0}, 1e-5) - 1.0) < 1e-6);
    CHECK(std::abs(jacobian_det(semidisc, {0.0, 50.0}, 1e-5) - 1.0) < 1e-6);
    SectorShape third(PI / 3);
    CHECK(std::abs(jacobian_det(third, {-40.0, 5.0}, 1e-5) - 1.0) < 1e-6);

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ang(0.0, 2 * PI), rad(5.0, 100.0);
    int done = 0;
    for (int i = 0; i < 300 && done < 100; ++i) {
        double r = rad(rng), t = ang(rng);
        Point2 z{r * std::cos(t), r * std::sin(t)};
        try {
            CHECK(std::abs(jacobian_det(semidisc, z, 1e-5) - 1.0) < 1e-6);
            ++done;
        } catch (const std::exception&) {
        }
    }
    CHECK(done == 100);
}

TEST_CASE("polar chart round trip") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> ang(-PI + 0.01, PI - 0.01), lr(1.0, 6.0);
    for (int i = 0; i < 500; ++i) {
        double r = std::pow(10.0, lr(rng)), t = ang(rng);
        Point2 z{r * std::cos(t), r * std::sin(t)};
        Point2 back = to_cartesian(to_polar(z));
        CHECK(dist(z, back) < 1e-12 * r);
        PolarPoint p = to_polar(z);
        CHECK(p.theta >= 0.0);
        CHECK(p.theta <= PI);
    }
}

TEST_CASE("inside shape raises") {
    CHECK_THROWS_AS(support_point(semidisc, {0.1, 0.5}), InsideShape);
}
