#pragma once

// Truncated Taylor scalar ("jet") carrying a value and the first three
// derivatives with respect to one variable. Arithmetic and elementary
// functions propagate the coefficients, which gives machine-accurate
// derivatives of closed-form expressions without finite differencing.
//
// Internal storage is Taylor coefficients c[k] = f^(k)(x0) / k!.

#include <cmath>
#include <array>

namespace billiard_lab {

template <class Real>
struct Jet {
    std::array<Real, 4> c{};  // c[0] + c[1] h + c[2] h^2 + c[3] h^3

    Jet() = default;
    Jet(Real value) { c[0] = value; }  // NOLINT: implicit constant lift
    static Jet variable(Real x0) {
        Jet j;
        j.c[0] = x0;
        j.c[1] = Real(1);
        return j;
    }

    Real value() const { return c[0]; }
    Real d1() const { return c[1]; }
    Real d2() const { return Real(2) * c[2]; }
    Real d3() const { return Real(6) * c[3]; }

    Jet operator-() const {
        Jet r;
        for (int k = 0; k < 4; ++k) r.c[k] = -c[k];
        return r;
    }
    friend Jet operator+(const Jet& a, const Jet& b) {
        Jet r;
        for (int k = 0; k < 4; ++k) r.c[k] = a.c[k] + b.c[k];
        return r;
    }
    friend Jet operator-(const Jet& a, const Jet& b) {
        Jet r;
        for (int k = 0; k < 4; ++k) r.c[k] = a.c[k] - b.c[k];
        return r;
    }
    friend Jet operator*(const Jet& a, const Jet& b) {
        Jet r;
        for (int i = 0; i < 4; ++i)
            for (int j = 0; i + j < 4; ++j) r.c[i + j] += a.c[i] * b.c[j];
        return r;
    }
    friend Jet operator/(const Jet& a, const Jet& b) {
        // Long division of truncated series.
        Jet r;
        r.c[0] = a.c[0] / b.c[0];
        for (int k = 1; k < 4; ++k) {
            Real acc = a.c[k];
            for (int j = 1; j <= k; ++j) acc -= b.c[j] * r.c[k - j];
            r.c[k] = acc / b.c[0];
        }
        return r;
    }
    friend Jet operator+(Real s, const Jet& a) { return Jet(s) + a; }
    friend Jet operator-(Real s, const Jet& a) { return Jet(s) - a; }
    friend Jet operator*(Real s, const Jet& a) { return Jet(s) * a; }
    friend Jet operator/(Real s, const Jet& a) { return Jet(s) / a; }
    friend Jet operator+(const Jet& a, Real s) { return a + Jet(s); }
    friend Jet operator-(const Jet& a, Real s) { return a - Jet(s); }
    friend Jet operator*(const Jet& a, Real s) { return a * Jet(s); }
    friend Jet operator/(const Jet& a, Real s) { return a / Jet(s); }
};

namespace detail {

// Compose an analytic scalar function g (given by value and derivatives at
// a.c[0]) with the inner jet a.
template <class Real>
Jet<Real> compose(const Jet<Real>& a, Real g0, Real g1, Real g2, Real g3) {
    Jet<Real> u;  // the fluctuation part of a
    u.c[1] = a.c[1];
    u.c[2] = a.c[2];
    u.c[3] = a.c[3];
    Jet<Real> u2 = u * u;
    Jet<Real> u3 = u2 * u;
    Jet<Real> r = Jet<Real>(g0) + g1 * u + (g2 / Real(2)) * u2 + (g3 / Real(6)) * u3;
    return r;
}

}  // namespace detail

template <class Real>
Jet<Real> sin(const Jet<Real>& a) {
    using std::cos;
    using std::sin;
    Real s = sin(a.c[0]), c = cos(a.c[0]);
    return detail::compose(a, s, c, -s, -c);
}
template <class Real>
Jet<Real> cos(const Jet<Real>& a) {
    using std::cos;
    using std::sin;
    Real s = sin(a.c[0]), c = cos(a.c[0]);
    return detail::compose(a, c, -s, -c, s);
}
template <class Real>
Jet<Real> tan(const Jet<Real>& a) {
    return sin(a) / cos(a);
}
template <class Real>
Jet<Real> sqrt(const Jet<Real>& a) {
    using std::sqrt;
    Real v = sqrt(a.c[0]);
    Real g1 = Real(0.5) / v;
    Real g2 = Real(-0.25) / (v * a.c[0]);
    Real g3 = Real(0.375) / (v * a.c[0] * a.c[0]);
    return detail::compose(a, v, g1, g2, g3);
}

}  // namespace billiard_lab
