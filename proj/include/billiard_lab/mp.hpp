#pragma once

// Multiprecision scalar used where long double head-room is insufficient
// (high-order remainder measurements and the numeric chart tails).

#include <boost/multiprecision/cpp_bin_float.hpp>

namespace billiard_lab {

using mp50 = boost::multiprecision::cpp_bin_float_50;

template <class Real>
Real pi_v() {
    return Real(3.14159265358979323846264338327950288419716939937510L);
}

template <>
inline mp50 pi_v<mp50>() {
    return boost::math::constants::pi<mp50>();
}

}  // namespace billiard_lab
