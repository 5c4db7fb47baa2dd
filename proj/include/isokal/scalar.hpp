#pragma once

// Scalar types usable with the library. Everything is templated on the
// scalar; `double` is the default and `Quad` (IEEE binary128 through
// libquadmath) is used where covariance matrices become too ill-conditioned
// for double, e.g. strongly unstable dynamics over long horizons. `Wide`
// carries 50 decimal digits for cases where even binary128 runs out
// (eigenvalue spreads like 0.3..2.5 over 30 steps give cond(P_k) ~ 1e25).

#include <cstdint>
#include <limits>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/float128.hpp>
#include <Eigen/Core>

namespace isokal {

using Quad = boost::multiprecision::float128;
using Wide = boost::multiprecision::number<boost::multiprecision::cpp_bin_float<50>,
                                           boost::multiprecision::et_off>;

template <class S>
inline double to_double(const S& x) {
  return static_cast<double>(x);
}

}  // namespace isokal

namespace isokal::detail {

template <class Q>
struct MultiprecisionTraits : Eigen::GenericNumTraits<Q> {
  using Real = Q;
  using NonInteger = Q;
  using Literal = Q;
  using Nested = Q;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 1,
    AddCost = 4,
    MulCost = 8
  };
  static inline Q epsilon() { return std::numeric_limits<Q>::epsilon(); }
  static inline Q dummy_precision() { return epsilon() * Q(1e6); }
  static inline Q highest() { return (std::numeric_limits<Q>::max)(); }
  static inline Q lowest() { return -(std::numeric_limits<Q>::max)(); }
  static inline Q infinity() { return std::numeric_limits<Q>::infinity(); }
  static inline Q quiet_NaN() { return std::numeric_limits<Q>::quiet_NaN(); }
  static inline int digits10() { return std::numeric_limits<Q>::digits10; }
  static inline int digits() { return std::numeric_limits<Q>::digits; }
};

}  // namespace isokal::detail

namespace Eigen {

template <>
struct NumTraits<isokal::Quad> : isokal::detail::MultiprecisionTraits<isokal::Quad> {};

template <>
struct NumTraits<isokal::Wide> : isokal::detail::MultiprecisionTraits<isokal::Wide> {};

}  // namespace Eigen
