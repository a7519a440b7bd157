// real.hpp — scalar abstraction: hardware double or software extended precision
//
// All numerical kernels in this library are templated on a real scalar type R.
// Two instantiations are supported: `double` and `gqi::BigFloat`, an
// MPFR-backed float whose mantissa is set at runtime (default 256 bits).

#pragma once

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/mpfr.hpp>

#include <Eigen/Core>
#include <cmath>
#include <limits>
#include <string>

namespace gqi {

namespace bmp = boost::multiprecision;

using BigFloat = bmp::number<bmp::mpfr_float_backend<0>, bmp::et_off>;

// Mantissa bits -> decimal digits for the variable-precision backend.
// Affects the calling thread only; call once at startup (and in each worker).
inline void set_precision_bits(unsigned bits) {
  unsigned digits = static_cast<unsigned>(bits * 0.30103) + 2;
  BigFloat::default_precision(digits);
}

inline unsigned precision_bits() {
  return static_cast<unsigned>((BigFloat::default_precision() - 2) / 0.30103);
}

template <typename R>
R real_from_string(const std::string& s) {
  return R(s);
}
template <>
inline double real_from_string<double>(const std::string& s) {
  return std::stod(s);
}

template <typename R>
std::string real_to_string(const R& x) {
  return x.str(0, std::ios_base::scientific);
}
template <>
inline std::string real_to_string<double>(const double& x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17e", x);
  return buf;
}

template <typename R>
R real_eps() {
  return std::numeric_limits<R>::epsilon();
}

// Working tolerances. The paper states none; these are engineering choices,
// configurable at every call site that takes a Tolerances argument.
template <typename R>
struct Tolerances {
  R symplectic;   // max |S Omega S^T - Omega|
  R purity;       // |nu - 1| below this counts as a purity
  R feasibility;  // PSD/feasibility slack in conic routines
  R degeneracy;   // relative spacing below this flags a degenerate spectrum

  static Tolerances defaults() {
    R eps = real_eps<R>();
    Tolerances t;
    t.symplectic = eps * R(1e4);
    t.purity = sqrt(eps) * R(1e-1);
    t.feasibility = sqrt(eps) * R(1e-2);
    t.degeneracy = eps * R(1e6);
    return t;
  }
};

template <>
inline Tolerances<double> Tolerances<double>::defaults() {
  return Tolerances<double>{1e-12, 1e-9, 1e-10, 1e-10};
}

using std::abs;
using std::acos;
using std::atan;
using std::atan2;
using std::cos;
using std::cosh;
using std::exp;
using std::floor;
using std::log;
using std::log2;
using std::pow;
using std::sin;
using std::sinh;
using std::sqrt;
using std::tanh;

}  // namespace gqi

// Eigen traits for the MPFR-backed scalar. boost 1.74 ships an adapter that
// predates Eigen 3.4's use of NumTraits::infinity/quiet_NaN, so the
// specialization is provided here in full instead.
namespace Eigen {

template <>
struct NumTraits<gqi::BigFloat> : GenericNumTraits<gqi::BigFloat> {
  typedef gqi::BigFloat NonInteger;
  typedef gqi::BigFloat Nested;
  typedef gqi::BigFloat Literal;
  enum {
    IsComplex = 0,
    IsInteger = 0,
    IsSigned = 1,
    RequireInitialization = 1,
    ReadCost = 2,
    AddCost = 8,
    MulCost = 16
  };
  static inline gqi::BigFloat epsilon() {
    return std::numeric_limits<gqi::BigFloat>::epsilon();
  }
  static inline gqi::BigFloat dummy_precision() { return epsilon() * 1000; }
  static inline gqi::BigFloat highest() {
    return (std::numeric_limits<gqi::BigFloat>::max)();
  }
  static inline gqi::BigFloat lowest() {
    return (std::numeric_limits<gqi::BigFloat>::lowest)();
  }
  static inline int digits10() {
    return static_cast<int>(gqi::BigFloat::default_precision());
  }
  static inline gqi::BigFloat infinity() {
    return std::numeric_limits<gqi::BigFloat>::infinity();
  }
  static inline gqi::BigFloat quiet_NaN() {
    return std::numeric_limits<gqi::BigFloat>::quiet_NaN();
  }
};

}  // namespace Eigen
