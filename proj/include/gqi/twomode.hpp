// twomode.hpp — two-mode Gaussian machinery: Simon/Duan normal form, the
// double-cone rim with its closed-form local-determinant curve, GEOF by
// root-finding, and the analytic GEOA/GEOF pair for symmetric states.

#pragma once

#include <vector>

#include "gqi/symplectic.hpp"

namespace gqi::twomode {

template <typename R>
struct TwoModeNormalForm {
  R a, b, c_plus, c_minus;
  SymplecticTransform<R> local_ops;  // (S_A + S_B) sigma (S_A + S_B)^T = normal form

  Mat<R> sigma_phi() const {
    Mat<R> m(2, 2);
    m << a, c_plus, c_plus, b;
    return m;
  }
  Mat<R> sigma_pi() const {
    Mat<R> m(2, 2);
    m << a, c_minus, c_minus, b;
    return m;
  }
  CovarianceMatrix<R> assemble() const {
    Mat<R> out = Mat<R>::Zero(4, 4);
    out.topLeftCorner(2, 2) = sigma_phi();
    out.bottomRightCorner(2, 2) = sigma_pi();
    return {2, out};
  }
  // PT symplectic eigenvalues from the Simon invariants.
  std::pair<R, R> pt_spectrum() const {
    R det = sigma_phi().determinant() * sigma_pi().determinant();
    R delta = a * a + b * b - R(2) * c_plus * c_minus;
    R disc = sqrt(delta * delta - R(4) * det);
    return {sqrt((delta + disc) / R(2)), sqrt((delta - disc) / R(2))};
  }
};

namespace detail {

// 1-mode Williamson: S sigma S^T = nu I with S = (sigma/nu)^{-1/2} in SL(2).
template <typename R>
std::pair<Mat<R>, R> single_mode_normalize(const Mat<R>& s) {
  R nu = sqrt(s.determinant());
  if (!(nu > R(0))) throw NotPositiveDefinite("single-mode CM not PD");
  Mat<R> u = s / nu;
  // inverse sqrt of a 2x2 symmetric PD with det 1
  R tr = u(0, 0) + u(1, 1);
  R g = sqrt(tr + R(2));
  Mat<R> rt = (u + Mat<R>::Identity(2, 2)) / g;  // sqrt(u), det 1
  return {rt.inverse(), nu};
}

// Rotation-only SVD of a 2x2 block: Ra * C * Rb^T = diag(s1, s2) with
// Ra, Rb in SO(2), s1 >= |s2| (s2 may be negative).
template <typename R>
void rotation_svd(const Mat<R>& C, Mat<R>& Ra, Mat<R>& Rb, R& s1, R& s2,
                  const R& tol) {
  auto rot = [](const R& c, const R& s) {
    Mat<R> m(2, 2);
    m << c, s, -s, c;
    return m;
  };
  R scale = max_abs<R>(C);
  if (scale <= tol) {
    Ra = Rb = Mat<R>::Identity(2, 2);
    s1 = s2 = R(0);
    return;
  }
  Mat<R> G = C.transpose() * C;
  R gap = abs(G(0, 0) - G(1, 1)) + abs(G(0, 1));
  if (gap <= tol * scale * scale) {
    // C is a scaled orthogonal matrix; a left rotation alone diagonalizes
    s1 = sqrt(G(0, 0));
    Rb = Mat<R>::Identity(2, 2);
    Mat<R> O = C / s1;
    if (O.determinant() > R(0)) {
      Ra = O.transpose();
      s2 = s1;
    } else {
      Mat<R> Q = O * Mat<R>(rot(R(1), R(0)));  // O = Q diag(1,-1) with Q = O*diag(1,-1)
      Q(0, 1) = -O(0, 1);
      Q(1, 1) = -O(1, 1);
      Ra = Q.transpose();
      s2 = -s1;
    }
  } else {
    auto eg = sym_eig<R>(G);
    // descending singular values
    Vec<R> w = eg.values.cwiseMax(R(0));
    Mat<R> V(2, 2);
    V.col(0) = eg.vectors.col(1);
    V.col(1) = eg.vectors.col(0);
    if (V.determinant() < R(0)) V.col(1) *= R(-1);
    s1 = sqrt(w(1));
    s2 = sqrt(w(0));
    Vec<R> u1 = C * V.col(0) / s1;
    Vec<R> u2(2);
    if (s2 > tol * s1) {
      u2 = C * V.col(1) / s2;
    } else {
      u2 << -u1(1), u1(0);
    }
    Mat<R> U(2, 2);
    U.col(0) = u1;
    U.col(1) = u2;
    if (U.determinant() < R(0)) {
      U.col(1) *= R(-1);
      s2 = -s2;
    }
    Ra = U.transpose();
    Rb = V.transpose();
  }
  // enforce s1 >= |s2| >= ... and s1 >= 0 by construction
}

}  // namespace detail

template <typename R>
TwoModeNormalForm<R> two_mode_normal_form(
    const CovarianceMatrix<R>& sigma,
    const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  if (sigma.n != 2) throw DimensionMismatch("two_mode_normal_form: need 2 modes");
  // per-mode (phi, pi) sub-blocks
  auto mode_block = [&](const Mat<R>& M, Index i, Index j) {
    Mat<R> b(2, 2);
    b << M(i, j), M(i, 2 + j), M(2 + i, j), M(2 + i, 2 + j);
    return b;
  };
  Mat<R> sA = mode_block(sigma.data, 0, 0);
  Mat<R> sB = mode_block(sigma.data, 1, 1);
  auto [SA, nuA] = detail::single_mode_normalize<R>(sA);
  auto [SB, nuB] = detail::single_mode_normalize<R>(sB);

  auto embed_pair = [&](const Mat<R>& A2, const Mat<R>& B2) {
    Mat<R> T = Mat<R>::Zero(4, 4);
    T(0, 0) = A2(0, 0); T(0, 2) = A2(0, 1); T(2, 0) = A2(1, 0); T(2, 2) = A2(1, 1);
    T(1, 1) = B2(0, 0); T(1, 3) = B2(0, 1); T(3, 1) = B2(1, 0); T(3, 3) = B2(1, 1);
    return T;
  };
  Mat<R> T1 = embed_pair(SA, SB);
  Mat<R> s1m = symmetrize<R>(T1 * sigma.data * T1.transpose());

  Mat<R> C = mode_block(s1m, 0, 1);
  Mat<R> Ra, Rb;
  R cp, cm;
  detail::rotation_svd<R>(C, Ra, Rb, cp, cm, tol.symplectic);
  if (cp < R(0)) {  // flip both signs with a pi phase on mode B
    cp = -cp;
    cm = -cm;
    Rb = Mat<R>(-Rb);
  }
  Mat<R> T2 = embed_pair(Ra, Rb);
  Mat<R> T = T2 * T1;

  TwoModeNormalForm<R> nf{nuA, nuB, cp, cm, SymplecticTransform<R>{2, T}};
  Mat<R> resid = T * sigma.data * T.transpose() - nf.assemble().data;
  if (max_abs<R>(resid) > sqrt(tol.symplectic) * (R(1) + nuA + nuB))
    throw ConvergenceFailure("two_mode_normal_form: residual too large");
  return nf;
}

// ---------------------------------------------------------------------------
// DCV rim (App.-style ellipse in (z, x, y) Pauli coordinates)
// ---------------------------------------------------------------------------

template <typename R>
struct Vec3 {
  R z, x, y;
  Vec3 operator+(const Vec3& o) const { return {z + o.z, x + o.x, y + o.y}; }
  Vec3 operator*(const R& t) const { return {z * t, x * t, y * t}; }
};

template <typename R>
Mat<R> pauli_matrix(const Vec3<R>& v) {
  Mat<R> m(2, 2);
  m << v.y + v.z, v.x, v.x, v.y - v.z;
  return m;
}

template <typename R>
struct RimEllipse {
  Vec3<R> center, a1, a2;  // semi-major / semi-minor axes
  R alpha = R(0);          // rotation aligning the major axis
  R phi_offset = R(0);     // theta' = theta - phi_offset
  R gamma_a = R(0), gamma_b = R(0), gamma_c = R(1);
  bool glems = false;      // gamma_a * gamma_b ~ 0: rim degenerates
  Vec3<R> v_pi_inv, v0;
};

template <typename R>
R sgn0(const R& x) {
  return x >= R(0) ? R(1) : R(-1);
}

template <typename R>
RimEllipse<R> rim_parametrize(const TwoModeNormalForm<R>& nf,
                              const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  const R a = nf.a, b = nf.b, cp = nf.c_plus, cm = nf.c_minus;
  RimEllipse<R> rim;
  rim.gamma_c = a * b - cm * cm;
  rim.gamma_a = a * rim.gamma_c - b;
  rim.gamma_b = b * rim.gamma_c - a;
  rim.v_pi_inv = {-(a - b) / (R(2) * rim.gamma_c), -cm / rim.gamma_c,
                  (a + b) / (R(2) * rim.gamma_c)};
  R z0 = (a - b) / R(2) * (R(1) + R(1) / rim.gamma_c);
  R x0 = cp + cm / rim.gamma_c;
  R y0 = (a + b) / R(2) * (R(1) - R(1) / rim.gamma_c);
  rim.v0 = {z0, x0, y0};
  rim.center = rim.v_pi_inv + rim.v0 * (R(1) / R(2));

  if (rim.gamma_a * rim.gamma_b <= tol.feasibility) {
    rim.glems = true;
    return rim;
  }
  R rho = sqrt(x0 * x0 + z0 * z0);
  R sin_a = z0 / rho, cos_a = x0 / rho;
  rim.alpha = atan2(sin_a, cos_a);
  rim.a1 = Vec3<R>{y0 * sin_a, y0 * cos_a, rho} * (R(1) / R(2));
  R minor = y0 * y0 - x0 * x0 - z0 * z0;
  minor = minor > R(0) ? sqrt(minor) : R(0);
  rim.a2 = Vec3<R>{minor * cos_a, -minor * sin_a, R(0)} * (R(1) / R(2));
  rim.phi_offset = -atan(z0 * minor / (x0 * y0)) +
                   boost::math::constants::pi<R>() * (R(1) - sgn0(x0)) / R(2);
  return rim;
}

template <typename R>
Mat<R> rim_point(const RimEllipse<R>& rim, const R& theta) {
  Vec3<R> p = rim.center + rim.a1 * cos(theta) + rim.a2 * sin(theta);
  return pauli_matrix<R>(p);
}

// Local determinant along the rim as a function of theta' = theta - phi_offset.
template <typename R>
R local_det_curve(const TwoModeNormalForm<R>& nf, const R& tp) {
  const R a = nf.a, b = nf.b, cp = nf.c_plus, cm = nf.c_minus;
  R gc = a * b - cm * cm;
  R ga = a * gc - b, gb = b * gc - a;
  R rad = sqrt(ga * gb);
  R A = cp * gc - cm + cos(tp) * rad;
  R s_arg = R(1) - pow(cp * gc + cm, 2) / (ga * gb);
  s_arg = s_arg > R(0) ? sqrt(s_arg) : R(0);
  R bracket = R(2) * a * b * cm * cm * cm + (a * a + b * b) * cp * cm * cm +
              ((R(1) - R(2) * b * b) * a * a + b * b) * cm -
              a * b * (a * a + b * b - R(2)) * cp;
  R D = R(2) * gc * (a * a + b * b + R(2) * cm * cp) +
        R(2) * gc * sin(tp) * (a * a - b * b) * s_arg -
        R(2) * gc * cos(tp) * bracket / rad;
  return R(1) + A * A / D;
}

namespace detail {

// d m / d theta' up to the positive factor 1/D^2: g = 2 A' D - A D'.
template <typename R>
R stationarity(const TwoModeNormalForm<R>& nf, const R& tp) {
  const R a = nf.a, b = nf.b, cp = nf.c_plus, cm = nf.c_minus;
  R gc = a * b - cm * cm;
  R ga = a * gc - b, gb = b * gc - a;
  R rad = sqrt(ga * gb);
  R A = cp * gc - cm + cos(tp) * rad;
  R Ap = -sin(tp) * rad;
  R s_arg = R(1) - pow(cp * gc + cm, 2) / (ga * gb);
  s_arg = s_arg > R(0) ? sqrt(s_arg) : R(0);
  R bracket = R(2) * a * b * cm * cm * cm + (a * a + b * b) * cp * cm * cm +
              ((R(1) - R(2) * b * b) * a * a + b * b) * cm -
              a * b * (a * a + b * b - R(2)) * cp;
  R D = R(2) * gc * (a * a + b * b + R(2) * cm * cp) +
        R(2) * gc * sin(tp) * (a * a - b * b) * s_arg -
        R(2) * gc * cos(tp) * bracket / rad;
  R Dp = R(2) * gc * cos(tp) * (a * a - b * b) * s_arg +
         R(2) * gc * sin(tp) * bracket / rad;
  return R(2) * Ap * D - A * Dp;
}

}  // namespace detail

template <typename R>
struct GeofResult {
  Mat<R> x_opt;           // 2x2 X on the rim (normal-form frame)
  R theta_prime;
  R local_det;            // m(theta'*) >= 1
  R negativity;           // log-negativity of the assembled pure state
  bool separable = false;
  bool glems = false;
};

template <typename R>
R negativity_of_x(const Mat<R>& X) {
  PureStateXY<R> xy{X, Mat<R>::Zero(X.rows(), X.cols())};
  return log_negativity<R>(assemble_pure<R>(xy), X.rows() / 2 + X.rows() % 2);
}

template <typename R>
GeofResult<R> geof_two_mode(const TwoModeNormalForm<R>& nf,
                            const Tolerances<R>& tol = Tolerances<R>::defaults(),
                            int brackets = 720) {
  const R pi = boost::math::constants::pi<R>();
  auto rim = rim_parametrize<R>(nf, tol);
  GeofResult<R> out;
  out.glems = rim.glems;

  if (rim.glems) {
    // degenerate branch: evaluate the two cone apexes directly
    Mat<R> lo = nf.sigma_pi().inverse();
    Mat<R> hi = nf.sigma_phi();
    auto mval = [&](const Mat<R>& X) {
      return R(1) + X(0, 1) * X(0, 1) / X.determinant();
    };
    if (mval(lo) <= mval(hi)) {
      out.x_opt = lo;
    } else {
      out.x_opt = hi;
    }
    out.local_det = mval(out.x_opt);
    out.theta_prime = R(0);
    out.negativity = negativity_of_x<R>(out.x_opt);
    out.separable = out.negativity <= tol.feasibility;
    return out;
  }

  auto [ntp, ntm] = nf.pt_spectrum();
  (void)ntp;
  std::vector<R> roots;
  if (ntm >= R(1) - tol.purity) {
    // separable: the rim crosses the x = 0 plane
    R carg = (nf.c_minus - rim.gamma_c * nf.c_plus) / sqrt(rim.gamma_a * rim.gamma_b);
    carg = carg > R(1) ? R(1) : (carg < R(-1) ? R(-1) : carg);
    roots.push_back(acos(carg));
    roots.push_back(-acos(carg));
    out.separable = true;
  }
  // stationary points of the local determinant; scan one bracket past pi so
  // a root sitting exactly on the period seam is still bracketed
  auto g = [&](const R& tp) {
    return detail::stationarity<R>(nf, tp > pi ? tp - R(2) * pi : tp);
  };
  R lo = -pi, glo = g(lo);
  for (int k = 1; k <= brackets + 1; ++k) {
    R hi = -pi + R(2) * pi * R(k) / R(brackets);
    R ghi = g(hi);
    if ((glo <= R(0) && ghi > R(0)) || (glo >= R(0) && ghi < R(0))) {
      R a0 = lo, b0 = hi, ga0 = glo;
      for (int it = 0; it < 300; ++it) {
        R mid = (a0 + b0) / R(2);
        R gm = g(mid);
        if (gm == R(0) || (b0 - a0) < real_eps<R>() * R(8)) {
          a0 = b0 = mid;
          break;
        }
        if ((ga0 <= R(0)) == (gm <= R(0))) {
          a0 = mid;
          ga0 = gm;
        } else {
          b0 = mid;
        }
      }
      R root = (a0 + b0) / R(2);
      if (root > pi) root -= R(2) * pi;
      roots.push_back(root);
    }
    lo = hi;
    glo = ghi;
  }
  if (roots.empty()) throw RootFindingFailure("geof_two_mode: no stationary points");

  R best = R(0);
  bool first = true;
  for (const R& tp : roots) {
    R m = local_det_curve<R>(nf, tp);
    if (first || m < best) {
      best = m;
      out.theta_prime = tp;
      first = false;
    }
  }
  out.local_det = best;
  out.x_opt = rim_point<R>(rim, out.theta_prime + rim.phi_offset);
  out.negativity = negativity_of_x<R>(out.x_opt);
  if (out.separable) out.negativity = R(0);
  return out;
}

// ---------------------------------------------------------------------------
// Analytic GEOA / GEOF for symmetric two-mode states
// ---------------------------------------------------------------------------

template <typename R>
struct SymmetricExtremes {
  Mat<R> x_geof, x_geoa;  // 2x2
  Mat<R> y_geof, y_geoa;  // 4x4 PSD noise
  R geof_negativity, geoa_negativity;
};

template <typename R>
SymmetricExtremes<R> symmetric_extremes(
    const R& a, const R& cp, const R& cm,
    const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  if (cp < abs(cm) - tol.feasibility)
    throw NotSymmetric("symmetric_extremes: require c+ >= |c-|");
  R phys_p = (a + cp) * (a + cm) - R(1);
  R phys_m = (a - cp) * (a - cm) - R(1);
  if (a < R(1) - tol.feasibility || phys_p < -tol.feasibility ||
      phys_m < -tol.feasibility)
    throw Unphysical("symmetric_extremes: state not physical");

  Mat<R> spi(2, 2);
  spi << a, cm, cm, a;
  Mat<R> spi_inv = spi.inverse();
  Mat<R> plus(2, 2), minus(2, 2);
  plus << R(1), R(1), R(1), R(1);
  minus << R(1), R(-1), R(-1), R(1);

  SymmetricExtremes<R> out;
  out.x_geof = spi_inv + ((a - cp) / R(2) - R(1) / (R(2) * (a - cm))) * minus;
  out.x_geoa = spi_inv + ((a + cp) / R(2) - R(1) / (R(2) * (a + cm))) * plus;

  R m11 = phys_p / (R(2) * (a + cm));
  R m22 = phys_m / (R(2) * (a - cp));
  R n11 = phys_m / (R(2) * (a - cm));
  R n22 = phys_p / (R(2) * (a + cp));
  out.y_geof = Mat<R>::Zero(4, 4);
  out.y_geof.topLeftCorner(2, 2) = m11 * plus;
  out.y_geof.bottomRightCorner(2, 2) = m22 * minus;
  out.y_geoa = Mat<R>::Zero(4, 4);
  out.y_geoa.topLeftCorner(2, 2) = n11 * minus;
  out.y_geoa.bottomRightCorner(2, 2) = n22 * plus;

  R nt_plus = sqrt((a - cm) * (a + cp));
  R nt_minus = sqrt((a + cm) * (a - cp));
  R ln2 = log(R(2));
  out.geoa_negativity = log(nt_plus) / ln2;                          // = -log2(1/nt+)
  out.geof_negativity = nt_minus < R(1) ? -log(nt_minus) / ln2 : R(0);
  return out;
}

}  // namespace gqi::twomode
