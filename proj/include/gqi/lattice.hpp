// lattice.hpp — free scalar-field vacuum on a 1d lattice: full-volume OBC
// covariance matrices, infinite-volume correlators by Brillouin-zone
// quadrature, and extraction of two disjoint detector regions.

#pragma once

#include <map>
#include <optional>
#include <vector>

#include "gqi/quadrature.hpp"
#include "gqi/symplectic.hpp"

namespace gqi::lattice {

enum class Boundary { obc, infinite };

struct LatticeSpec {
  Boundary boundary = Boundary::obc;
  Index sites = 0;      // N, obc only
  double mass = 0.0;    // lattice units
  Index d = 1;          // sites per region
  Index rtilde = 0;     // sites between the regions

  static LatticeSpec obc(Index n, double m, Index d, Index rt) {
    return {Boundary::obc, n, m, d, rt};
  }
  static LatticeSpec infinite(double m, Index d, Index rt) {
    return {Boundary::infinite, 0, m, d, rt};
  }
};

// Full OBC volume: coupling K = tridiag(-1, m^2 + 2, -1) has the discrete
// sine transform as its exact eigenbasis, so sigma_phi = K^{-1/2} and
// sigma_pi = K^{1/2} are assembled analytically at working precision.
template <typename R>
CovarianceMatrix<R> vacuum_cm(const LatticeSpec& spec) {
  if (spec.boundary != Boundary::obc)
    throw GeometryError("vacuum_cm: full-volume CM requires obc");
  Index N = spec.sites;
  if (N <= 0) throw GeometryError("vacuum_cm: no sites");
  R m2 = R(spec.mass) * R(spec.mass);
  R pi = boost::math::constants::pi<R>();

  Vec<R> lam(N);
  for (Index k = 0; k < N; ++k) {
    R s = sin(R(k + 1) * pi / R(2 * (N + 1)));
    lam(k) = m2 + R(4) * s * s;
    if (lam(k) <= R(0)) throw SingularCoupling("vacuum_cm: singular coupling");
  }
  Mat<R> V(N, N);
  R norm = sqrt(R(2) / R(N + 1));
  for (Index j = 0; j < N; ++j)
    for (Index k = 0; k < N; ++k)
      V(j, k) = norm * sin(R((j + 1) * (k + 1)) * pi / R(N + 1));

  Vec<R> li = lam.array().sqrt().inverse();
  Vec<R> ls = lam.array().sqrt();
  Mat<R> sphi = V * li.asDiagonal() * V.transpose();
  Mat<R> spi = V * ls.asDiagonal() * V.transpose();

  Mat<R> out = Mat<R>::Zero(2 * N, 2 * N);
  out.topLeftCorner(N, N) = symmetrize<R>(sphi);
  out.bottomRightCorner(N, N) = symmetrize<R>(spi);
  return {N, out};
}

// Infinite-volume two-point functions at integer site offsets,
//   sigma_phi(r) = (1/2pi) Int_{-pi}^{pi} dk cos(k r) / omega_k ,
//   sigma_pi(r)  = (1/2pi) Int_{-pi}^{pi} dk cos(k r) * omega_k ,
// with omega_k = sqrt(m^2 + 4 sin^2(k/2)).
template <typename R>
struct CorrelatorTable {
  R mass;
  R quad_tol;
  std::map<Index, std::pair<R, R>> entries;  // offset -> (phi, pi)

  const std::pair<R, R>& at(Index offset) const {
    auto it = entries.find(offset);
    if (it == entries.end())
      throw GeometryError("correlator table: missing offset");
    return it->second;
  }
};

template <typename R>
CorrelatorTable<R> infinite_vacuum_blocks(const R& mass,
                                          const std::vector<Index>& offsets,
                                          const R& quad_tol) {
  if (mass < real_from_string<R>("1e-30"))
    throw MassTooSmall("infinite_vacuum_blocks: regulator mass below 1e-30");
  R pi = boost::math::constants::pi<R>();
  CorrelatorTable<R> table{mass, quad_tol, {}};
  for (Index r : offsets) {
    if (table.entries.count(r)) continue;
    auto omega_k = [&](const R& k) {
      R s = sin(k / R(2));
      return sqrt(mass * mass + R(4) * s * s);
    };
    auto fphi = [&](const R& k) { return cos(R(r) * k) / omega_k(k); };
    auto fpi = [&](const R& k) { return cos(R(r) * k) * omega_k(k); };
    int levels = 18;
    R phi = tanh_sinh_integrate<R>(fphi, R(0), pi, quad_tol, levels).value / pi;
    R piv = tanh_sinh_integrate<R>(fpi, R(0), pi, quad_tol, levels).value / pi;
    table.entries.emplace(r, std::make_pair(phi, piv));
  }
  return table;
}

template <typename R>
CorrelatorTable<R> infinite_vacuum_blocks(const R& mass, Index max_offset,
                                          const R& quad_tol) {
  std::vector<Index> offs(max_offset + 1);
  std::iota(offs.begin(), offs.end(), 0);
  return infinite_vacuum_blocks<R>(mass, offs, quad_tol);
}

// Two-region reduced state. Mode order: A sites reversed from lattice order,
// then B sites in lattice order, so the CM is symmetric under A<->B swap.
template <typename R>
struct RegionCM {
  Index d = 0;
  Mat<R> sigma_phi;     // 2d x 2d
  Mat<R> sigma_pi;      // 2d x 2d
  Mat<R> sigma_pi_inv;  // inverse of the 2d-mode pi block

  Mat<R> phi_a() const { return sigma_phi.topLeftCorner(d, d); }
  Mat<R> phi_ab() const { return sigma_phi.topRightCorner(d, d); }
  Mat<R> pi_a() const { return sigma_pi.topLeftCorner(d, d); }
  Mat<R> pi_ab() const { return sigma_pi.topRightCorner(d, d); }
  Mat<R> pi_inv_a() const { return sigma_pi_inv.topLeftCorner(d, d); }
  Mat<R> pi_inv_ab() const { return sigma_pi_inv.topRightCorner(d, d); }

  CovarianceMatrix<R> full() const {
    Mat<R> out = Mat<R>::Zero(4 * d, 4 * d);
    out.topLeftCorner(2 * d, 2 * d) = sigma_phi;
    out.bottomRightCorner(2 * d, 2 * d) = sigma_pi;
    return {2 * d, out};
  }
};

// Validation report for the RegionCM invariants.
template <typename R>
struct RegionChecks {
  R ab_asymmetry;        // max |block(A) - block(B)|, both quadratures
  R min_phi_ab_eig;      // Eq.-fieldproperty positivity of sigma_phi,AB
  R min_pi_inv_ab_eig;   // and of (sigma_pi^-1)_AB
  bool ab_symmetric(const R& tol) const { return ab_asymmetry <= tol; }
  bool field_property(const R& tol) const {
    return min_phi_ab_eig >= -tol && min_pi_inv_ab_eig >= -tol;
  }
};

template <typename R>
RegionChecks<R> check_region(const RegionCM<R>& rc) {
  Index d = rc.d;
  auto J = [&](const Mat<R>& M) {  // A<->B swap
    Mat<R> out(2 * d, 2 * d);
    out.topLeftCorner(d, d) = M.bottomRightCorner(d, d);
    out.bottomRightCorner(d, d) = M.topLeftCorner(d, d);
    out.topRightCorner(d, d) = M.bottomLeftCorner(d, d);
    out.bottomLeftCorner(d, d) = M.topRightCorner(d, d);
    return out;
  };
  RegionChecks<R> out;
  out.ab_asymmetry = std::max(max_abs<R>(rc.sigma_phi - J(rc.sigma_phi)),
                              max_abs<R>(rc.sigma_pi - J(rc.sigma_pi)));
  out.min_phi_ab_eig = min_eigenvalue<R>(rc.phi_ab());
  out.min_pi_inv_ab_eig = min_eigenvalue<R>(rc.pi_inv_ab());
  return out;
}

namespace detail {

// 0-based lattice sites of the region modes: A reversed, then B.
inline std::vector<Index> region_sites(Index N, Index d, Index rt) {
  Index span = 2 * d + rt;
  if (span > N) throw GeometryError("regions exceed the volume");
  Index s = (N - span) / 2;  // centered placement
  std::vector<Index> sites;
  for (Index i = 0; i < d; ++i) sites.push_back(s + d - 1 - i);
  for (Index i = 0; i < d; ++i) sites.push_back(s + d + rt + i);
  return sites;
}

}  // namespace detail

template <typename R>
RegionCM<R> extract_regions(const CovarianceMatrix<R>& full_volume,
                            const LatticeSpec& spec) {
  auto sites = detail::region_sites(full_volume.n, spec.d, spec.rtilde);
  auto sub = reduce<R>(full_volume, sites);
  RegionCM<R> rc;
  rc.d = spec.d;
  rc.sigma_phi = sub.phi_block();
  rc.sigma_pi = sub.pi_block();
  rc.sigma_pi_inv = rc.sigma_pi.inverse();
  return rc;
}

template <typename R>
RegionCM<R> extract_regions(const CorrelatorTable<R>& table,
                            const LatticeSpec& spec) {
  Index d = spec.d, rt = spec.rtilde;
  RegionCM<R> rc;
  rc.d = d;
  rc.sigma_phi.resize(2 * d, 2 * d);
  rc.sigma_pi.resize(2 * d, 2 * d);
  // A reversed: within-region offsets |i-j|, cross offsets rt + i + j + 1.
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) {
      auto [pA, kA] = table.at(std::abs(i - j));
      auto [pX, kX] = table.at(rt + i + j + 1);
      rc.sigma_phi(i, j) = rc.sigma_phi(d + i, d + j) = pA;
      rc.sigma_pi(i, j) = rc.sigma_pi(d + i, d + j) = kA;
      rc.sigma_phi(i, d + j) = rc.sigma_phi(d + j, i) = pX;
      rc.sigma_pi(i, d + j) = rc.sigma_pi(d + j, i) = kX;
    }
  rc.sigma_pi_inv = rc.sigma_pi.inverse();
  return rc;
}

template <typename R>
RegionCM<R> region_cm(const LatticeSpec& spec, const R& quad_tol = R(0)) {
  if (spec.boundary == Boundary::obc)
    return extract_regions<R>(vacuum_cm<R>(spec), spec);
  R tol = quad_tol > R(0) ? quad_tol : sqrt(real_eps<R>()) * real_from_string<R>("1e-3");
  auto table = infinite_vacuum_blocks<R>(R(spec.mass),
                                         2 * spec.d + spec.rtilde, tol);
  return extract_regions<R>(table, spec);
}

}  // namespace gqi::lattice
