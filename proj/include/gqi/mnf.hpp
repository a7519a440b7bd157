// mnf.hpp — PT-SOL minimum-noise filtering for AB-symmetric,
// phi-pi-uncorrelated regions: V+-/V-+ subspace bases, the consolidation
// transform into (1_A x 1_B) PT-core pairs, iterative core-by-core noise
// identification, and the rank-one decomposition that feeds the measurement
// protocol.

#pragma once

#include <vector>

#include "gqi/lattice.hpp"
#include "gqi/symplectic.hpp"
#include "gqi/twomode.hpp"

namespace gqi::mnf {

using lattice::RegionCM;

enum class Subspace {
  v_plus,   // sigma_pm = (phiA + phiAB) + (piA - piAB): GEOA direction
  v_minus,  // sigma_mp = (phiA - phiAB) + (piA + piAB): negativity direction
};

namespace detail {

// L A L^T = D and L^-T B L^-1 = D for a phi-pi-uncorrelated pair (A, B):
// the normal form of A + B restricted to the L + L^-T shape.
template <typename R>
std::pair<Mat<R>, Vec<R>> xp_normalize(const Mat<R>& A, const Mat<R>& B) {
  Mat<R> Ar = sym_sqrt<R>(A);
  auto eig = sym_eig<R>(Mat<R>(Ar * B * Ar));
  Index d = A.rows();
  Vec<R> nu(d);
  Mat<R> W(d, d);
  for (Index j = 0; j < d; ++j) {  // descending
    R v = eig.values(d - 1 - j);
    nu(j) = v > R(0) ? sqrt(v) : R(0);
    W.col(j) = eig.vectors.col(d - 1 - j);
  }
  Mat<R> L = nu.array().sqrt().matrix().asDiagonal() * W.transpose() *
             sym_inv_sqrt<R>(A);
  return {L, nu};
}

template <typename R>
SymplecticTransform<R> xp_transform(const Mat<R>& L) {
  Index d = L.rows();
  Mat<R> S = Mat<R>::Zero(2 * d, 2 * d);
  S.topLeftCorner(d, d) = L;
  S.bottomRightCorner(d, d) = L.inverse().transpose();
  return {d, S};
}

}  // namespace detail

template <typename R>
struct PtSolBasis {
  Index d = 0;
  Mat<R> l_plus, l_minus;   // d x d maps defining S = L + L^-T per subspace
  Vec<R> nu_plus, nu_minus; // PT symplectic eigenvalues, descending
  SymplecticTransform<R> s_tilde;  // 2d-mode, diagonalizes the PT CM;
                                   // plus-set modes first
  R sol_residual = R(0);
  bool degenerate = false;
};

template <typename R>
PtSolBasis<R> vpm_basis(const RegionCM<R>& region,
                        const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  auto checks = lattice::check_region<R>(region);
  if (!checks.ab_symmetric(sqrt(tol.feasibility)))
    throw NotSymmetricAB("vpm_basis: region is not AB-symmetric");
  Index d = region.d;
  PtSolBasis<R> out;
  out.d = d;
  auto [lp, np] = detail::xp_normalize<R>(Mat<R>(region.phi_a() + region.phi_ab()),
                                          Mat<R>(region.pi_a() - region.pi_ab()));
  auto [lm, nm] = detail::xp_normalize<R>(Mat<R>(region.phi_a() - region.phi_ab()),
                                          Mat<R>(region.pi_a() + region.pi_ab()));
  out.l_plus = lp;
  out.l_minus = lm;
  out.nu_plus = np;
  out.nu_minus = nm;
  for (Index j = 0; j + 1 < d; ++j)
    if (abs(np(j) - np(j + 1)) <= tol.degeneracy * np(j) ||
        abs(nm(j) - nm(j + 1)) <= tol.degeneracy * nm(j))
      out.degenerate = true;

  // s_tilde = (S_pm + S_mp) S_0 in the phi-first layout; S_0 rotates (A, B)
  // into sum/difference combinations in both quadratures.
  R inv_rt2 = R(1) / sqrt(R(2));
  Mat<R> S0 = Mat<R>::Zero(4 * d, 4 * d);
  for (Index i = 0; i < d; ++i) {
    S0(i, i) = S0(i, d + i) = inv_rt2;            // phi, plus set
    S0(d + i, i) = -inv_rt2;                      // phi, minus set
    S0(d + i, d + i) = inv_rt2;
    S0(2 * d + i, 2 * d + i) = S0(2 * d + i, 3 * d + i) = inv_rt2;  // pi
    S0(3 * d + i, 2 * d + i) = -inv_rt2;
    S0(3 * d + i, 3 * d + i) = inv_rt2;
  }
  auto Sp = detail::xp_transform<R>(lp);
  auto Sm = detail::xp_transform<R>(lm);
  out.s_tilde = {2 * d, Mat<R>(direct_sum<R>(Sp, Sm).data * S0)};

  // diagonalization residual on the PT CM
  auto pt = partial_transpose<R>(region.full(), d);
  Mat<R> diag = out.s_tilde.data * pt.data * out.s_tilde.data.transpose();
  Mat<R> expect = Mat<R>::Zero(4 * d, 4 * d);
  for (Index j = 0; j < d; ++j) {
    expect(j, j) = expect(2 * d + j, 2 * d + j) = np(j);
    expect(d + j, d + j) = expect(3 * d + j, 3 * d + j) = nm(j);
  }
  if (max_abs<R>(diag - expect) > sqrt(tol.symplectic) * (R(1) + np(0)))
    throw ConvergenceFailure("vpm_basis: PT diagonalization residual");

  // SOL identities on the A-halves of both subspace row sets
  Mat<R> omega_a = omega<R>(d);
  R resid(0);
  for (int set = 0; set < 2; ++set) {
    Mat<R> rows(2 * d, 2 * d);  // A-half of (phi rows, pi rows) of the set
    for (Index j = 0; j < d; ++j) {
      Index phi_row = set == 0 ? j : d + j;
      Index pi_row = 2 * d + phi_row;
      rows.row(j) << out.s_tilde.data.row(phi_row).segment(0, d),
          out.s_tilde.data.row(phi_row).segment(2 * d, d);
      rows.row(d + j) << out.s_tilde.data.row(pi_row).segment(0, d),
          out.s_tilde.data.row(pi_row).segment(2 * d, d);
    }
    resid = std::max(resid, max_abs<R>(Mat<R>(rows * omega_a * rows.transpose() -
                                              omega_a / R(2))));
  }
  out.sol_residual = resid;
  if (resid > sqrt(tol.symplectic))
    throw SolViolation("vpm_basis: SOL residual " + real_to_string(resid));
  return out;
}

// Consolidation into PT-core pairs: S_A + S_B local transform; the sign flip
// on A for the plus subspace realigns the noise into the universal core form.
template <typename R>
SymplecticTransform<R> consolidate(const PtSolBasis<R>& basis, Subspace sub) {
  Mat<R> L = sub == Subspace::v_plus ? basis.l_plus : basis.l_minus;
  auto S_half = detail::xp_transform<R>(L);
  Mat<R> SA = sub == Subspace::v_plus ? Mat<R>(-S_half.data) : S_half.data;
  return direct_sum<R>(SymplecticTransform<R>{basis.d, SA}, S_half);
}

template <typename R>
struct RankOneComponent {
  R value;        // eigenvalue y: component = y |v><v|
  Vec<R> vector;  // unit vector, 4d entries (phi block then pi block)
  bool pi_type;   // supported in the pi phase space
  Index core;     // PT-core index the component purifies (-1: eigen split)
};

template <typename R>
struct MnfResult {
  CovarianceMatrix<R> sigma0;                  // pure, original region basis
  Mat<R> noise;                                // Y = sigma_AB - sigma0
  std::vector<RankOneComponent<R>> rank_one;   // protocol order
  std::vector<R> core_negativities;            // descending
  SymplecticTransform<R> consolidation;
  R total_negativity = R(0);
  bool degenerate = false;
};

template <typename R>
MnfResult<R> mnf_filter(const RegionCM<R>& region, Subspace sub,
                        const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  Index d = region.d;
  auto basis = vpm_basis<R>(region, tol);
  auto T = consolidate<R>(basis, sub);
  CovarianceMatrix<R> state = apply<R>(T, region.full());
  const Index n = 2 * d;  // modes in the consolidated state
  R pinv_cut = real_eps<R>() * R(1e4);

  MnfResult<R> out;
  out.consolidation = T;
  out.degenerate = basis.degenerate;

  Mat<R> Tinv = T.inverse().data;
  std::vector<std::pair<Vec<R>, bool>> raw_components;  // consolidated basis
  std::vector<Index> raw_core;

  // Processing order: the plus branch filters every core; the minus branch
  // filters the negativity-contributing cores (alignment, hence PSD core
  // noise, is guaranteed by reduced-state physicality) and purifies whatever
  // remains as one product block.
  std::vector<Index> order;
  std::vector<Index> rest_cores;
  if (sub == Subspace::v_plus) {
    for (Index j = 0; j < d; ++j) order.push_back(j);  // descending nu_plus
  } else {
    for (Index j = d - 1; j >= 0; --j)
      if (basis.nu_minus(j) < R(1) - tol.purity) order.push_back(j);
    for (Index j = 0; j < d; ++j)
      if (basis.nu_minus(j) >= R(1) - tol.purity) rest_cores.push_back(j);
  }
  std::vector<bool> processed(d, false);

  auto filter_core_aligned = [&](Index j) {
    R aphi = state.data(j, j);
    R cphi = state.data(j, d + j);
    R api = state.data(n + j, n + j);
    R cpi = state.data(n + j, n + d + j);
    if (abs((aphi - cphi) - (api + cpi)) > sqrt(tol.symplectic) * (R(1) + aphi))
      throw SolViolation("mnf_filter: core alignment lost at core " +
                         std::to_string(j));
    R y_phi = (aphi + cphi) - R(1) / (api + cpi);
    R y_pi = (api - cpi) - R(1) / (aphi - cphi);
    if (y_phi < -sqrt(tol.feasibility) || y_pi < -sqrt(tol.feasibility))
      throw SolViolation("mnf_filter: core noise not PSD");
    y_phi = std::max(y_phi, R(0));
    y_pi = std::max(y_pi, R(0));

    std::vector<Index> rest;
    for (Index k = 0; k < d; ++k)
      if (k != j && !processed[k]) {
        rest.push_back(k);
        rest.push_back(d + k);
      }
    processed[j] = true;
    Index m = static_cast<Index>(rest.size());

    // couplings must carry the universal pattern: phi columns along e+,
    // pi columns along e-
    Vec<R> k_phi(m), k_pi(m);
    R pattern_resid(0);
    for (Index c = 0; c < m; ++c) {
      R f1 = state.data(j, rest[c]);
      R f2 = state.data(d + j, rest[c]);
      k_phi(c) = (f1 + f2) / sqrt(R(2));
      pattern_resid = std::max(pattern_resid, abs(f1 - f2));
      R g1 = state.data(n + j, n + rest[c]);
      R g2 = state.data(n + d + j, n + rest[c]);
      k_pi(c) = (g1 - g2) / sqrt(R(2));
      pattern_resid = std::max(pattern_resid, abs(g1 + g2));
    }
    if (pattern_resid > sqrt(tol.symplectic) * (R(1) + aphi))
      throw SolViolation("mnf_filter: coupling pattern violated");

    // rank-one pair for this core: w = (sqrt(y) e, k / sqrt(y))
    auto make_component = [&](bool pi_space, const R& y, const Vec<R>& kv) {
      R kn = kv.size() > 0 ? kv.norm() : R(0);
      if (y <= real_eps<R>() * R(100) * (R(1) + aphi)) {
        if (kn > sqrt(tol.feasibility))
          throw SolViolation("mnf_filter: singular core noise with coupling");
        return;  // nothing to remove in this quadrature
      }
      R rt = sqrt(y);
      Index off = pi_space ? n : 0;
      Vec<R> w = Vec<R>::Zero(2 * n);
      w(off + j) = rt / sqrt(R(2));
      w(off + d + j) = (pi_space ? R(-1) : R(1)) * rt / sqrt(R(2));
      for (Index c = 0; c < m; ++c) w(off + rest[c]) = kv(c) / rt;
      raw_components.emplace_back(w, pi_space);
      raw_core.push_back(j);
      state.data -= Mat<R>(w * w.transpose());
    };
    make_component(true, y_pi, k_pi);  // pi first, matching the profile order
    make_component(false, y_phi, k_phi);
  };

  for (Index j : order) filter_core_aligned(j);

  if (!rest_cores.empty()) {
    // remaining block: AB-symmetric and, for states in the field-property
    // class, separable; a single product decomposition purifies it with zero
    // A-B entanglement on every remaining core
    Index dr = static_cast<Index>(rest_cores.size());
    Mat<R> phiA(dr, dr), phiAB(dr, dr), piA(dr, dr), piAB(dr, dr);
    for (Index a = 0; a < dr; ++a)
      for (Index b = 0; b < dr; ++b) {
        phiA(a, b) = state.data(rest_cores[a], rest_cores[b]);
        phiAB(a, b) = state.data(rest_cores[a], d + rest_cores[b]);
        piA(a, b) = state.data(n + rest_cores[a], n + rest_cores[b]);
        piAB(a, b) = state.data(n + rest_cores[a], n + d + rest_cores[b]);
      }
    Mat<R> spi(2 * dr, 2 * dr);
    spi.topLeftCorner(dr, dr) = piA;
    spi.bottomRightCorner(dr, dr) = piA;
    spi.topRightCorner(dr, dr) = piAB;
    spi.bottomLeftCorner(dr, dr) = piAB;
    Mat<R> spi_inv = spi.inverse();
    Mat<R> lower_p = symmetrize<R>(spi_inv.topLeftCorner(dr, dr) +
                                   spi_inv.topRightCorner(dr, dr));
    Mat<R> lower_m = symmetrize<R>(spi_inv.topLeftCorner(dr, dr) -
                                   spi_inv.topRightCorner(dr, dr));
    Mat<R> upper_p = symmetrize<R>(phiA + phiAB);
    Mat<R> upper_m = symmetrize<R>(phiA - phiAB);
    Mat<R> XA = symmetrize<R>((upper_m + lower_p) / R(2));
    R slack = std::min(std::min(min_eigenvalue<R>(Mat<R>(upper_p - XA)),
                                min_eigenvalue<R>(Mat<R>(XA - lower_p))),
                       std::min(min_eigenvalue<R>(Mat<R>(upper_m - XA)),
                                min_eigenvalue<R>(Mat<R>(XA - lower_m))));
    if (slack >= -tol.feasibility) {
      Mat<R> XAi = XA.inverse();
      Mat<R> Yrest = Mat<R>::Zero(2 * n, 2 * n);
      for (Index a = 0; a < dr; ++a)
        for (Index b = 0; b < dr; ++b) {
          Index ia = rest_cores[a], ib = rest_cores[b];
          Yrest(ia, ib) = phiA(a, b) - XA(a, b);
          Yrest(d + ia, d + ib) = phiA(a, b) - XA(a, b);
          Yrest(ia, d + ib) = Yrest(d + ib, ia) = phiAB(a, b);
          Yrest(n + ia, n + ib) = piA(a, b) - XAi(a, b);
          Yrest(n + d + ia, n + d + ib) = piA(a, b) - XAi(a, b);
          Yrest(n + ia, n + d + ib) = Yrest(n + d + ib, n + ia) = piAB(a, b);
        }
      if (min_eigenvalue<R>(Yrest) < -sqrt(tol.feasibility))
        throw SolViolation("mnf_filter: residual-block noise not PSD");
      state.data -= Yrest;
      auto eig = sym_eig<R>(Yrest);
      for (Index e = 2 * n - 1; e >= 0; --e) {
        if (eig.values(e) <= real_eps<R>() * R(1000)) break;
        Vec<R> w = eig.vectors.col(e) * sqrt(eig.values(e));
        bool pi_space =
            w.tail(n).cwiseAbs().maxCoeff() > w.head(n).cwiseAbs().maxCoeff();
        raw_components.emplace_back(w, pi_space);
        raw_core.push_back(-1);
      }
      for (Index j : rest_cores) {
        processed[j] = true;
        order.push_back(j);
      }
    } else {
      // not separable: fall back to aligned filtering (residual cores keep
      // their minus-subspace PT eigenvalue as purified entanglement)
      for (Index j : rest_cores) {
        filter_core_aligned(j);
        order.push_back(j);
      }
    }
  }

  // consolidated state must now be pure
  Vec<R> nu = symplectic_eigenvalues<R>(state);
  if (abs(nu(0) - R(1)) > sqrt(tol.purity) || abs(nu(n - 1) - R(1)) > sqrt(tol.purity))
    throw ConvergenceFailure("mnf_filter: filtered state is not pure");

  // map back to the original region basis
  CovarianceMatrix<R> sigma0{n, symmetrize<R>(Tinv * state.data * Tinv.transpose())};
  out.sigma0 = sigma0;
  out.noise = region.full().data - sigma0.data;
  for (std::size_t c = 0; c < raw_components.size(); ++c) {
    Vec<R> w = Tinv * raw_components[c].first;
    RankOneComponent<R> comp;
    comp.value = w.squaredNorm();
    comp.vector = w / sqrt(comp.value);
    comp.pi_type = raw_components[c].second;
    comp.core = raw_core[c];
    out.rank_one.push_back(comp);
  }

  // per-core negativities from the purified cores, in processing order
  // (descending contribution)
  for (Index j : order) {
    std::vector<Index> pair{j, d + j};
    auto core_cm = reduce<R>(state, pair);
    R neg = log_negativity<R>(core_cm, 1);
    out.core_negativities.push_back(neg);
    out.total_negativity += neg;
  }
  return out;
}

}  // namespace gqi::mnf
