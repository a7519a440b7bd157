// symplectic.hpp — phase-space linear algebra for Gaussian states.
//
// Conventions used throughout the library:
//   * operator ordering is phi-block-before-pi-block:
//     (phi_1..phi_n, pi_1..pi_n), so mode i owns rows {i, n+i};
//   * Omega = [[0, I], [-I, 0]];
//   * a covariance matrix is dimensionless (hbar = 1), vacuum = identity.

#pragma once

#include <algorithm>
#include <numeric>
#include <utility>
#include <vector>

#include "gqi/errors.hpp"
#include "gqi/linalg.hpp"

namespace gqi {

template <typename R>
Mat<R> omega(Index n) {
  Mat<R> O = Mat<R>::Zero(2 * n, 2 * n);
  O.block(0, n, n, n) = Mat<R>::Identity(n, n);
  O.block(n, 0, n, n) = -Mat<R>::Identity(n, n);
  return O;
}

template <typename R>
struct CovarianceMatrix {
  Index n = 0;
  Mat<R> data;

  static CovarianceMatrix identity(Index n) {
    return {n, Mat<R>::Identity(2 * n, 2 * n)};
  }
  Mat<R> phi_block() const { return data.topLeftCorner(n, n); }
  Mat<R> pi_block() const { return data.bottomRightCorner(n, n); }
  Mat<R> phi_pi_block() const { return data.topRightCorner(n, n); }
};

template <typename R>
struct SymplecticTransform {
  Index n = 0;
  Mat<R> data;

  static SymplecticTransform identity(Index n) {
    return {n, Mat<R>::Identity(2 * n, 2 * n)};
  }
  SymplecticTransform inverse() const {
    // S^-1 = Omega^T S^T Omega
    Mat<R> O = omega<R>(n);
    return {n, Mat<R>(O.transpose() * data.transpose() * O)};
  }
};

template <typename R>
R symplectic_residual(const SymplecticTransform<R>& S) {
  Mat<R> O = omega<R>(S.n);
  return max_abs<R>(S.data * O * S.data.transpose() - O);
}

template <typename R>
CovarianceMatrix<R> apply(const SymplecticTransform<R>& S,
                          const CovarianceMatrix<R>& sigma) {
  if (S.n != sigma.n) throw DimensionMismatch("apply: mode counts differ");
  return {sigma.n, symmetrize<R>(S.data * sigma.data * S.data.transpose())};
}

// Direct sum acting on a contiguous mode split [0, nA) | [nA, n).
template <typename R>
SymplecticTransform<R> direct_sum(const SymplecticTransform<R>& SA,
                                  const SymplecticTransform<R>& SB) {
  Index nA = SA.n, nB = SB.n, n = nA + nB;
  Mat<R> T = Mat<R>::Zero(2 * n, 2 * n);
  auto put = [&](const Mat<R>& S, Index off, Index k) {
    T.block(off, off, k, k) = S.topLeftCorner(k, k);
    T.block(off, n + off, k, k) = S.topRightCorner(k, k);
    T.block(n + off, off, k, k) = S.bottomLeftCorner(k, k);
    T.block(n + off, n + off, k, k) = S.bottomRightCorner(k, k);
  };
  put(SA.data, 0, nA);
  put(SB.data, nA, nB);
  return {n, T};
}

// Embed a transform acting on a subset of modes (identity elsewhere).
template <typename R>
SymplecticTransform<R> embed(const SymplecticTransform<R>& S,
                             const std::vector<Index>& modes, Index n) {
  Index k = S.n;
  if (static_cast<Index>(modes.size()) != k)
    throw DimensionMismatch("embed: mode list size");
  Mat<R> T = Mat<R>::Identity(2 * n, 2 * n);
  for (Index a = 0; a < k; ++a) {
    T.row(modes[a]).setZero();
    T.row(n + modes[a]).setZero();
  }
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) {
      T(modes[a], modes[b]) = S.data(a, b);
      T(modes[a], n + modes[b]) = S.data(a, k + b);
      T(n + modes[a], modes[b]) = S.data(k + a, b);
      T(n + modes[a], n + modes[b]) = S.data(k + a, k + b);
    }
  return {n, T};
}

// Restriction of sigma to a mode subset (phi-first ordering preserved).
template <typename R>
CovarianceMatrix<R> reduce(const CovarianceMatrix<R>& sigma,
                           const std::vector<Index>& modes) {
  Index k = static_cast<Index>(modes.size());
  Mat<R> out(2 * k, 2 * k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) {
      out(a, b) = sigma.data(modes[a], modes[b]);
      out(a, k + b) = sigma.data(modes[a], sigma.n + modes[b]);
      out(k + a, b) = sigma.data(sigma.n + modes[a], modes[b]);
      out(k + a, k + b) = sigma.data(sigma.n + modes[a], sigma.n + modes[b]);
    }
  return {k, out};
}

// ---------------------------------------------------------------------------
// Williamson normal form
// ---------------------------------------------------------------------------

template <typename R>
struct WilliamsonResult {
  SymplecticTransform<R> S;  // S sigma S^T = D oplus D
  Vec<R> nu;                 // descending, nu_j >= 1 for physical states
  Index purity_count = 0;    // # of nu_j equal to 1 within tolerance
  bool degenerate = false;   // repeated nu beyond tolerance spacing
};

// Symplectic spectrum only (cheaper than the full decomposition):
// spec|i Omega sigma| via the symmetric pencil sigma^{1/2} Omega sigma^{1/2}.
template <typename R>
Vec<R> symplectic_eigenvalues(const CovarianceMatrix<R>& sigma) {
  Index n = sigma.n;
  Mat<R> rt = sym_sqrt<R>(sigma.data);
  Mat<R> K = rt * omega<R>(n) * rt;
  Vec<R> w = sym_eigvals<R>(Mat<R>(K * K.transpose()));  // nu^2, each doubled
  Vec<R> nu(n);
  for (Index j = 0; j < n; ++j) {
    R v = w(2 * n - 1 - 2 * j);
    nu(j) = v > R(0) ? sqrt(v) : R(0);
  }
  return nu;  // descending
}

template <typename R>
bool is_physical(const CovarianceMatrix<R>& sigma, const R& tol) {
  Vec<R> nu = symplectic_eigenvalues<R>(sigma);
  return nu(nu.size() - 1) >= R(1) - tol;
}

template <typename R>
WilliamsonResult<R> williamson(const CovarianceMatrix<R>& sigma,
                               const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  Index n = sigma.n;
  auto eig_sigma = sym_eig<R>(symmetrize<R>(sigma.data));
  if (eig_sigma.values(0) <= R(0))
    throw NotPositiveDefinite("williamson: covariance matrix not PD");
  Vec<R> isq = eig_sigma.values.array().sqrt().inverse();
  Mat<R> Mi = eig_sigma.vectors * isq.asDiagonal() * eig_sigma.vectors.transpose();

  // A = sigma^{-1/2} Omega sigma^{-1/2} is antisymmetric with eigenvalues
  // +- i/nu_j; A A^T is symmetric PSD with each 1/nu_j^2 twice.
  Mat<R> A = Mi * omega<R>(n) * Mi;
  auto eig = sym_eig<R>(Mat<R>(A * A.transpose()));
  Vec<R> lam = eig.values.cwiseMax(R(0)).array().sqrt();  // ascending 1/nu

  // Pair (u, w = A u / lambda) within lambda-clusters; each pair spans one mode.
  std::vector<bool> used(2 * n, false);
  std::vector<Vec<R>> us, ws;
  std::vector<R> nus;
  bool degenerate = false;
  for (Index start = 2 * n - 1; start >= 0; --start) {  // descending lambda
    if (used[start]) continue;
    R l0 = lam(start);
    std::vector<Index> cluster;
    for (Index j = start; j >= 0; --j)
      if (!used[j] && abs(lam(j) - l0) <= tol.degeneracy * (R(1) + l0))
        cluster.push_back(j);
    if (cluster.size() > 2) degenerate = true;
    if (cluster.size() % 2 != 0)
      throw ConvergenceFailure("williamson: odd eigenvalue cluster");
    std::vector<Vec<R>> taken;
    for (std::size_t p = 0; p < cluster.size() / 2; ++p) {
      Vec<R> u;
      for (Index c : cluster) {
        Vec<R> cand = eig.vectors.col(c);
        for (const auto& t : taken) cand -= t.dot(cand) * t;
        R nrm = cand.norm();
        if (nrm > R(1) / R(1000)) {
          u = cand / nrm;
          break;
        }
      }
      if (u.size() == 0)
        throw ConvergenceFailure("williamson: cluster pairing failed");
      Vec<R> w = A * u / l0;
      taken.push_back(u);
      taken.push_back(w);
      us.push_back(u);
      ws.push_back(w);
      nus.push_back(R(1) / l0);
    }
    for (Index j : cluster) used[j] = true;
  }

  // Descending nu, stable under ties.
  std::vector<std::size_t> order(nus.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return nus[a] > nus[b]; });

  Mat<R> Q(2 * n, 2 * n);
  Vec<R> nu(n);
  for (Index j = 0; j < n; ++j) {
    nu(j) = nus[order[j]];
    Q.col(j) = ws[order[j]];
    Q.col(n + j) = us[order[j]];
  }
  Vec<R> dsqrt(2 * n);
  for (Index j = 0; j < n; ++j) dsqrt(j) = dsqrt(n + j) = sqrt(nu(j));
  Mat<R> S = dsqrt.asDiagonal() * Q.transpose() * Mi;

  WilliamsonResult<R> out{{n, S}, nu, 0, degenerate};
  for (Index j = 0; j < n; ++j)
    if (abs(nu(j) - R(1)) < tol.purity) ++out.purity_count;

  Mat<R> D = Mat<R>(dsqrt.asDiagonal());
  R resid = max_abs<R>(S * sigma.data * S.transpose() - D * D);
  if (resid > tol.symplectic * (R(1) + nu(0)) * R(1e4))
    throw ConvergenceFailure("williamson: residual " + real_to_string(resid));
  return out;
}

// ---------------------------------------------------------------------------
// Partial transpose and logarithmic negativity
// ---------------------------------------------------------------------------

// Momentum reversal on the listed modes (Lambda sigma Lambda).
template <typename R>
CovarianceMatrix<R> partial_transpose(const CovarianceMatrix<R>& sigma,
                                      const std::vector<Index>& b_modes) {
  CovarianceMatrix<R> out = sigma;
  for (Index m : b_modes) {
    if (m < 0 || m >= sigma.n) throw DimensionMismatch("partial_transpose: bad mode");
    out.data.row(sigma.n + m) *= R(-1);
    out.data.col(sigma.n + m) *= R(-1);
  }
  return out;
}

// AB-balanced case: B is the second half (d modes of 2d).
template <typename R>
CovarianceMatrix<R> partial_transpose(const CovarianceMatrix<R>& sigma, Index d) {
  if (sigma.n != 2 * d) throw DimensionMismatch("partial_transpose: n != 2d");
  std::vector<Index> b(d);
  std::iota(b.begin(), b.end(), d);
  return partial_transpose<R>(sigma, b);
}

template <typename R>
Vec<R> pt_symplectic_eigenvalues(const CovarianceMatrix<R>& sigma, Index d) {
  return symplectic_eigenvalues<R>(partial_transpose<R>(sigma, d));
}

template <typename R>
R log_negativity_from_spectrum(const Vec<R>& nu_tilde) {
  R ln2 = log(R(2));
  R acc(0);
  for (Index j = 0; j < nu_tilde.size(); ++j)
    if (nu_tilde(j) < R(1)) acc -= log(nu_tilde(j)) / ln2;
  return acc;
}

template <typename R>
R log_negativity(const CovarianceMatrix<R>& sigma, Index d) {
  return log_negativity_from_spectrum<R>(pt_symplectic_eigenvalues<R>(sigma, d));
}

// ---------------------------------------------------------------------------
// Pure-state (X, Y) block parametrization
// ---------------------------------------------------------------------------

template <typename R>
struct PureStateXY {
  Mat<R> X;  // symmetric positive definite
  Mat<R> Y;  // symmetric ("phase" matrix; zero for phi-pi-uncorrelated states)

  Index modes() const { return X.rows(); }
};

template <typename R>
CovarianceMatrix<R> assemble_pure(const PureStateXY<R>& xy) {
  Index n = xy.X.rows();
  if (min_eigenvalue<R>(xy.X) <= R(0))
    throw NotPositiveDefinite("assemble_pure: X not PD");
  Mat<R> XY = xy.X * xy.Y;
  Mat<R> sig(2 * n, 2 * n);
  sig.topLeftCorner(n, n) = xy.X;
  sig.topRightCorner(n, n) = XY;
  sig.bottomLeftCorner(n, n) = XY.transpose();
  sig.bottomRightCorner(n, n) =
      symmetrize<R>(xy.Y * XY + xy.X.inverse());
  return {n, symmetrize<R>(sig)};
}

template <typename R>
PureStateXY<R> fit_pure(const CovarianceMatrix<R>& sigma,
                        const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  Index n = sigma.n;
  Mat<R> X = sigma.phi_block();
  if (min_eigenvalue<R>(X) <= R(0))
    throw NotPositiveDefinite("fit_pure: phi block not PD");
  Mat<R> Y = symmetrize<R>(X.fullPivLu().solve(sigma.phi_pi_block()));
  PureStateXY<R> xy{X, Y};
  // purity check through the reconstruction residual
  CovarianceMatrix<R> re = assemble_pure<R>(xy);
  R resid = max_abs<R>(re.data - sigma.data);
  if (resid > sqrt(tol.purity) * (R(1) + max_abs<R>(sigma.data)))
    throw NotPure("fit_pure: reconstruction residual " + real_to_string(resid));
  return xy;
}

// ---------------------------------------------------------------------------
// Symplectic Gram-Schmidt
// ---------------------------------------------------------------------------

// Completes seed rows into a full symplectic matrix. Slot s in [0, n) is the
// phi-type row of mode s; slot n + s its pi-type partner. Seeded rows are kept
// verbatim except for the partner rescaling that enforces Omega(r_i, r_{n+i}) = 1.
template <typename R>
SymplecticTransform<R> symplectic_gram_schmidt(
    const std::vector<std::pair<Index, Vec<R>>>& seeds, Index n,
    const R& tol = Tolerances<R>::defaults().symplectic) {
  Mat<R> O = omega<R>(n);
  Mat<R> rows = Mat<R>::Zero(2 * n, 2 * n);
  std::vector<bool> have(2 * n, false);
  for (const auto& [slot, v] : seeds) {
    if (slot < 0 || slot >= 2 * n || v.size() != 2 * n)
      throw DimensionMismatch("symplectic_gram_schmidt: bad seed");
    rows.row(slot) = v.transpose();
    have[slot] = true;
  }

  std::vector<std::pair<Index, Index>> done;
  // Project out completed pairs: v <- v - Omega(v,r_q) r_p + Omega(v,r_p) r_q
  // for each pair (p, q) normalized to Omega(r_p, r_q) = 1.
  auto sympl_orth = [&](Vec<R> v) {
    for (auto [p, q] : done) {
      R c_q = (rows.row(q) * O * v)(0);  // = -Omega(v, r_q)
      R c_p = (rows.row(p) * O * v)(0);  // = -Omega(v, r_p)
      v += c_q * rows.row(p).transpose() - c_p * rows.row(q).transpose();
    }
    return v;
  };

  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    auto rank = [&](Index i) { return (have[i] || have[n + i]) ? 0 : 1; };
    return rank(a) < rank(b);
  });

  auto best_candidate = [&](const Vec<R>* partner) {
    Vec<R> best;
    R best_score(-1);
    for (Index c = 0; c < 2 * n; ++c) {
      Vec<R> e = Vec<R>::Zero(2 * n);
      e(c) = R(1);
      Vec<R> cand = sympl_orth(e);
      R score = partner ? abs(partner->dot(O * cand)) : cand.norm();
      if (score > best_score) {
        best_score = score;
        best = cand;
      }
    }
    return std::make_pair(best, best_score);
  };

  for (Index i : order) {
    bool u_seeded = have[i], v_seeded = have[n + i];
    Vec<R> u, v;
    if (u_seeded) u = sympl_orth(rows.row(i).transpose());
    if (v_seeded) v = sympl_orth(rows.row(n + i).transpose());
    if (!u_seeded && v_seeded) {
      // work from the pi-type seed; the phi row gets the rescaling
      auto [cand, score] = best_candidate(&v);
      if (score <= tol) throw SymplecticDegeneracy("sGS: no conjugate partner");
      R om = cand.dot(O * v);
      u = cand / om;
    } else {
      if (!u_seeded) {
        auto [cand, score] = best_candidate(nullptr);
        if (score <= tol) throw SymplecticDegeneracy("sGS: exhausted candidates");
        u = cand / cand.norm();
      }
      if (v_seeded) {
        R om = u.dot(O * v);
        if (abs(om) <= tol)
          throw SymplecticDegeneracy("sGS: seeded pair has vanishing product");
        v /= om;
      } else {
        auto [cand, score] = best_candidate(&u);
        if (score <= tol) throw SymplecticDegeneracy("sGS: no conjugate partner");
        R om = u.dot(O * cand);
        v = cand / om;
      }
    }
    rows.row(i) = u.transpose();
    rows.row(n + i) = v.transpose();
    done.emplace_back(i, n + i);
  }

  SymplecticTransform<R> S{n, rows};
  if (symplectic_residual<R>(S) > sqrt(tol))
    throw SymplecticDegeneracy("sGS: completion not symplectic");
  return S;
}

// ---------------------------------------------------------------------------
// Local normal modes of a pure bipartition (TMSVS form)
// ---------------------------------------------------------------------------

// (S_AB + S_C) sigma (S_AB + S_C)^T has the two-mode-squeezed block pattern:
// diagonal cosh(2 r_j) on both parties, rectangular diag sinh(2 r_j) cross
// block in phi, its negative in pi, no phi-pi mixing. AB modes are ordered by
// descending squeezing; paired C modes sit at the matching slots, decoupled
// (vacuum) C modes after them.
template <typename R>
struct TmsvsDecomposition {
  SymplecticTransform<R> S_AB;
  SymplecticTransform<R> S_C;
  std::vector<R> r;                       // squeezing per AB mode, >= 0
  std::vector<Index> decoupled_c_modes;   // post-transform C mode indices
  Index pair_count = 0;
  bool degenerate = false;

  Vec<R> d_ab_cosh() const {
    Vec<R> d(static_cast<Index>(r.size()));
    for (Index j = 0; j < d.size(); ++j) d(j) = cosh(R(2) * r[j]);
    return d;
  }
  // N_AB x N_C rectangular sinh matrix
  Mat<R> d_abc_sinh(Index n_c) const {
    Mat<R> m = Mat<R>::Zero(static_cast<Index>(r.size()), n_c);
    for (Index j = 0; j < static_cast<Index>(r.size()) && j < n_c; ++j)
      m(j, j) = sinh(R(2) * r[j]);
    return m;
  }
  Vec<R> d_c_cosh(Index n_c) const {
    Vec<R> d = Vec<R>::Ones(n_c);
    for (Index j = 0; j < pair_count; ++j) d(j) = cosh(R(2) * r[j]);
    return d;
  }
};

template <typename R>
TmsvsDecomposition<R> local_normal_modes(
    const CovarianceMatrix<R>& sigma_global, Index n_ab,
    const Tolerances<R>& tol = Tolerances<R>::defaults(), bool check_purity = true) {
  Index n = sigma_global.n;
  Index n_c = n - n_ab;
  if (n_ab <= 0 || n_c <= 0) throw DimensionMismatch("local_normal_modes: split");

  if (check_purity) {
    Vec<R> nu = symplectic_eigenvalues<R>(sigma_global);
    if (abs(nu(0) - R(1)) > sqrt(tol.purity) ||
        abs(nu(n - 1) - R(1)) > sqrt(tol.purity))
      throw NotPure("local_normal_modes: global state is mixed");
  }

  std::vector<Index> ab(n_ab), cc(n_c);
  std::iota(ab.begin(), ab.end(), 0);
  std::iota(cc.begin(), cc.end(), n_ab);
  auto wAB = williamson<R>(reduce<R>(sigma_global, ab), tol);
  auto wC = williamson<R>(reduce<R>(sigma_global, cc), tol);

  SymplecticTransform<R> T0 = direct_sum<R>(wAB.S, wC.S);
  CovarianceMatrix<R> s2 = apply<R>(T0, sigma_global);

  // Group AB modes by repeated nu and align each group's C partners.
  std::vector<bool> c_used(n_c, false);
  Mat<R> c_fix = Mat<R>::Identity(2 * n_c, 2 * n_c);
  std::vector<Index> c_slot(n_ab, -1);
  std::vector<R> rs(n_ab, R(0));
  bool degenerate = false;
  R match_tol = sqrt(tol.degeneracy);

  Index j = 0;
  Index pair_count = 0;
  while (j < n_ab) {
    R nuj = wAB.nu(j);
    if (nuj <= R(1) + tol.purity) {
      ++j;
      continue;
    }
    Index g = 1;
    while (j + g < n_ab && abs(wAB.nu(j + g) - nuj) <= match_tol * nuj) ++g;
    if (g > 1) degenerate = true;

    std::vector<Index> partners;
    for (Index k = 0; k < n_c && static_cast<Index>(partners.size()) < g; ++k)
      if (!c_used[k] && abs(wC.nu(k) - nuj) <= match_tol * nuj) partners.push_back(k);
    if (static_cast<Index>(partners.size()) != g)
      throw ConvergenceFailure("local_normal_modes: unmatched local spectra");

    // Cross block E between the AB group and its C partners, (phi | pi) layout.
    Mat<R> E(2 * g, 2 * g);
    for (Index a = 0; a < g; ++a)
      for (Index b = 0; b < g; ++b) {
        Index ja = j + a, kb = partners[b];
        E(a, b) = s2.data(ja, n_ab + kb);
        E(a, g + b) = s2.data(ja, n + n_ab + kb);
        E(g + a, b) = s2.data(n + ja, n_ab + kb);
        E(g + a, g + b) = s2.data(n + ja, n + n_ab + kb);
      }
    R s = sqrt(nuj * nuj - R(1));
    Mat<R> Tg = Mat<R>::Zero(2 * g, 2 * g);
    for (Index a = 0; a < g; ++a) {
      Tg(a, a) = s;
      Tg(g + a, g + a) = -s;
    }
    // Rotation on the C side sending the cross block to the sinh pattern.
    Mat<R> V = Tg * E.inverse().transpose();
    R orth = max_abs<R>(Mat<R>(V * V.transpose()) - Mat<R>::Identity(2 * g, 2 * g));
    R symp = max_abs<R>(Mat<R>(V * omega<R>(g) * V.transpose()) - omega<R>(g));
    if (orth > sqrt(tol.symplectic) || symp > sqrt(tol.symplectic))
      throw ConvergenceFailure("local_normal_modes: cross-block alignment failed");

    for (Index a = 0; a < g; ++a)
      for (Index b = 0; b < g; ++b) {
        Index ka = partners[a], kb = partners[b];
        c_fix(ka, kb) = V(a, b);
        c_fix(ka, kb + n_c) = V(a, g + b);
        c_fix(ka + n_c, kb) = V(g + a, b);
        c_fix(ka + n_c, kb + n_c) = V(g + a, g + b);
      }
    for (Index a = 0; a < g; ++a) {
      c_used[partners[a]] = true;
      c_slot[j + a] = partners[a];
      rs[j + a] = log(nuj + s) / R(2);  // acosh(nu)/2
      ++pair_count;
    }
    j += g;
  }

  // Reorder C: partner of AB mode j at slot j, decoupled modes afterwards.
  std::vector<Index> perm;
  for (Index a = 0; a < n_ab; ++a)
    if (c_slot[a] >= 0) perm.push_back(c_slot[a]);
  std::vector<Index> decoupled;
  for (Index k = 0; k < n_c; ++k)
    if (!c_used[k]) {
      decoupled.push_back(static_cast<Index>(perm.size()));
      perm.push_back(k);
    }
  Mat<R> P = Mat<R>::Zero(2 * n_c, 2 * n_c);
  for (Index a = 0; a < n_c; ++a) {
    P(a, perm[a]) = R(1);
    P(n_c + a, n_c + perm[a]) = R(1);
  }

  TmsvsDecomposition<R> out;
  out.S_AB = wAB.S;
  out.S_C = {n_c, Mat<R>(P * c_fix * wC.S.data)};
  out.r = rs;
  out.decoupled_c_modes = decoupled;
  out.pair_count = pair_count;
  out.degenerate = degenerate || wAB.degenerate;

  // Structural residual against the TMSVS block pattern.
  CovarianceMatrix<R> bar = apply<R>(direct_sum<R>(out.S_AB, out.S_C), sigma_global);
  Mat<R> expect = Mat<R>::Identity(2 * n, 2 * n);
  for (Index a = 0; a < n_ab; ++a) {
    R c2 = cosh(R(2) * rs[a]), s2v = sinh(R(2) * rs[a]);
    expect(a, a) = expect(n + a, n + a) = c2;
    if (rs[a] > R(0)) {
      expect(n_ab + a, n_ab + a) = expect(n + n_ab + a, n + n_ab + a) = c2;
      expect(a, n_ab + a) = expect(n_ab + a, a) = s2v;
      expect(n + a, n + n_ab + a) = expect(n + n_ab + a, n + a) = -s2v;
    }
  }
  R resid = max_abs<R>(bar.data - expect);
  if (resid > sqrt(tol.symplectic) * (R(1) + max_abs<R>(expect)))
    throw ConvergenceFailure("local_normal_modes: normal-form residual " +
                             real_to_string(resid));
  return out;
}

}  // namespace gqi
