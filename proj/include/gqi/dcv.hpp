// dcv.hpp — multimode double-cone-volume machinery for AB-symmetric,
// phi-pi-uncorrelated states: DCV vertex data, the separability criterion,
// the analytic xi-maximizing pure state (GEOA lower bound), xi-minimization
// (GEOF upper bound), and export of the epigraph SDP in SDPA sparse format.

#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gqi/lattice.hpp"
#include "gqi/symplectic.hpp"

namespace gqi::dcv {

using lattice::RegionCM;

template <typename R>
struct DcvPair {
  Index d = 0;
  Mat<R> upper_plus;   // sigma_phi,A + sigma_phi,AB
  Mat<R> lower_plus;   // (sigma_pi^-1)_A + (sigma_pi^-1)_AB
  Mat<R> upper_minus;  // sigma_phi,A - sigma_phi,AB
  Mat<R> lower_minus;  // (sigma_pi^-1)_A - (sigma_pi^-1)_AB
  bool hierarchy = false;  // u+ >= u- >= l+ >= l- (field-property states)
};

template <typename R>
DcvPair<R> build_dcv(const RegionCM<R>& region,
                     const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  auto checks = lattice::check_region<R>(region);
  if (!checks.ab_symmetric(sqrt(tol.feasibility)))
    throw NotSymmetricAB("build_dcv: region is not AB-symmetric");
  DcvPair<R> p;
  p.d = region.d;
  p.upper_plus = symmetrize<R>(region.phi_a() + region.phi_ab());
  p.lower_plus = symmetrize<R>(region.pi_inv_a() + region.pi_inv_ab());
  p.upper_minus = symmetrize<R>(region.phi_a() - region.phi_ab());
  p.lower_minus = symmetrize<R>(region.pi_inv_a() - region.pi_inv_ab());
  if (checks.field_property(tol.feasibility)) {
    p.hierarchy = is_psd<R>(Mat<R>(p.upper_plus - p.upper_minus), tol.feasibility) &&
                  is_psd<R>(Mat<R>(p.upper_minus - p.lower_plus), tol.feasibility) &&
                  is_psd<R>(Mat<R>(p.lower_plus - p.lower_minus), tol.feasibility);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Separability (necessary and sufficient in the field-property regime)
// ---------------------------------------------------------------------------

template <typename R>
struct SeparabilityResult {
  bool separable = false;
  R margin = R(0);  // min eigenvalue of (u- minus l+)
  bool has_witness = false;
  Mat<R> witness_x_a;
};

template <typename R>
SeparabilityResult<R> separability_check(
    const RegionCM<R>& region, const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  auto p = build_dcv<R>(region, tol);
  SeparabilityResult<R> out;
  out.margin = min_eigenvalue<R>(Mat<R>(p.upper_minus - p.lower_plus));
  out.separable = out.margin >= -tol.feasibility;
  if (out.separable) {
    Mat<R> W = symmetrize<R>((p.lower_plus + p.upper_minus) / R(2));
    bool ok = is_psd<R>(Mat<R>(p.upper_plus - W), tol.feasibility) &&
              is_psd<R>(Mat<R>(W - p.lower_plus), sqrt(tol.feasibility)) &&
              is_psd<R>(Mat<R>(p.upper_minus - W), sqrt(tol.feasibility)) &&
              is_psd<R>(Mat<R>(W - p.lower_minus), tol.feasibility);
    if (ok) {
      out.has_witness = true;
      out.witness_x_a = W;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Xi solutions
// ---------------------------------------------------------------------------

template <typename R>
struct XiSolution {
  Mat<R> x_a, x_ab;
  R xi = R(0);
  PureStateXY<R> pure_state;  // 2d-mode, Y = 0
  R negativity = R(0);
  long iterations = 0;
  R residual = R(0);
  bool converged = true;
};

template <typename R>
Mat<R> assemble_x(const Mat<R>& x_a, const Mat<R>& x_ab) {
  Index d = x_a.rows();
  Mat<R> X(2 * d, 2 * d);
  X.topLeftCorner(d, d) = x_a;
  X.bottomRightCorner(d, d) = x_a;
  X.topRightCorner(d, d) = x_ab;
  X.bottomLeftCorner(d, d) = x_ab;
  return X;
}

template <typename R>
R frobenius(const Mat<R>& m) {
  return sqrt(m.cwiseProduct(m).sum());
}

template <typename R>
XiSolution<R> finish_xi_solution(const RegionCM<R>& region, const Mat<R>& x_a,
                                 const Mat<R>& x_ab) {
  XiSolution<R> out;
  out.x_a = x_a;
  out.x_ab = x_ab;
  out.xi = frobenius<R>(x_ab);
  Mat<R> X = assemble_x<R>(x_a, x_ab);
  out.pure_state = PureStateXY<R>{X, Mat<R>::Zero(2 * region.d, 2 * region.d)};
  out.negativity =
      log_negativity<R>(assemble_pure<R>(out.pure_state), region.d);
  return out;
}

// Analytic xi maximization: X_A + X_AB at the upper vertex of the enclosing
// cone pair and X_A - X_AB at its lower vertex.
template <typename R>
XiSolution<R> max_xi(const RegionCM<R>& region,
                     const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  auto p = build_dcv<R>(region, tol);
  Mat<R> x_a = symmetrize<R>(
      (p.upper_plus + p.lower_minus) / R(2));  // (phiA+phiAB+piiA-piiAB)/2
  Mat<R> x_ab = symmetrize<R>((p.upper_plus - p.lower_minus) / R(2));
  auto out = finish_xi_solution<R>(region, x_a, x_ab);
  Mat<R> Y = region.full().data - assemble_pure<R>(out.pure_state).data;
  R minY = min_eigenvalue<R>(Y);
  out.residual = minY < R(0) ? -minY : R(0);
  if (minY < -sqrt(tol.feasibility) * R(10))
    throw FeasibilityViolation("max_xi: noise not PSD; input outside the "
                               "field-property class");
  return out;
}

// ---------------------------------------------------------------------------
// Xi minimization: Dykstra-corrected alternating projections between the two
// DCVs, followed by a central-path Newton refinement (the projection stage
// alone converges only linearly, which starves the entanglement ladders of
// digits at extended precision).
// ---------------------------------------------------------------------------

template <typename R>
struct MinXiOptions {
  R tol = Tolerances<R>::defaults().feasibility;
  long max_iterations = 100000;
  bool newton_refine = true;
  int bracket_stages = 64;  // barrier reductions (factor 1/10 each)

  static MinXiOptions defaults() { return MinXiOptions{}; }
};

namespace detail {

// Projection onto {S : L <= S <= U} by Dykstra iteration over the two
// translated PSD constraints (each projection a closed-form eigenvalue clip).
template <typename R>
Mat<R> project_box(const Mat<R>& target, const Mat<R>& L, const Mat<R>& U,
                   const R& tol, int max_iter = 256) {
  Mat<R> x = target;
  Mat<R> p = Mat<R>::Zero(x.rows(), x.cols());
  Mat<R> q = p;
  for (int it = 0; it < max_iter; ++it) {
    Mat<R> y = L + psd_clip<R>(Mat<R>(x + p - L));
    p = x + p - y;
    Mat<R> xn = U - psd_clip<R>(Mat<R>(U - (y + q)));
    q = y + q - xn;
    R drift = max_abs<R>(Mat<R>(xn - x)) + max_abs<R>(Mat<R>(y - xn));
    x = xn;
    if (drift <= tol) break;
  }
  return symmetrize<R>(x);
}

template <typename R>
struct SvecLayout {
  Index d, q;
  std::vector<std::pair<Index, Index>> pairs;
  Vec<R> weight;  // 1 on diagonal entries, 2 off-diagonal

  explicit SvecLayout(Index dd) : d(dd), q(dd * (dd + 1) / 2) {
    weight.resize(q);
    Index a = 0;
    for (Index i = 0; i < d; ++i)
      for (Index j = i; j < d; ++j, ++a) {
        pairs.emplace_back(i, j);
        weight(a) = (i == j) ? R(1) : R(2);
      }
  }
  Vec<R> svec(const Mat<R>& S) const {
    Vec<R> v(q);
    for (Index a = 0; a < q; ++a) v(a) = S(pairs[a].first, pairs[a].second);
    return v;
  }
  Mat<R> smat(const Vec<R>& v) const {
    Mat<R> S(d, d);
    for (Index a = 0; a < q; ++a) {
      S(pairs[a].first, pairs[a].second) = v(a);
      S(pairs[a].second, pairs[a].first) = v(a);
    }
    return S;
  }
};

// gradient g_a = tr(S^-1 B_a) and Hessian H_ab = tr(S^-1 B_a S^-1 B_b) of
// -logdet on the upper-triangle coordinates, from the slack inverse.
template <typename R>
void logdet_grad_hess(const SvecLayout<R>& ly, const Mat<R>& Sinv, Vec<R>& g,
                      Mat<R>& H) {
  const Index q = ly.q;
  g.resize(q);
  H.resize(q, q);
  for (Index a = 0; a < q; ++a) {
    auto [i, j] = ly.pairs[a];
    g(a) = (i == j) ? Sinv(i, i) : R(2) * Sinv(i, j);
  }
  for (Index a = 0; a < q; ++a) {
    auto [i, j] = ly.pairs[a];
    for (Index b = a; b < q; ++b) {
      auto [k, l] = ly.pairs[b];
      R v;
      if (i != j && k != l)
        v = R(2) * (Sinv(j, k) * Sinv(i, l) + Sinv(j, l) * Sinv(i, k));
      else if (i == j && k != l)
        v = R(2) * Sinv(i, k) * Sinv(i, l);
      else if (i != j && k == l)
        v = R(2) * Sinv(i, k) * Sinv(j, k);
      else
        v = Sinv(i, k) * Sinv(i, k);
      H(a, b) = v;
      H(b, a) = v;
    }
  }
}

template <typename R>
bool cholesky_pd(const Mat<R>& S) {
  Eigen::LLT<Mat<R>> llt(S);
  return llt.info() == Eigen::Success;
}

// Central-path Newton on  f = xi^2 - mu sum logdet(slacks), slacks from both
// boxes. Returns false if no progress could be made from the given start.
template <typename R>
bool newton_path(const DcvPair<R>& p, Mat<R>& P, Mat<R>& M, const MinXiOptions<R>& opt,
                 long& iterations) {
  const Index d = p.d;
  SvecLayout<R> ly(d);
  const Index q = ly.q;
  Vec<R> pv = ly.svec(symmetrize<R>((p.upper_plus + p.lower_plus) / R(2)));
  Vec<R> mv = ly.svec(symmetrize<R>((p.upper_minus + p.lower_minus) / R(2)));

  auto feasible = [&](const Vec<R>& pc, const Vec<R>& mc) {
    Mat<R> Pm = ly.smat(pc), Mm = ly.smat(mc);
    return cholesky_pd<R>(Mat<R>(p.upper_plus - Pm)) &&
           cholesky_pd<R>(Mat<R>(Pm - p.lower_plus)) &&
           cholesky_pd<R>(Mat<R>(p.upper_minus - Mm)) &&
           cholesky_pd<R>(Mat<R>(Mm - p.lower_minus));
  };
  auto objective = [&](const Vec<R>& pc, const Vec<R>& mc, const R& mu) {
    Mat<R> Pm = ly.smat(pc), Mm = ly.smat(mc);
    R val = R(0);
    for (Index a = 0; a < q; ++a)
      val += ly.weight(a) * (pc(a) - mc(a)) * (pc(a) - mc(a));
    val /= R(4);
    for (const Mat<R>& S : {Mat<R>(p.upper_plus - Pm), Mat<R>(Pm - p.lower_plus),
                            Mat<R>(p.upper_minus - Mm), Mat<R>(Mm - p.lower_minus)}) {
      Eigen::LLT<Mat<R>> llt(S);
      if (llt.info() != Eigen::Success) return std::make_pair(false, R(0));
      R ld = R(0);
      for (Index i = 0; i < d; ++i) ld += log(llt.matrixL()(i, i));
      val -= R(2) * mu * ld;
    }
    return std::make_pair(true, val);
  };

  if (!feasible(pv, mv)) return false;
  R eps = real_eps<R>();
  R mu = real_from_string<R>("1e-2");
  R mu_min = pow(eps, 0.55);
  Vec<R> g1(q), g2(q), g3(q), g4(q);
  Mat<R> H1, H2, H3, H4;

  for (int stage = 0; stage < opt.bracket_stages && mu > mu_min; ++stage) {
    for (int it = 0; it < 60; ++it) {
      ++iterations;
      Mat<R> Pm = ly.smat(pv), Mm = ly.smat(mv);
      logdet_grad_hess<R>(ly, Mat<R>((p.upper_plus - Pm).inverse()), g1, H1);
      logdet_grad_hess<R>(ly, Mat<R>((Pm - p.lower_plus).inverse()), g2, H2);
      logdet_grad_hess<R>(ly, Mat<R>((p.upper_minus - Mm).inverse()), g3, H3);
      logdet_grad_hess<R>(ly, Mat<R>((Mm - p.lower_minus).inverse()), g4, H4);

      Vec<R> diff = pv - mv;
      Vec<R> gP = (ly.weight.array() * diff.array()).matrix() / R(2) + mu * (g1 - g2);
      Vec<R> gM = -(ly.weight.array() * diff.array()).matrix() / R(2) + mu * (g3 - g4);
      Mat<R> Hq = Mat<R>(Vec<R>(ly.weight / R(2)).asDiagonal());
      Mat<R> H(2 * q, 2 * q);
      H.topLeftCorner(q, q) = Hq + mu * (H1 + H2);
      H.bottomRightCorner(q, q) = Hq + mu * (H3 + H4);
      H.topRightCorner(q, q) = -Hq;
      H.bottomLeftCorner(q, q) = -Hq;
      Vec<R> grad(2 * q);
      grad.head(q) = gP;
      grad.tail(q) = gM;

      Eigen::LDLT<Mat<R>> ldlt(H);
      Vec<R> step = ldlt.solve(grad);

      auto [ok0, f0] = objective(pv, mv, mu);
      if (!ok0) return false;
      R t(1);
      bool accepted = false;
      for (int ls = 0; ls < 120; ++ls) {
        Vec<R> pn = pv - t * step.head(q);
        Vec<R> mn = mv - t * step.tail(q);
        auto [ok, f] = objective(pn, mn, mu);
        if (ok && f < f0) {
          pv = pn;
          mv = mn;
          accepted = true;
          break;
        }
        t /= R(2);
      }
      if (!accepted) break;
      R gn = grad.norm();
      if (gn < mu * real_from_string<R>("1e-8") && t > R(1) / R(2)) break;
    }
    mu /= R(10);
  }
  P = ly.smat(pv);
  M = ly.smat(mv);
  return true;
}

}  // namespace detail

template <typename R>
XiSolution<R> min_xi(const RegionCM<R>& region,
                     const MinXiOptions<R>& opt = MinXiOptions<R>::defaults(),
                     const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  auto p = build_dcv<R>(region, tol);
  const Index d = p.d;

  // Stage 1: alternating projections between the DCVs, each projection an
  // inner Dykstra loop over the two translated PSD cones.
  Mat<R> P = symmetrize<R>((p.upper_plus + p.lower_plus) / R(2));
  Mat<R> M = symmetrize<R>((p.upper_minus + p.lower_minus) / R(2));
  R inner_tol = opt.tol / R(100);
  long it = 0;
  bool ap_converged = false;
  R xi_prev(-1);
  // with refinement enabled the projection stage only needs to localize the
  // optimum; the Newton stage supplies the remaining digits
  long ap_cap = opt.newton_refine ? std::min<long>(opt.max_iterations, 120)
                                  : opt.max_iterations;
  for (; it < ap_cap; ++it) {
    Mat<R> Pn = detail::project_box<R>(M, p.lower_plus, p.upper_plus, inner_tol);
    Mat<R> Mn = detail::project_box<R>(Pn, p.lower_minus, p.upper_minus, inner_tol);
    R move = max_abs<R>(Mat<R>(Pn - P)) + max_abs<R>(Mat<R>(Mn - M));
    P = Pn;
    M = Mn;
    R xi_cur = frobenius<R>(Mat<R>(P - M)) / R(2);
    if (move <= opt.tol && xi_prev >= R(0) && abs(xi_cur - xi_prev) <= opt.tol) {
      ap_converged = true;
      break;
    }
    xi_prev = xi_cur;
  }

  // Purity repair: clip a candidate back into both boxes and measure the
  // remaining feasibility defect.
  auto repair = [&](Mat<R>& Pc, Mat<R>& Mc) {
    R feas = R(0);
    for (int round = 0; round < 8; ++round) {
      Pc = p.lower_plus + psd_clip<R>(Mat<R>(Pc - p.lower_plus));
      Pc = p.upper_plus - psd_clip<R>(Mat<R>(p.upper_plus - Pc));
      Mc = p.lower_minus + psd_clip<R>(Mat<R>(Mc - p.lower_minus));
      Mc = p.upper_minus - psd_clip<R>(Mat<R>(p.upper_minus - Mc));
      feas = R(0);
      for (const Mat<R>& S :
           {Mat<R>(p.upper_plus - Pc), Mat<R>(Pc - p.lower_plus),
            Mat<R>(p.upper_minus - Mc), Mat<R>(Mc - p.lower_minus)}) {
        R m = min_eigenvalue<R>(S);
        if (m < R(0)) feas = std::max(feas, -m);
      }
      if (feas <= opt.tol) break;
    }
    return feas;
  };

  Mat<R> Pbest = P, Mbest = M;
  R move_ap = repair(Pbest, Mbest);
  R feas_best = move_ap;
  bool best_converged = ap_converged && feas_best <= opt.tol;

  // Stage 2: central-path refinement from an interior start; the two routes
  // cross-check each other and the better feasible iterate wins.
  long newton_its = 0;
  if (opt.newton_refine) {
    Mat<R> Pn = P, Mn = M;
    if (detail::newton_path<R>(p, Pn, Mn, opt, newton_its)) {
      R feas_n = repair(Pn, Mn);
      R xi_n = frobenius<R>(Mat<R>(Pn - Mn));
      R xi_b = frobenius<R>(Mat<R>(Pbest - Mbest));
      bool take = feas_best > opt.tol ? feas_n <= feas_best : xi_n <= xi_b;
      if (take && feas_n <= opt.tol) {
        Pbest = Pn;
        Mbest = Mn;
        feas_best = feas_n;
        best_converged = true;
      }
    }
  }
  R scale = R(1) + max_abs<R>(p.upper_plus);
  if (feas_best > scale / R(10000))
    throw InfeasibleProjection("min_xi: iterate escaped the feasible set");

  Mat<R> x_a = symmetrize<R>((Pbest + Mbest) / R(2));
  Mat<R> x_ab = symmetrize<R>((Pbest - Mbest) / R(2));
  R xi = frobenius<R>(x_ab);
  if (xi < opt.tol) x_ab = Mat<R>::Zero(d, d);  // separable: xi = 0 exactly

  auto out = finish_xi_solution<R>(region, x_a, x_ab);
  out.iterations = it + newton_its;
  out.residual = feas_best;
  out.converged = best_converged;
  return out;
}

// ---------------------------------------------------------------------------
// SDPA sparse export of the epigraph program
// ---------------------------------------------------------------------------

struct SdpaEntry {
  int matno, blkno;
  int i, j;  // 1-indexed, upper triangle
  std::string value;
  bool operator==(const SdpaEntry&) const = default;
};

struct SdpaProblem {
  int m_dim = 0;
  std::vector<int> block_sizes;
  std::vector<std::string> objective;
  std::vector<SdpaEntry> entries;
  bool operator==(const SdpaProblem&) const = default;
};

// Variables: p0 (q), then m0 (q), then t. Blocks: Schur epigraph block of
// size q+1, then the four vertex-difference blocks of size d.
template <typename R>
SdpaProblem make_sdpa(const RegionCM<R>& region,
                      const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  auto p = build_dcv<R>(region, tol);
  const Index d = p.d;
  detail::SvecLayout<R> ly(d);
  const Index q = ly.q;

  SdpaProblem out;
  out.m_dim = static_cast<int>(2 * q + 1);
  out.block_sizes = {static_cast<int>(q + 1), static_cast<int>(d),
                     static_cast<int>(d), static_cast<int>(d),
                     static_cast<int>(d)};
  out.objective.assign(out.m_dim, "0");
  out.objective.back() = "1";  // minimize t

  auto push = [&](int matno, int blkno, Index i, Index j, const R& v) {
    if (v == R(0)) return;
    out.entries.push_back(SdpaEntry{matno, blkno, static_cast<int>(i + 1),
                                    static_cast<int>(j + 1),
                                    real_to_string<R>(v)});
  };

  // Block 1: [[I, R0 (p0; m0)], [., t]] with R0 = (sqrt(d0) | -sqrt(d0)),
  // d0 = diag-weights / 4.
  for (Index i = 0; i < q; ++i) push(0, 1, i, i, R(-1));  // F0 = -I part
  for (Index a = 0; a < q; ++a) {
    R c = sqrt(ly.weight(a)) / R(2);  // sqrt(w/4)
    push(static_cast<int>(a + 1), 1, a, q, c);           // p0_a
    push(static_cast<int>(q + a + 1), 1, a, q, -c);      // m0_a
  }
  push(out.m_dim, 1, q, q, R(1));  // t

  // Blocks 2..5: U+ - P, P - L+, U- - M, M - L-
  auto vertex_block = [&](int blk, const Mat<R>& C, int sign_const, Index var_off,
                          int sign_var) {
    for (Index i = 0; i < d; ++i)
      for (Index j = i; j < d; ++j) {
        push(0, blk, i, j, R(-sign_const) * C(i, j));  // F0 = -const
      }
    for (Index a = 0; a < q; ++a) {
      auto [i, j] = ly.pairs[a];
      push(static_cast<int>(var_off + a + 1), blk, i, j, R(sign_var));
    }
  };
  vertex_block(2, p.upper_plus, +1, 0, -1);   // U+ - P
  vertex_block(3, p.lower_plus, -1, 0, +1);   // P - L+
  vertex_block(4, p.upper_minus, +1, q, -1);  // U- - M
  vertex_block(5, p.lower_minus, -1, q, +1);  // M - L-
  return out;
}

inline void write_sdpa(const SdpaProblem& prob, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("write_sdpa: cannot open " + path);
  f << prob.m_dim << " = mDIM\n";
  f << prob.block_sizes.size() << " = nBLOCK\n";
  for (std::size_t i = 0; i < prob.block_sizes.size(); ++i)
    f << prob.block_sizes[i] << (i + 1 < prob.block_sizes.size() ? " " : " = bLOCKsTRUCT\n");
  for (std::size_t i = 0; i < prob.objective.size(); ++i)
    f << prob.objective[i] << (i + 1 < prob.objective.size() ? " " : "\n");
  for (const auto& e : prob.entries)
    f << e.matno << " " << e.blkno << " " << e.i << " " << e.j << " " << e.value
      << "\n";
  if (!f) throw IoError("write_sdpa: write failed");
}

inline SdpaProblem parse_sdpa(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("parse_sdpa: cannot open " + path);
  SdpaProblem out;
  std::string line;
  int field = 0;
  while (std::getline(f, line)) {
    auto cut = line.find_first_of("=*\"");
    std::string body = line.substr(0, cut == std::string::npos ? line.size() : cut);
    std::istringstream ss(body);
    if (field == 0) {
      ss >> out.m_dim;
      field = 1;
    } else if (field == 1) {
      int n;
      ss >> n;
      field = 2;
    } else if (field == 2) {
      int v;
      while (ss >> v) out.block_sizes.push_back(v);
      field = 3;
    } else if (field == 3) {
      std::string v;
      while (ss >> v) out.objective.push_back(v);
      field = 4;
    } else {
      SdpaEntry e;
      if (ss >> e.matno >> e.blkno >> e.i >> e.j >> e.value)
        out.entries.push_back(e);
    }
  }
  return out;
}

template <typename R>
void export_sdpa(const RegionCM<R>& region, const std::string& path,
                 const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  write_sdpa(make_sdpa<R>(region, tol), path);
}

}  // namespace gqi::dcv
