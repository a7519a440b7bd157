// assist.hpp — measurement synthesis in the purifying volume: conversion of
// rank-one AB noise components into projective C-measurement profiles,
// post-measurement state updates with displacement bookkeeping, sequential
// plan construction, and compilation into a single C-space symplectic.

#pragma once

#include <optional>
#include <vector>

#include "gqi/linalg.hpp"
#include "gqi/symplectic.hpp"

namespace gqi::assist {

template <typename R>
struct RankOneNoise {
  R value;        // Y1 = value |vector><vector|
  Vec<R> vector;  // unit, 2 n_ab entries, original AB basis
};

template <typename R>
struct MeasurementProfile {
  Vec<R> pbar;          // 2 N_C entries in the local-normal-mode basis
  bool used_aux = false;      // needed the auxiliary/decoupled slot amplitude
  bool appended_mode = false; // no decoupled mode was available; C was extended
  Vec<R> vbar;          // rank-one direction in AB normal modes
  R vbar_value = R(0);
  Vec<R> phase_angles;  // per-C-mode rotation taking pbar to a phi-only profile
};

// Eq.-a42-style phi measurement in the (X, Y) parametrization. The remaining
// state is outcome-independent; first moments shift linearly in the outcome.
template <typename R>
struct PhiMeasurementResult {
  PureStateXY<R> remaining;
  Mat<R> disp_phi;  // <phi_rest> = disp_phi * measured values
  Mat<R> disp_pi;
  std::vector<Index> rest;  // retained mode indices
};

template <typename R>
PhiMeasurementResult<R> apply_phi_measurement(
    const PureStateXY<R>& xy, const std::vector<Index>& measured,
    const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  Index n = xy.modes();
  std::vector<bool> is_measured(n, false);
  for (Index m : measured) {
    if (m < 0 || m >= n) throw DimensionMismatch("apply_phi_measurement: mode");
    is_measured[m] = true;
  }
  PhiMeasurementResult<R> out;
  for (Index i = 0; i < n; ++i)
    if (!is_measured[i]) out.rest.push_back(i);
  if (measured.empty()) {
    out.remaining = xy;
    out.disp_phi = out.disp_pi = Mat<R>::Zero(n, 0);
    return out;
  }
  Index nr = static_cast<Index>(out.rest.size());
  Index nm = static_cast<Index>(measured.size());

  Mat<R> Xi = xy.X.inverse();
  Mat<R> Xi_rr(nr, nr), Xi_rm(nr, nm), Y_rr(nr, nr), Y_rm(nr, nm);
  for (Index a = 0; a < nr; ++a) {
    for (Index b = 0; b < nr; ++b) {
      Xi_rr(a, b) = Xi(out.rest[a], out.rest[b]);
      Y_rr(a, b) = xy.Y(out.rest[a], out.rest[b]);
    }
    for (Index b = 0; b < nm; ++b) {
      Xi_rm(a, b) = Xi(out.rest[a], measured[b]);
      Y_rm(a, b) = xy.Y(out.rest[a], measured[b]);
    }
  }
  Eigen::FullPivLU<Mat<R>> lu(Xi_rr);
  if (!lu.isInvertible())
    throw SingularSubblock("apply_phi_measurement: (X^-1)_rr singular");
  Mat<R> Xr = symmetrize<R>(lu.inverse());
  out.remaining = PureStateXY<R>{Xr, Mat<R>(symmetrize<R>(Y_rr))};
  // Eq. rfirstmoments
  out.disp_phi = -Xr * Xi_rm;
  Mat<R> Z = Xi_rr + Y_rr * Xr * Y_rr;
  Eigen::FullPivLU<Mat<R>> luz(Z);
  if (!luz.isInvertible())
    throw SingularSubblock("apply_phi_measurement: Z_rr singular");
  out.disp_pi = -(Y_rm - Z * Xr * Y_rr * luz.inverse() * Xi_rm);
  (void)tol;
  return out;
}

// ---------------------------------------------------------------------------
// profile <-> noise in the local normal-mode picture
// ---------------------------------------------------------------------------

namespace detail {

template <typename R>
Vec<R> tanh_image(const TmsvsDecomposition<R>& dec, Index n_c, const Vec<R>& pbar) {
  // (D_tanh + -D_tanh) |pbar>
  Index n_ab = static_cast<Index>(dec.r.size());
  Vec<R> v = Vec<R>::Zero(2 * n_ab);
  for (Index j = 0; j < n_ab && j < n_c; ++j) {
    if (dec.r[j] <= R(0)) continue;
    R t = tanh(R(2) * dec.r[j]);
    v(j) = t * pbar(j);
    v(n_ab + j) = -t * pbar(n_c + j);
  }
  return v;
}

}  // namespace detail

// Noise removed in AB (original basis) by measuring the collective profile
// pbar, given in C local normal modes of the decomposition dec.
template <typename R>
RankOneNoise<R> profile_to_noise(const CovarianceMatrix<R>& sigma_global,
                                 Index n_ab, const TmsvsDecomposition<R>& dec,
                                 const Vec<R>& pbar,
                                 const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  Index n_c = sigma_global.n - n_ab;
  if (pbar.size() != 2 * n_c) throw DimensionMismatch("profile_to_noise: pbar");
  if (pbar.norm() <= tol.symplectic) throw ZeroProfile("profile_to_noise");

  Vec<R> img = detail::tanh_image<R>(dec, n_c, pbar);
  R num = img.squaredNorm();
  Vec<R> d_cosh = dec.d_c_cosh(n_c);
  R den(0);
  for (Index k = 0; k < n_c; ++k)
    den += (pbar(k) * pbar(k) + pbar(n_c + k) * pbar(n_c + k)) / d_cosh(k);
  if (num <= tol.symplectic * tol.symplectic) {
    // profile supported on decoupled modes only: no AB effect
    return RankOneNoise<R>{R(0), Vec<R>::Zero(2 * n_ab)};
  }
  R vbar_value = num / den;
  Vec<R> vbar = img / sqrt(num);

  // inverse-difference eigenpair -> noise on the AB reduced state:
  // (sbar' )^-1 - sbar^-1 = vbar_value |vbar><vbar| with sbar = cosh-diagonal
  Vec<R> cosh_ab(2 * n_ab);
  for (Index j = 0; j < n_ab; ++j)
    cosh_ab(j) = cosh_ab(n_ab + j) = cosh(R(2) * dec.r[j]);
  // Ybar = sbar - (sbar^-1 + v |v><v|)^-1 via Sherman-Morrison
  Vec<R> u = cosh_ab.asDiagonal() * vbar;  // sbar |vbar>
  R denom = R(1) + vbar_value * vbar.dot(u);
  Mat<R> Ybar = (vbar_value / denom) * u * u.transpose();
  // back to the original AB basis
  Mat<R> Sinv = dec.S_AB.inverse().data;
  Mat<R> Y = Sinv * Ybar * Sinv.transpose();
  auto eig = sym_eig<R>(Mat<R>(symmetrize<R>(Y)));
  Index top = 2 * n_ab - 1;
  return RankOneNoise<R>{eig.values(top), eig.vectors.col(top)};
}

template <typename R>
struct NoiseToProfileOptions {
  bool allow_append = true;  // extend C with a vacuum mode when no decoupled
                             // slot is available
};

// Builds the normal-mode profile whose phi measurement removes Y1 from AB.
// May extend sigma_global with an auxiliary vacuum mode (returned flag).
template <typename R>
MeasurementProfile<R> noise_to_profile(
    CovarianceMatrix<R>& sigma_global, Index n_ab, TmsvsDecomposition<R>& dec,
    const RankOneNoise<R>& y1,
    const Tolerances<R>& tol = Tolerances<R>::defaults(),
    const NoiseToProfileOptions<R>& opt = NoiseToProfileOptions<R>{}) {
  if (y1.value < R(0)) throw UnphysicalResidual("noise_to_profile: negative noise");
  if (y1.value <= tol.symplectic) throw ZeroNoise("noise_to_profile");
  Index n_c = sigma_global.n - n_ab;

  // purity-count criterion decides whether the auxiliary slot is needed
  std::vector<Index> ab(n_ab);
  std::iota(ab.begin(), ab.end(), 0);
  CovarianceMatrix<R> s_ab = reduce<R>(sigma_global, ab);
  CovarianceMatrix<R> s_res = s_ab;
  s_res.data -= Mat<R>(y1.value * y1.vector * y1.vector.transpose());
  Vec<R> nu_ab = symplectic_eigenvalues<R>(s_ab);
  Vec<R> nu_res = symplectic_eigenvalues<R>(s_res);
  R purity_tol = sqrt(tol.purity);
  if (nu_res(nu_res.size() - 1) < R(1) - purity_tol)
    throw UnphysicalResidual("noise_to_profile: sigma_AB - Y1 unphysical");
  auto count_pure = [&](const Vec<R>& nu) {
    Index c = 0;
    for (Index j = 0; j < nu.size(); ++j)
      if (abs(nu(j) - R(1)) < purity_tol) ++c;
    return c;
  };
  bool creates_purity = count_pure(nu_res) - count_pure(nu_ab) >= 1;

  // normal-mode noise and the inverse-difference eigenpair (Sherman-Morrison)
  Mat<R> Sab = dec.S_AB.data;
  Vec<R> ubar = Sab * y1.vector;
  Vec<R> cosh_ab(2 * n_ab);
  bool hits_pure_mode = false;
  for (Index j = 0; j < n_ab; ++j) {
    cosh_ab(j) = cosh_ab(n_ab + j) = cosh(R(2) * dec.r[j]);
    if (dec.r[j] <= R(0)) {
      R w = sqrt(ubar(j) * ubar(j) + ubar(n_ab + j) * ubar(n_ab + j));
      if (w * sqrt(y1.value) > sqrt(tol.feasibility)) hits_pure_mode = true;
    }
  }
  if (hits_pure_mode)
    throw UnphysicalResidual(
        "noise_to_profile: noise overlaps a pure AB normal mode");

  Vec<R> ci = cosh_ab.asDiagonal().inverse() * ubar;  // sbar^-1 |ubar>
  R trace_term = y1.value * ubar.dot(ci);
  if (trace_term >= R(1) - tol.feasibility)
    throw UnphysicalResidual("noise_to_profile: residual not positive definite");
  R vbar_value = y1.value * ci.squaredNorm() / (R(1) - trace_term);
  Vec<R> vbar = ci / ci.norm();

  // pveccons0: invert the tanh map on the paired modes
  Vec<R> p0 = Vec<R>::Zero(2 * n_c);
  for (Index j = 0; j < n_ab; ++j) {
    if (dec.r[j] <= R(0)) continue;
    R t = tanh(R(2) * dec.r[j]);
    p0(j) = vbar(j) / t;
    p0(n_c + j) = -vbar(n_ab + j) / t;
  }

  MeasurementProfile<R> out;
  out.vbar = vbar;
  out.vbar_value = vbar_value;

  if (!creates_purity) {
    // sqrt-argument of the auxiliary amplitude (Eq.-pveccons domain [0, 1/v])
    Vec<R> d_cosh = dec.d_c_cosh(n_c);
    R quad(0);
    for (Index k = 0; k < n_c; ++k)
      quad += (p0(k) * p0(k) + p0(n_c + k) * p0(n_c + k)) / d_cosh(k);
    R arg = R(1) / vbar_value - quad;
    if (arg < -sqrt(tol.feasibility) * (R(1) + quad))
      throw NegativeSqrtArgument("noise_to_profile: sqrt argument " +
                                 real_to_string(arg));
    if (arg < R(0)) arg = R(0);

    Index slot;
    if (!dec.decoupled_c_modes.empty()) {
      // slot convention: right after the AB-sized head when the volume is
      // large enough, else the first decoupled mode
      slot = n_c > n_ab ? n_ab : dec.decoupled_c_modes.front();
    } else {
      if (!opt.allow_append)
        throw UnphysicalResidual("noise_to_profile: auxiliary mode required");
      // append a vacuum mode to C
      Index n = sigma_global.n;
      Mat<R> ext = Mat<R>::Identity(2 * (n + 1), 2 * (n + 1));
      ext.block(0, 0, n, n) = sigma_global.data.block(0, 0, n, n);
      ext.block(0, n + 1, n, n) = sigma_global.data.block(0, n, n, n);
      ext.block(n + 1, 0, n, n) = sigma_global.data.block(n, 0, n, n);
      ext.block(n + 1, n + 1, n, n) = sigma_global.data.block(n, n, n, n);
      sigma_global = CovarianceMatrix<R>{n + 1, ext};
      dec.S_C = {n_c + 1, Mat<R>(direct_sum<R>(dec.S_C,
                                               SymplecticTransform<R>::identity(1))
                                     .data)};
      dec.decoupled_c_modes.push_back(n_c);
      n_c += 1;
      Vec<R> p0x = Vec<R>::Zero(2 * n_c);
      p0x.head(n_c - 1) = p0.head(n_c - 1);
      p0x.segment(n_c, n_c - 1) = p0.tail(n_c - 1);
      p0 = p0x;
      slot = n_c - 1;
      out.appended_mode = true;
    }
    p0(slot) += sqrt(arg);
    out.used_aux = true;
  }

  // normalization: unit norm, positive leading entry within the phi block
  R nrm = p0.norm();
  p0 /= nrm;
  for (Index k = 0; k < 2 * n_c; ++k) {
    if (abs(p0(k)) > sqrt(tol.symplectic)) {
      if (p0(k) < R(0)) p0 = -p0;
      break;
    }
  }
  out.pbar = p0;

  // per-mode phase layer taking pbar into a phi-only profile
  out.phase_angles = Vec<R>::Zero(n_c);
  for (Index k = 0; k < n_c; ++k)
    if (abs(p0(k)) + abs(p0(n_c + k)) > R(0))
      out.phase_angles(k) = atan2(p0(n_c + k), p0(k));
  return out;
}

// ---------------------------------------------------------------------------
// profile localization: S_<pbar| places the collective mode on the last C
// mode's phi quadrature
// ---------------------------------------------------------------------------

// Phase layer R_C followed by the identity-with-pivot-row-replaced completion
// (the phi-pi-uncorrelated L + L^-T form).
template <typename R>
SymplecticTransform<R> profile_transform(const MeasurementProfile<R>& prof,
                                         Index n_c,
                                         const Tolerances<R>& tol =
                                             Tolerances<R>::defaults()) {
  Mat<R> Rc = Mat<R>::Zero(2 * n_c, 2 * n_c);
  for (Index k = 0; k < n_c; ++k) {
    R c = cos(prof.phase_angles(k)), s = sin(prof.phase_angles(k));
    Rc(k, k) = c;
    Rc(k, n_c + k) = s;
    Rc(n_c + k, k) = -s;
    Rc(n_c + k, n_c + k) = c;
  }
  Vec<R> p_phi = (Rc * prof.pbar).head(n_c);
  // pivot: the entry the profile row replaces in the identity block
  Index pivot = 0;
  R best(-1);
  for (Index k = 0; k < n_c; ++k)
    if (abs(p_phi(k)) > best) {
      best = abs(p_phi(k));
      pivot = k;
    }
  if (best <= tol.symplectic)
    throw ZeroProfile("profile_transform: vanishing phi profile");
  Mat<R> L = Mat<R>::Zero(n_c, n_c);
  Index row = 0;
  for (Index k = 0; k < n_c; ++k)
    if (k != pivot) L(row++, k) = R(1);
  L.row(n_c - 1) = p_phi.transpose();
  Mat<R> S = Mat<R>::Zero(2 * n_c, 2 * n_c);
  S.topLeftCorner(n_c, n_c) = L;
  S.bottomRightCorner(n_c, n_c) = L.inverse().transpose();
  return {n_c, Mat<R>(S * Rc)};
}

// ---------------------------------------------------------------------------
// sequential plan synthesis and single-transform compilation
// ---------------------------------------------------------------------------

template <typename R>
struct PlanStep {
  MeasurementProfile<R> profile;
  Mat<R> c_transform;   // applied to the step's active C modes
  Mat<R> disp_phi;      // displacement rules for the remaining modes
  Mat<R> disp_pi;
  R purity_deviation;   // 1 - purity of the AB reduced state after this step
};

template <typename R>
struct MeasurementPlan {
  Index n_ab = 0;
  Index n_c = 0;            // extended initial C mode count
  Index appended_modes = 0; // vacuum modes added to C
  Index aux_count = 0;      // steps that needed the auxiliary slot amplitude
  std::vector<PlanStep<R>> steps;
  Mat<R> compiled;          // single symplectic on the extended initial C space
  std::vector<std::pair<Index, bool>> measured;  // (C mode, measure-pi?)
  bool compiled_from_profiles = false;  // nullspace-completion route
  std::vector<Vec<R>> operator_rows;    // measured collective operators,
                                        // extended-initial-C coordinates
};

namespace detail {

// batch measurement of C modes (phi or pi per mode) on a global pure state;
// returns the reduced AB covariance matrix.
template <typename R>
CovarianceMatrix<R> measure_and_reduce(const CovarianceMatrix<R>& sigma,
                                       Index n_ab,
                                       const std::vector<std::pair<Index, bool>>& meas,
                                       const Tolerances<R>& tol) {
  Index n = sigma.n;
  Index n_c = n - n_ab;
  CovarianceMatrix<R> cur = sigma;
  // rotate pi-measured modes so the target quadrature becomes phi
  Mat<R> rot = Mat<R>::Identity(2 * n_c, 2 * n_c);
  for (auto [mode, pi] : meas)
    if (pi) {
      rot(mode, mode) = R(0);
      rot(mode, n_c + mode) = R(1);
      rot(n_c + mode, mode) = R(-1);
      rot(n_c + mode, n_c + mode) = R(0);
    }
  std::vector<Index> cmodes(n_c);
  std::iota(cmodes.begin(), cmodes.end(), n_ab);
  cur = apply<R>(embed<R>(SymplecticTransform<R>{n_c, rot}, cmodes, n), cur);
  auto xy = fit_pure<R>(cur, tol);
  std::vector<Index> midx;
  for (auto [mode, pi] : meas) midx.push_back(n_ab + mode);
  auto res = apply_phi_measurement<R>(xy, midx, tol);
  auto after = assemble_pure<R>(res.remaining);
  std::vector<Index> ab(n_ab);
  std::iota(ab.begin(), ab.end(), 0);
  return reduce<R>(after, ab);
}

}  // namespace detail

template <typename R>
void compile_from_profiles(MeasurementPlan<R>& plan,
                           const Tolerances<R>& tol);

// Iterates the profile construction over an ordered rank-one decomposition,
// measuring one collective C mode per component. AB stays in its original
// basis throughout; the C basis evolves and is recompiled into one transform.
template <typename R>
MeasurementPlan<R> synthesize_plan(
    const CovarianceMatrix<R>& sigma_global, Index n_ab,
    const std::vector<RankOneNoise<R>>& decomposition,
    const Tolerances<R>& tol = Tolerances<R>::defaults()) {
  // first pass counts auxiliary appends so the compiled space is fixed
  Index appended = 0;
  {
    CovarianceMatrix<R> sigma = sigma_global;
    bool first = true;
    for (const auto& comp : decomposition) {
      auto dec = local_normal_modes<R>(sigma, n_ab, tol, first);
      first = false;
      Index n_c_before = sigma.n - n_ab;
      MeasurementProfile<R> prof;
      try {
        prof = noise_to_profile<R>(sigma, n_ab, dec, comp, tol);
      } catch (const UnphysicalResidual& e) {
        throw PrefixUnphysical(std::string(e.what()) + " (component " +
                               std::to_string(&comp - decomposition.data()) + ")");
      }
      if (prof.appended_mode) ++appended;
      Index n_c_cur = sigma.n - n_ab;
      (void)n_c_before;
      auto T_C = SymplecticTransform<R>{
          n_c_cur, Mat<R>(profile_transform<R>(prof, n_c_cur, tol).data *
                          dec.S_C.data)};
      std::vector<Index> cmodes(n_c_cur);
      std::iota(cmodes.begin(), cmodes.end(), n_ab);
      sigma = apply<R>(embed<R>(T_C, cmodes, sigma.n), sigma);
      auto xy = fit_pure<R>(sigma, tol);
      auto res = apply_phi_measurement<R>(xy, {sigma.n - 1}, tol);
      sigma = assemble_pure<R>(res.remaining);
    }
  }

  MeasurementPlan<R> out;
  out.n_ab = n_ab;
  out.appended_modes = appended;
  Index n_c0 = sigma_global.n - n_ab + appended;
  out.n_c = n_c0;
  out.compiled = Mat<R>::Identity(2 * n_c0, 2 * n_c0);

  // extended starting state
  CovarianceMatrix<R> sigma{n_ab + n_c0,
                            Mat<R>::Identity(2 * (n_ab + n_c0), 2 * (n_ab + n_c0))};
  {
    Index n = sigma_global.n;
    sigma.data.block(0, 0, n, n) = sigma_global.data.block(0, 0, n, n);
    sigma.data.block(0, n_ab + n_c0, n, n) = sigma_global.data.block(0, n, n, n);
    sigma.data.block(n_ab + n_c0, 0, n, n) = sigma_global.data.block(n, 0, n, n);
    sigma.data.block(n_ab + n_c0, n_ab + n_c0, n, n) =
        sigma_global.data.block(n, n, n, n);
  }
  std::vector<Index> ab(n_ab);
  std::iota(ab.begin(), ab.end(), 0);
  CovarianceMatrix<R> s_ab0 = reduce<R>(sigma, ab);
  Mat<R> prefix = Mat<R>::Zero(2 * n_ab, 2 * n_ab);

  bool first = true;
  for (std::size_t i = 0; i < decomposition.size(); ++i) {
    const auto& comp = decomposition[i];
    auto dec = local_normal_modes<R>(sigma, n_ab, tol, first);
    first = false;
    MeasurementProfile<R> prof;
    try {
      NoiseToProfileOptions<R> opt;
      opt.allow_append = false;  // space was pre-extended
      prof = noise_to_profile<R>(sigma, n_ab, dec, comp, tol, opt);
    } catch (const UnphysicalResidual& e) {
      throw PrefixUnphysical(std::string(e.what()) + " (component " +
                             std::to_string(i) + ")");
    }
    if (prof.used_aux) ++out.aux_count;

    Index n_c_cur = sigma.n - n_ab;
    auto T_C = SymplecticTransform<R>{
        n_c_cur,
        Mat<R>(profile_transform<R>(prof, n_c_cur, tol).data * dec.S_C.data)};

    // accumulate the compiled transform on the extended initial C space
    std::vector<Index> active(n_c_cur);
    std::iota(active.begin(), active.end(), 0);
    out.compiled = embed<R>(T_C, active, n_c0).data * out.compiled;
    out.measured.emplace_back(n_c_cur - 1, false);
    out.operator_rows.push_back(out.compiled.row(n_c_cur - 1).transpose());

    std::vector<Index> cmodes(n_c_cur);
    std::iota(cmodes.begin(), cmodes.end(), n_ab);
    sigma = apply<R>(embed<R>(T_C, cmodes, sigma.n), sigma);
    auto xy = fit_pure<R>(sigma, tol);
    auto res = apply_phi_measurement<R>(xy, {sigma.n - 1}, tol);
    sigma = assemble_pure<R>(res.remaining);

    // verification against the prefix subtraction
    prefix += Mat<R>(comp.value * comp.vector * comp.vector.transpose());
    CovarianceMatrix<R> s_ab = reduce<R>(sigma, ab);
    R resid = max_abs<R>(Mat<R>(s_ab.data - (s_ab0.data - prefix)));
    if (resid > sqrt(tol.symplectic) * R(100) * (R(1) + max_abs<R>(s_ab0.data)))
      throw ConvergenceFailure("synthesize_plan: step " + std::to_string(i) +
                               " residual " + real_to_string(resid));

    PlanStep<R> step;
    step.profile = prof;
    step.c_transform = T_C.data;
    step.disp_phi = res.disp_phi;
    step.disp_pi = res.disp_pi;
    Eigen::FullPivLU<Mat<R>> lu(s_ab.data);
    R det = lu.determinant();
    step.purity_deviation = R(1) - R(1) / sqrt(det > R(0) ? det : R(1));
    out.steps.push_back(std::move(step));
  }

  // nullspace-completion compilation when every measured collective operator
  // is phi-only or pi-only in the extended initial coordinates
  compile_from_profiles<R>(out, tol);
  return out;
}

// Eq.-gsreplace-style single transform: phi-profiles as leading rows, the
// pseudoinverse of the pi-profile matrix next, nullspace rows to complete.
template <typename R>
void compile_from_profiles(MeasurementPlan<R>& plan, const Tolerances<R>& tol) {
  const Index n_c = plan.n_c;
  std::vector<Vec<R>> phi_rows, pi_rows;
  std::vector<std::size_t> phi_steps, pi_steps;
  R scale(0);
  for (const auto& row : plan.operator_rows) scale = std::max(scale, row.norm());
  for (std::size_t s = 0; s < plan.operator_rows.size(); ++s) {
    const Vec<R>& row = plan.operator_rows[s];
    R phi_part = row.head(n_c).norm(), pi_part = row.tail(n_c).norm();
    if (pi_part <= sqrt(tol.symplectic) * scale) {
      phi_rows.push_back(row.head(n_c));
      phi_steps.push_back(s);
    } else if (phi_part <= sqrt(tol.symplectic) * scale) {
      pi_rows.push_back(row.tail(n_c));
      pi_steps.push_back(s);
    } else {
      return;  // correlated profile: keep the sequential-product compilation
    }
  }
  Index kphi = static_cast<Index>(phi_rows.size());
  Index kpi = static_cast<Index>(pi_rows.size());
  if (kphi + kpi == 0 || kphi + kpi > n_c) return;

  Mat<R> L = Mat<R>::Zero(n_c, n_c);
  for (Index i = 0; i < kphi; ++i) L.row(i) = phi_rows[i].transpose();
  R cut = sqrt(real_eps<R>());
  if (kpi > 0) {
    Mat<R> P(n_c, kpi);  // columns |p_pi>
    for (Index i = 0; i < kpi; ++i) P.col(i) = pi_rows[i];
    Mat<R> Pinv = pinv<R>(P, cut);  // kpi x n_c
    for (Index i = 0; i < kpi; ++i) L.row(kphi + i) = Pinv.row(i);
  }
  Mat<R> head = L.topRows(kphi + kpi);
  Mat<R> null_rows = nullspace_rows<R>(head, cut);
  if (null_rows.rows() != n_c - kphi - kpi) return;
  L.bottomRows(n_c - kphi - kpi) = null_rows;
  Eigen::FullPivLU<Mat<R>> lu(L);
  if (!lu.isInvertible()) return;

  Mat<R> S = Mat<R>::Zero(2 * n_c, 2 * n_c);
  S.topLeftCorner(n_c, n_c) = L;
  S.bottomRightCorner(n_c, n_c) = lu.inverse().transpose();
  // sanity: the designated rows reproduce the measured operators
  for (Index i = 0; i < kphi; ++i)
    if ((Vec<R>(S.row(i).transpose()).head(n_c) - phi_rows[i]).norm() >
        sqrt(tol.symplectic) * scale)
      return;
  for (Index i = 0; i < kpi; ++i)
    if ((Vec<R>(S.row(n_c + kphi + i).transpose()).tail(n_c) - pi_rows[i]).norm() >
        sqrt(tol.symplectic) * (R(1) + scale) * R(10))
      return;

  plan.compiled = S;
  plan.measured.clear();
  for (Index i = 0; i < kphi; ++i) plan.measured.emplace_back(i, false);
  for (Index i = 0; i < kpi; ++i) plan.measured.emplace_back(kphi + i, true);
  plan.compiled_from_profiles = true;
  (void)phi_steps;
  (void)pi_steps;
}

// Executes the compiled plan: one C-space symplectic, then a batch of
// quadrature measurements; returns the reduced AB covariance matrix.
template <typename R>
CovarianceMatrix<R> execute_compiled(const CovarianceMatrix<R>& sigma_global,
                                     const MeasurementPlan<R>& plan,
                                     const Tolerances<R>& tol =
                                         Tolerances<R>::defaults()) {
  Index n_ab = plan.n_ab;
  Index n0 = sigma_global.n;
  Index n = n_ab + plan.n_c;
  CovarianceMatrix<R> sigma{n, Mat<R>::Identity(2 * n, 2 * n)};
  sigma.data.block(0, 0, n0, n0) = sigma_global.data.block(0, 0, n0, n0);
  sigma.data.block(0, n, n0, n0) = sigma_global.data.block(0, n0, n0, n0);
  sigma.data.block(n, 0, n0, n0) = sigma_global.data.block(n0, 0, n0, n0);
  sigma.data.block(n, n, n0, n0) = sigma_global.data.block(n0, n0, n0, n0);

  std::vector<Index> cmodes(plan.n_c);
  std::iota(cmodes.begin(), cmodes.end(), n_ab);
  sigma = apply<R>(
      embed<R>(SymplecticTransform<R>{plan.n_c, plan.compiled}, cmodes, n), sigma);
  return detail::measure_and_reduce<R>(sigma, n_ab, plan.measured, tol);
}

}  // namespace gqi::assist
