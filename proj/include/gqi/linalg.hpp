// linalg.hpp — dense helpers shared by all modules: symmetric eigensolves,
// matrix square roots, PSD clipping, pseudoinverse and nullspace.

#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <vector>

#include "gqi/errors.hpp"
#include "gqi/real.hpp"

namespace gqi {

template <typename R>
using Mat = Eigen::Matrix<R, Eigen::Dynamic, Eigen::Dynamic>;
template <typename R>
using Vec = Eigen::Matrix<R, Eigen::Dynamic, 1>;
using Index = Eigen::Index;

template <typename R>
struct SymEig {
  Vec<R> values;   // ascending
  Mat<R> vectors;  // columns
};

template <typename R>
SymEig<R> sym_eig(const Mat<R>& S) {
  Eigen::SelfAdjointEigenSolver<Mat<R>> es(S);
  if (es.info() != Eigen::Success) throw ConvergenceFailure("sym_eig failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

template <typename R>
Vec<R> sym_eigvals(const Mat<R>& S) {
  Eigen::SelfAdjointEigenSolver<Mat<R>> es(S, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw ConvergenceFailure("sym_eigvals failed");
  return es.eigenvalues();
}

template <typename R>
Mat<R> symmetrize(const Mat<R>& S) {
  return (S + S.transpose()) / R(2);
}

// S^{1/2} for symmetric positive definite S.
template <typename R>
Mat<R> sym_sqrt(const Mat<R>& S) {
  auto eig = sym_eig<R>(symmetrize<R>(S));
  if (eig.values(0) <= R(0)) throw NotPositiveDefinite("sym_sqrt: matrix not PD");
  Vec<R> r = eig.values.array().sqrt();
  return eig.vectors * r.asDiagonal() * eig.vectors.transpose();
}

template <typename R>
Mat<R> sym_inv_sqrt(const Mat<R>& S) {
  auto eig = sym_eig<R>(symmetrize<R>(S));
  if (eig.values(0) <= R(0)) throw NotPositiveDefinite("sym_inv_sqrt: matrix not PD");
  Vec<R> r = eig.values.array().sqrt().inverse();
  return eig.vectors * r.asDiagonal() * eig.vectors.transpose();
}

// Projection onto the PSD cone (eigenvalue clipping at zero).
template <typename R>
Mat<R> psd_clip(const Mat<R>& S) {
  auto eig = sym_eig<R>(symmetrize<R>(S));
  Vec<R> w = eig.values.cwiseMax(R(0));
  return eig.vectors * w.asDiagonal() * eig.vectors.transpose();
}

template <typename R>
R min_eigenvalue(const Mat<R>& S) {
  return sym_eigvals<R>(symmetrize<R>(S))(0);
}

template <typename R>
bool is_psd(const Mat<R>& S, const R& tol) {
  return min_eigenvalue<R>(S) >= -tol;
}

template <typename R>
R max_abs(const Mat<R>& S) {
  return S.cwiseAbs().maxCoeff();
}

// Moore-Penrose pseudoinverse via the symmetric eigenproblem of A^T A.
template <typename R>
Mat<R> pinv(const Mat<R>& A, const R& rel_cutoff) {
  if (A.rows() <= A.cols()) {
    Mat<R> G = A * A.transpose();  // r x r
    auto eig = sym_eig<R>(G);
    R cut = eig.values(eig.values.size() - 1) * rel_cutoff * rel_cutoff;
    Vec<R> inv = eig.values;
    for (Index i = 0; i < inv.size(); ++i)
      inv(i) = eig.values(i) > cut ? R(1) / eig.values(i) : R(0);
    return A.transpose() * eig.vectors * inv.asDiagonal() * eig.vectors.transpose();
  }
  return pinv<R>(Mat<R>(A.transpose()), rel_cutoff).transpose();
}

// Orthonormal basis of ker(A), as rows.
template <typename R>
Mat<R> nullspace_rows(const Mat<R>& A, const R& rel_cutoff) {
  Mat<R> G = A.transpose() * A;
  auto eig = sym_eig<R>(G);
  R top = eig.values(eig.values.size() - 1);
  R cut = top > R(0) ? top * rel_cutoff * rel_cutoff : R(0);
  std::vector<Index> keep;
  for (Index i = 0; i < eig.values.size(); ++i)
    if (eig.values(i) <= cut) keep.push_back(i);
  Mat<R> N(static_cast<Index>(keep.size()), A.cols());
  for (Index i = 0; i < N.rows(); ++i) N.row(i) = eig.vectors.col(keep[i]).transpose();
  return N;
}

// Numerical rank against a relative threshold on singular values.
template <typename R>
Index sym_rank(const Mat<R>& S, const R& rel_cutoff) {
  Vec<R> w = sym_eigvals<R>(S).cwiseAbs();
  R cut = w.maxCoeff() * rel_cutoff;
  Index r = 0;
  for (Index i = 0; i < w.size(); ++i)
    if (w(i) > cut) ++r;
  return r;
}

}  // namespace gqi
