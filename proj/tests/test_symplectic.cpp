#include <doctest.h>

#include "gqi/symplectic.hpp"
#include "test_util.hpp"

using namespace gqi;
using testutil::random_physical_cm;
using testutil::random_pure_cm;
using testutil::random_symplectic;
using testutil::tmsvs;

TEST_CASE("williamson on scalar multiples of identity") {
  CovarianceMatrix<double> sig{2, 2.0 * Mat<double>::Identity(4, 4)};
  auto w = williamson<double>(sig);
  CHECK(w.nu(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(w.nu(1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(symplectic_residual<double>(w.S) < 1e-12);
  // orthogonal-symplectic: S S^T = I
  CHECK(max_abs<double>(w.S.data * w.S.data.transpose() -
                        Mat<double>::Identity(4, 4)) < 1e-10);
}

TEST_CASE("williamson on vacuum counts purities") {
  auto w = williamson<double>(CovarianceMatrix<double>::identity(2));
  CHECK(w.nu(0) == doctest::Approx(1.0));
  CHECK(w.purity_count == 2);
}

TEST_CASE("williamson rejects non-PD input") {
  Mat<double> m = Mat<double>::Identity(4, 4);
  m(0, 0) = -1.0;
  CHECK_THROWS_AS(williamson<double>(CovarianceMatrix<double>{2, m}),
                  NotPositiveDefinite);
}

TEST_CASE("TMSVS r=0.5 is pure with PT spectrum (e, 1/e)") {
  double r = 0.5;
  auto sig = tmsvs<double>(r);
  auto w = williamson<double>(sig);
  CHECK(std::abs(w.nu(0) - 1.0) < 1e-12);
  CHECK(std::abs(w.nu(1) - 1.0) < 1e-12);
  CHECK(w.purity_count == 2);

  auto nt = pt_symplectic_eigenvalues<double>(sig, 1);
  CHECK(nt(0) == doctest::Approx(std::exp(1.0)).epsilon(1e-12));
  CHECK(nt(1) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(log_negativity<double>(sig, 1) ==
        doctest::Approx(1.0 / std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("partial transpose is an involution and fixes the identity") {
  auto id = CovarianceMatrix<double>::identity(4);
  CHECK(max_abs<double>(partial_transpose<double>(id, 2).data - id.data) == 0.0);
  auto sig = random_physical_cm<double>(4);
  auto twice = partial_transpose<double>(partial_transpose<double>(sig, 2), 2);
  CHECK(max_abs<double>(twice.data - sig.data) == 0.0);
}

TEST_CASE("vacuum is separable") {
  CHECK(log_negativity<double>(CovarianceMatrix<double>::identity(2), 1) == 0.0);
}

TEST_CASE("log-negativity vanishes on random product states") {
  for (int t = 0; t < 20; ++t) {
    Index na = 1 + t % 3, nb = 1 + (t / 3) % 3;
    auto a = random_physical_cm<double>(na);
    auto b = random_physical_cm<double>(nb);
    Index n = na + nb;
    Mat<double> sig = Mat<double>::Zero(2 * n, 2 * n);
    sig.block(0, 0, na, na) = a.phi_block();
    sig.block(0, n, na, na) = a.phi_pi_block();
    sig.block(n, 0, na, na) = a.phi_pi_block().transpose();
    sig.block(n, n, na, na) = a.pi_block();
    sig.block(na, na, nb, nb) = b.phi_block();
    sig.block(na, n + na, nb, nb) = b.phi_pi_block();
    sig.block(n + na, na, nb, nb) = b.phi_pi_block().transpose();
    sig.block(n + na, n + na, nb, nb) = b.pi_block();
    std::vector<Index> bm(nb);
    std::iota(bm.begin(), bm.end(), na);
    auto pt = partial_transpose<double>({n, sig}, bm);
    auto nu = symplectic_eigenvalues<double>(pt);
    CHECK(nu(n - 1) > 1.0 - 1e-9);
  }
}

TEST_CASE("williamson round-trips random physical CMs") {
  for (int t = 0; t < 50; ++t) {
    Index n = 1 + t % 8;
    auto sig = random_physical_cm<double>(n);
    auto w = williamson<double>(sig);
    Mat<double> D = Mat<double>::Zero(2 * n, 2 * n);
    for (Index j = 0; j < n; ++j) D(j, j) = D(n + j, n + j) = w.nu(j);
    CHECK(max_abs<double>(w.S.data * sig.data * w.S.data.transpose() - D) < 1e-9);
    CHECK(symplectic_residual<double>(w.S) < 1e-9);
    for (Index j = 0; j + 1 < n; ++j) CHECK(w.nu(j) >= w.nu(j + 1));
  }
}

TEST_CASE("williamson handles degenerate spectra") {
  for (int t = 0; t < 10; ++t) {
    Index n = 3;
    auto S = random_symplectic<double>(n);
    Vec<double> d(2 * n);
    d << 1.7, 1.7, 1.2, 1.7, 1.7, 1.2;
    Mat<double> sig = S.data * d.asDiagonal() * S.data.transpose();
    auto w = williamson<double>(CovarianceMatrix<double>{n, symmetrize<double>(sig)});
    CHECK(w.nu(0) == doctest::Approx(1.7).epsilon(1e-8));
    CHECK(w.nu(2) == doctest::Approx(1.2).epsilon(1e-8));
    CHECK(symplectic_residual<double>(w.S) < 1e-8);
  }
}

TEST_CASE("pure-state PT spectrum is closed under inversion") {
  for (int t = 0; t < 20; ++t) {
    Index n = 2 + t % 4;
    auto sig = random_pure_cm<double>(n);
    std::vector<Index> bm;
    for (Index i = n / 2; i < n; ++i) bm.push_back(i);
    auto nu = symplectic_eigenvalues<double>(partial_transpose<double>(sig, bm));
    for (Index j = 0; j < n; ++j) {
      double inv = 1.0 / nu(j);
      double best = 1e9;
      for (Index k = 0; k < n; ++k) best = std::min(best, std::abs(nu(k) - inv));
      CHECK(best < 1e-8);
    }
  }
}

TEST_CASE("assemble/fit pure round trip") {
  PureStateXY<double> vac{Mat<double>::Identity(3, 3), Mat<double>::Zero(3, 3)};
  CHECK(max_abs<double>(assemble_pure<double>(vac).data -
                        Mat<double>::Identity(6, 6)) == 0.0);

  Mat<double> X(2, 2);
  X << 2.0, 0.0, 0.0, 0.5;
  PureStateXY<double> sq{X, Mat<double>::Zero(2, 2)};
  auto sig = assemble_pure<double>(sq);
  CHECK(sig.data(0, 0) == 2.0);
  CHECK(sig.data(4 - 2 + 0, 2) == doctest::Approx(0.5));  // pi block = X^{-1}
  CHECK(sig.data(3, 3) == doctest::Approx(2.0));

  for (int t = 0; t < 20; ++t) {
    auto pure = random_pure_cm<double>(1 + t % 4);
    auto xy = fit_pure<double>(pure);
    CHECK(max_abs<double>(assemble_pure<double>(xy).data - pure.data) < 1e-9);
    // determinant of a pure CM is 1
    CHECK(std::abs(pure.data.determinant() - 1.0) < 1e-8);
  }
}

TEST_CASE("fit_pure rejects mixed states") {
  CovarianceMatrix<double> thermal{1, 2.0 * Mat<double>::Identity(2, 2)};
  CHECK_THROWS_AS(fit_pure<double>(thermal), NotPure);
}

TEST_CASE("fit of TMSVS reads cosh/sinh blocks") {
  auto sig = tmsvs<double>(0.5);
  auto xy = fit_pure<double>(sig);
  CHECK(xy.X(0, 0) == doctest::Approx(std::cosh(1.0)));
  CHECK(xy.X(0, 1) == doctest::Approx(std::sinh(1.0)));
  CHECK(max_abs<double>(xy.Y) < 1e-12);
}

TEST_CASE("symplectic Gram-Schmidt reproduces identity from canonical rows") {
  std::vector<std::pair<Index, Vec<double>>> seeds;
  for (Index i = 0; i < 4; ++i) {
    Vec<double> e = Vec<double>::Zero(4);
    e(i) = 1.0;
    seeds.emplace_back(i, e);
  }
  auto S = symplectic_gram_schmidt<double>(seeds, 2);
  CHECK(max_abs<double>(S.data - Mat<double>::Identity(4, 4)) < 1e-12);
}

TEST_CASE("symplectic Gram-Schmidt completes a single seed") {
  Vec<double> p(4);
  p << 1.0, 1.0, 0.0, 0.0;
  p /= std::sqrt(2.0);
  auto S = symplectic_gram_schmidt<double>({{1, p}}, 2);
  CHECK(max_abs<double>(Vec<double>(S.data.row(1).transpose()) - p) < 1e-12);
  CHECK(symplectic_residual<double>(S) < 1e-12);
}

TEST_CASE("symplectic Gram-Schmidt flags degenerate seeds") {
  // two seeds proportional to each other on conjugate slots: Omega product 0
  Vec<double> p(4), q(4);
  p << 1.0, 0.0, 0.0, 0.0;
  q << 2.0, 0.0, 0.0, 0.0;
  CHECK_THROWS_AS(symplectic_gram_schmidt<double>({{0, p}, {2, q}}, 2),
                  SymplecticDegeneracy);
}

TEST_CASE("random symplectics satisfy the defining identity at both precisions") {
  for (int t = 0; t < 30; ++t) {
    auto S = random_symplectic<double>(1 + t % 5);
    CHECK(symplectic_residual<double>(S) < 1e-12);
  }
  for (int t = 0; t < 5; ++t) {
    auto S = random_symplectic<BigFloat>(1 + t % 4);
    CHECK(symplectic_residual<BigFloat>(S) < BigFloat("1e-70"));
  }
}

TEST_CASE("local normal modes of a product vacuum") {
  auto dec = local_normal_modes<double>(CovarianceMatrix<double>::identity(5), 2);
  CHECK(dec.pair_count == 0);
  for (auto& r : dec.r) CHECK(r == 0.0);
  CHECK(dec.decoupled_c_modes.size() == 3);
  CHECK(max_abs<double>(dec.S_AB.data * dec.S_AB.data.transpose() -
                        Mat<double>::Identity(4, 4)) < 1e-10);
}

TEST_CASE("local normal modes of a TMSVS recover the squeezing parameter") {
  auto dec = local_normal_modes<double>(tmsvs<double>(0.5), 1);
  CHECK(dec.pair_count == 1);
  CHECK(dec.r[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("local normal modes on random pure states match reduced spectra") {
  for (int t = 0; t < 15; ++t) {
    Index n_ab = 1 + t % 3, n_c = 1 + (t / 2) % 4;
    auto sig = random_pure_cm<double>(n_ab + n_c);
    auto dec = local_normal_modes<double>(sig, n_ab);  // validates structure inside
    std::vector<Index> ab(n_ab);
    std::iota(ab.begin(), ab.end(), 0);
    auto wr = williamson<double>(reduce<double>(sig, ab));
    for (Index j = 0; j < n_ab; ++j)
      CHECK(std::cosh(2 * dec.r[j]) == doctest::Approx(wr.nu(j)).epsilon(1e-8));
    CHECK(dec.pair_count <= std::min(n_ab, n_c));
    // Schmidt symmetry: reduced AB and C share their non-unit spectra
    std::vector<Index> cm(n_c);
    std::iota(cm.begin(), cm.end(), n_ab);
    auto wc = williamson<double>(reduce<double>(sig, cm));
    for (Index j = 0; j < std::min(n_ab, n_c); ++j)
      if (wr.nu(j) > 1.0 + 1e-9)
        CHECK(wc.nu(j) == doctest::Approx(wr.nu(j)).epsilon(1e-8));
  }
}

TEST_CASE("local normal modes reject mixed global states") {
  auto mixed = random_physical_cm<double>(4, 2.5);
  CHECK_THROWS_AS(local_normal_modes<double>(mixed, 2), NotPure);
}

TEST_CASE("degenerate local spectra are aligned and flagged") {
  // two identical TMSVS pairs (AB modes 0,1 with C modes 2,3), then mixed by
  // a beamsplitter inside each party: local spectra are doubly degenerate.
  double r = 0.4;
  auto pair1 = tmsvs<double>(r);
  Index n = 4;
  Mat<double> sig = Mat<double>::Zero(2 * n, 2 * n);
  // modes (0,2) and (1,3) are TMSVS partners
  auto place = [&](Index a, Index b) {
    double c = std::cosh(2 * r), s = std::sinh(2 * r);
    sig(a, a) = sig(b, b) = sig(n + a, n + a) = sig(n + b, n + b) = c;
    sig(a, b) = sig(b, a) = s;
    sig(n + a, n + b) = sig(n + b, n + a) = -s;
  };
  place(0, 2);
  place(1, 3);
  (void)pair1;
  std::vector<std::pair<Index, Vec<double>>> no_seeds;
  // mix AB modes (0,1) and C modes (2,3) by 45-degree beamsplitters
  auto bs = [&](Index i, Index j) {
    Mat<double> G = Mat<double>::Identity(2 * n, 2 * n);
    double c = std::cos(0.7), s = std::sin(0.7);
    G(i, i) = G(j, j) = G(n + i, n + i) = G(n + j, n + j) = c;
    G(i, j) = G(n + i, n + j) = s;
    G(j, i) = G(n + j, n + i) = -s;
    return G;
  };
  Mat<double> G = bs(0, 1) * bs(2, 3);
  sig = G * sig * G.transpose();
  auto dec = local_normal_modes<double>(CovarianceMatrix<double>{n, sig}, 2);
  CHECK(dec.degenerate);
  CHECK(dec.pair_count == 2);
  CHECK(dec.r[0] == doctest::Approx(r).epsilon(1e-9));
  CHECK(dec.r[1] == doctest::Approx(r).epsilon(1e-9));
}
