#include <doctest.h>

#include "gqi/lattice.hpp"

using namespace gqi;
using namespace gqi::lattice;

TEST_CASE("single-site chain is a pure squeezed mode") {
  auto sig = vacuum_cm<double>(LatticeSpec::obc(1, 1.0, 1, 0));
  double k = 1.0 * 1.0 + 2.0;
  CHECK(sig.data(0, 0) == doctest::Approx(1.0 / std::sqrt(k)));
  CHECK(sig.data(1, 1) == doctest::Approx(std::sqrt(k)));
  auto w = williamson<double>(sig);
  CHECK(w.nu(0) == doctest::Approx(1.0));
}

TEST_CASE("two-site chain satisfies the purity identity sigma_phi sigma_pi = I") {
  auto sig = vacuum_cm<double>(LatticeSpec::obc(2, 1.0, 1, 0));
  Mat<double> prod = sig.phi_block() * sig.pi_block();
  CHECK(max_abs<double>(prod - Mat<double>::Identity(2, 2)) < 1e-13);
}

TEST_CASE("massless 100-site OBC volume is pure") {
  auto sig = vacuum_cm<double>(LatticeSpec::obc(100, 0.0, 10, 20));
  Mat<double> prod = sig.phi_block() * sig.pi_block();
  CHECK(max_abs<double>(prod - Mat<double>::Identity(100, 100)) < 1e-11);
  auto nu = symplectic_eigenvalues<double>(sig);
  CHECK(std::abs(nu(0) - 1.0) < 1e-10);
  CHECK(std::abs(nu(99) - 1.0) < 1e-10);
}

TEST_CASE("region extraction geometry") {
  CHECK_THROWS_AS(vacuum_cm<double>(LatticeSpec::obc(0, 1.0, 1, 0)), GeometryError);
  auto full = vacuum_cm<double>(LatticeSpec::obc(10, 1.0, 4, 4));
  CHECK_THROWS_AS(extract_regions<double>(full, LatticeSpec::obc(10, 1.0, 4, 4)),
                  GeometryError);  // 2*4+4 > 10
}

TEST_CASE("whole-volume d=1 r=0 region is the full two-site state") {
  auto spec = LatticeSpec::obc(2, 1.0, 1, 0);
  auto rc = extract_regions<double>(vacuum_cm<double>(spec), spec);
  auto checks = check_region<double>(rc);
  CHECK(checks.ab_symmetric(1e-13));
  CHECK(checks.field_property(1e-13));
  // symmetric two-mode form: equal diagonals, phi-pi uncorrelated by layout
  CHECK(rc.sigma_phi(0, 0) == doctest::Approx(rc.sigma_phi(1, 1)));
}

TEST_CASE("region invariants hold across a (m, d, rtilde) sweep") {
  // N - (2d + rtilde) kept even so the regions can be centered exactly
  for (double m : {0.0, 0.3, 1.0}) {
    for (Index d : {1, 2, 5}) {
      for (Index rt : {0, 4, 12}) {
        auto spec = LatticeSpec::obc(60, m, d, rt);
        auto rc = extract_regions<double>(vacuum_cm<double>(spec), spec);
        auto checks = check_region<double>(rc);
        CHECK(checks.ab_symmetric(1e-11));
        CHECK(checks.field_property(1e-11));
        CHECK(is_physical<double>(rc.full(), 1e-9));
      }
    }
  }
}

TEST_CASE("off-center OBC geometry is reported as AB-asymmetric") {
  // N - span odd: exact centering impossible, boundary effects differ
  auto spec = LatticeSpec::obc(20, 0.0, 2, 3);
  auto rc = extract_regions<double>(vacuum_cm<double>(spec), spec);
  CHECK_FALSE(check_region<double>(rc).ab_symmetric(1e-13));
}

TEST_CASE("paper anchor: (m,d,rt)=(0,10,20) on 100 sites has N = 0.000635") {
  auto spec = LatticeSpec::obc(100, 0.0, 10, 20);
  auto rc = extract_regions<double>(vacuum_cm<double>(spec), spec);
  double neg = log_negativity<double>(rc.full(), 10);
  CHECK(neg == doctest::Approx(0.000635).epsilon(0.01));
}

TEST_CASE("infinite-volume correlators match a large OBC chain at its center") {
  double m = 1.0;
  auto table = infinite_vacuum_blocks<double>(m, 6, 1e-12);
  // OBC oracle: center-row entries of K^{+-1/2} for a long chain
  Index N = 4000;
  Index c = N / 2;
  for (Index r = 0; r <= 6; ++r) {
    double sphi = 0, spi = 0;
    for (Index k = 1; k <= N; ++k) {
      double lam = m * m + 4 * std::pow(std::sin(k * M_PI / (2.0 * (N + 1))), 2);
      double v = 2.0 / (N + 1) * std::sin(c * k * M_PI / (N + 1)) *
                 std::sin((c + r) * k * M_PI / (N + 1));
      sphi += v / std::sqrt(lam);
      spi += v * std::sqrt(lam);
    }
    auto [p, q] = table.at(r);
    CHECK(std::abs(p - sphi) < 1e-6);
    CHECK(std::abs(q - spi) < 1e-6);
  }
}

TEST_CASE("decoupled-oscillator limit at large mass") {
  double m = 2000.0;
  auto table = infinite_vacuum_blocks<double>(m, 2, 1e-13);
  auto [p0, q0] = table.at(0);
  CHECK(p0 == doctest::Approx(1.0 / m).epsilon(1e-6));
  CHECK(q0 == doctest::Approx(m).epsilon(1e-6));
  auto [p1, q1] = table.at(1);
  CHECK(std::abs(p1) < 1e-3 / m);
  CHECK(std::abs(q1) < 2e-3 * m);
}

TEST_CASE("regulator-mass guard") {
  CHECK_THROWS_AS(infinite_vacuum_blocks<double>(1e-31, 2, 1e-10), MassTooSmall);
}

TEST_CASE("infinite-volume massless regulator regions are physical") {
  auto spec = LatticeSpec::infinite(1e-10, 2, 2);
  auto rc = region_cm<BigFloat>(spec);
  auto checks = check_region<BigFloat>(rc);
  CHECK(checks.ab_symmetric(BigFloat("1e-30")));
  CHECK(checks.field_property(BigFloat("1e-30")));
  CHECK(is_physical<BigFloat>(rc.full(), BigFloat("1e-30")));
}

TEST_CASE("paper anchor: (m,d,rt)=(1,2,2) infinite volume is separable") {
  auto spec = LatticeSpec::infinite(1.0, 2, 2);
  auto rc = region_cm<double>(spec, 1e-13);
  CHECK(log_negativity<double>(rc.full(), 2) < 1e-10);
}
