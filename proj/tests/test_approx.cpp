#include <doctest.h>

#include "oracles.hpp"
#include "ptqrm/approx.hpp"
#include "ptqrm/errors.hpp"

#include <algorithm>

using namespace ptqrm;

namespace {

ModelParams params(double delta, double eps, double g) {
  ModelParams p;
  p.delta = delta;
  p.epsilon = eps;
  p.g = g;
  return p;
}

TruncationConfig cutoff(int n) {
  TruncationConfig t;
  t.n_fock = n;
  return t;
}

double residual(const Eigen::MatrixXcd& H, const Eigen::VectorXcd& psi, cplx E) {
  return (H * psi - E * psi).norm() / psi.norm();
}

// Roots of the AA 2x2 block by a plain eigensolve.
std::pair<cplx, cplx> aa_block_roots(int m, const ModelParams& p) {
  const double D = overlap_D(m, m, p.delta, p.g);
  Eigen::Matrix2cd B;
  const cplx b = p.bias_amplitude();
  B << m - p.g * p.g + b / 2.0, -D, -D, m - p.g * p.g - b / 2.0;
  Eigen::ComplexEigenSolver<Eigen::Matrix2cd> es(B);
  cplx a = es.eigenvalues()(0), c = es.eigenvalues()(1);
  if (a.real() > c.real() || (a.real() == c.real() && a.imag() > c.imag())) std::swap(a, c);
  return {a, c};
}

}  // namespace

TEST_CASE("laguerre polynomials") {
  CHECK(laguerre_assoc(0, 3, 1.7) == 1.0);
  CHECK(laguerre_assoc(1, 0, 0.16) == doctest::Approx(0.84).epsilon(1e-15));
  CHECK(laguerre_assoc(2, 0, 0.16) == doctest::Approx(0.6928).epsilon(1e-14));
  for (int m = 0; m <= 12; ++m) {
    for (int a : {0, 1, 3, 7}) {
      for (double x : {0.0, 0.16, 1.0, 2.5, 6.0}) {
        double scale = 0.0;
        const double ref = oracle::laguerre_sum(m, a, x, &scale);
        CHECK(std::abs(laguerre_assoc(m, a, x) - ref) < 1e-13 * std::max(1.0, scale));
      }
    }
  }
}

TEST_CASE("overlap closed forms") {
  CHECK(overlap_D(0, 0, 0.5, 0.25) == doctest::Approx(0.25 * std::exp(-0.125)).epsilon(1e-14));
  CHECK(std::abs(overlap_D(0, 0, 0.5, 0.25) - 0.220619) < 2e-5);
  CHECK(overlap_D(0, 1, 1.0, 0.2) == doctest::Approx(0.2 * std::exp(-0.08)).epsilon(1e-14));
  CHECK(std::abs(overlap_D(0, 1, 1.0, 0.2) - 0.184625) < 2e-5);
  for (int m = 0; m < 5; ++m) {
    for (int n = 0; n < 5; ++n) CHECK(overlap_D(m, n, 0.8, 0.0) == doctest::Approx(m == n ? 0.4 : 0.0));
  }
  CHECK(std::isfinite(overlap_D(150, 170, 1.0, 1.2)));
  const OverlapTable t = overlap_table(6, 1.0, 0.7);
  CHECK(t.D.rows() == 7);
  CHECK((t.D - t.D.transpose()).norm() == 0.0);
  CHECK(t.D(0, 0) > 0.0);
  // L_m(4 g^2) changes sign, so D_mm > 0 holds for every m only at weak coupling.
  const OverlapTable weak = overlap_table(6, 1.0, 0.1);
  for (int m = 0; m <= 6; ++m) CHECK(weak.D(m, m) > 0.0);
  CHECK(manifold_coupling(1, 3, 1.0, 0.7) == doctest::Approx(-overlap_D(1, 3, 1.0, 0.7)));
  CHECK(manifold_coupling(2, 3, 1.0, 0.7) == doctest::Approx(overlap_D(2, 3, 1.0, 0.7)));
}

TEST_CASE("overlap equals the displaced-state inner product") {
  const double delta = 1.0;
  for (double g : {0.2, 0.6, 1.1}) {
    for (int m = 0; m <= 4; ++m) {
      for (int n = 0; n <= 4; ++n) {
        const double inner = oracle::displaced_fock(g, m, 80).dot(oracle::displaced_fock(-g, n, 80));
        CHECK(std::abs(std::abs(inner) * delta / 2.0 - std::abs(overlap_D(m, n, delta, g))) < 1e-10);
      }
    }
  }
}

TEST_CASE("displaced number states") {
  const double g = 0.7;
  const Eigen::MatrixXd plus = displaced_number_states(g, +1, 5, 50);
  const Eigen::MatrixXd minus = displaced_number_states(g, -1, 5, 50);
  for (int n = 0; n <= 5; ++n) {
    CHECK((plus.col(n) - oracle::displaced_fock(-g, n, 50)).norm() < 1e-10);
    CHECK((minus.col(n) - oracle::displaced_fock(g, n, 50)).norm() < 1e-10);
  }
  CHECK(((plus.transpose() * plus) - Eigen::MatrixXd::Identity(6, 6)).norm() < 1e-10);
  CHECK_THROWS_AS(displaced_number_states(2.5, +1, 3, 10), TruncationTail);
  const Eigen::MatrixXd bare = displaced_number_states(0.0, +1, 3, 8);
  CHECK((bare - Eigen::MatrixXd::Identity(9, 4)).norm() < 1e-15);
}

TEST_CASE("adiabatic pair") {
  SUBCASE("worked example") {
    const auto [lo, hi] = aa_energies(0, params(0.5, 0.2, 0.25));
    const double D = 0.25 * std::exp(-0.125);
    const double r = 0.5 * std::sqrt(4.0 * D * D - 0.04);
    CHECK(std::abs(lo - cplx(-0.0625 - r, 0.0)) < 1e-14);
    CHECK(std::abs(hi - cplx(-0.0625 + r, 0.0)) < 1e-14);
    CHECK(std::abs(lo.real() + 0.259148) < 2e-5);
    CHECK(std::abs(hi.real() - 0.134148) < 2e-5);
  }
  SUBCASE("decoupled limit") {
    for (int m = 0; m < 4; ++m) {
      const auto [lo, hi] = aa_energies(m, params(0.5, 0.3, 0.0));
      const cplx r = 0.5 * std::sqrt(cplx(0.25 - 0.09, 0.0));
      CHECK(std::abs(lo - (double(m) - r)) < 1e-14);
      CHECK(std::abs(hi - (double(m) + r)) < 1e-14);
    }
  }
  SUBCASE("matches the 2x2 block") {
    for (int m = 0; m <= 5; ++m) {
      for (double g : {0.0, 0.4, 0.9, 1.5}) {
        for (double eps : {0.0, 0.1, 0.5, 1.2}) {
          const ModelParams p = params(1.0, eps, g);
          const ApproxPair ap = aa_pair(m, p);
          const auto [a, b] = aa_block_roots(m, p);
          const bool broken = eps > 2.0 * std::abs(overlap_D(m, m, 1.0, g));
          if (broken) {
            CHECK(std::abs(ap.plus.energy - std::conj(ap.minus.energy)) < 1e-14);
            CHECK(std::abs(ap.plus.energy.imag()) > 0.0);
          } else {
            CHECK(std::abs(ap.plus.energy.imag()) == 0.0);
            CHECK(std::abs(ap.minus.energy.imag()) == 0.0);
          }
          const bool direct = std::abs(ap.plus.energy - a) < 1e-12 && std::abs(ap.minus.energy - b) < 1e-12;
          const bool swapped = std::abs(ap.plus.energy - b) < 1e-12 && std::abs(ap.minus.energy - a) < 1e-12;
          CHECK((direct || swapped));
        }
      }
    }
  }
  SUBCASE("coalescence at the phase boundary") {
    const double g = 0.4;
    const double eps = 2.0 * overlap_D(1, 1, 1.0, g);
    const ApproxPair ap = aa_pair(1, params(1.0, eps, g));
    CHECK(ap.plus.ep_degenerate);
    CHECK(ap.minus.ep_degenerate);
    CHECK(std::abs(ap.plus.energy - (1.0 - g * g)) < 1e-7);
    CHECK(std::abs(ap.plus.energy - ap.minus.energy) < 1e-7);
    const Eigen::VectorXcd a = state_to_fock(ap.plus, params(1.0, eps, g), 40);
    const Eigen::VectorXcd b = state_to_fock(ap.minus, params(1.0, eps, g), 40);
    CHECK(std::abs(a.dot(b)) > 1.0 - 1e-6);
  }
}

TEST_CASE("approximate states on the Fock basis") {
  SUBCASE("unit norm") {
    for (double g : {0.0, 0.3, 1.0}) {
      const ModelParams p = params(1.0, 0.3, g);
      for (int m = 0; m < 4; ++m) {
        const ApproxPair ap = aa_pair(m, p);
        CHECK(std::abs(state_to_fock(ap.plus, p, 50).norm() - 1.0) < 1e-10);
        const ApproxPair cp = caa_pair(m, p);
        CHECK(std::abs(state_to_fock(cp.minus, p, 50).norm() - 1.0) < 1e-10);
      }
    }
  }
  SUBCASE("bare states at zero coupling") {
    const ModelParams p = params(0.5, 0.2, 0.0);
    const Eigen::VectorXcd psi = state_to_fock(aa_pair(2, p).plus, p, 10);
    for (int i = 0; i < psi.size(); ++i) {
      if (i != basis_index(0, 2, 10) && i != basis_index(1, 2, 10)) CHECK(std::abs(psi(i)) < 1e-15);
    }
    const Eigen::MatrixXcd H = build_hamiltonian(p, cutoff(10));
    CHECK(residual(H, psi, aa_pair(2, p).plus.energy) < 1e-12);
  }
  SUBCASE("AA ground state overlaps the exact ground state") {
    const ModelParams p = params(1.0, 0.1, 0.2);
    const Eigen::VectorXcd psi = state_to_fock(aa_pair(0, p).plus, p, 40);
    const Eigensystem es = diagonalize(p, cutoff(40));
    CHECK(std::abs(es.pairs[0].right.dot(psi)) > 0.99);
  }
}

TEST_CASE("corrected adiabatic block") {
  const ModelParams p = params(1.0, 0.1, 0.5);
  const CaaBlock b0 = caa_block(0, p);
  const CaaBlock b2 = caa_block(2, p);
  CHECK(b0.matrix.rows() == 4);
  CHECK(b2.matrix.rows() == 6);
  CHECK(b2.manifolds == std::vector<int>{1, 2, 3});
  CHECK((b2.matrix - b2.matrix.transpose()).norm() == 0.0);
  const Eigen::VectorXcd roots = caa_roots(b2);
  for (Eigen::Index i = 0; i < roots.size(); ++i) {
    const Eigen::MatrixXcd shifted = b2.matrix - roots(i) * Eigen::MatrixXcd::Identity(6, 6);
    CHECK(std::abs(shifted.determinant()) < 1e-12);
  }
}

TEST_CASE("root selection agrees with the positional rule") {
  for (double g = 0.0; g <= 1.5 + 1e-12; g += 0.05) {
    const ModelParams p = params(1.0, 0.1, g);
    const ApproxPair c2 = caa_pair(2, p);
    const Eigen::VectorXcd r2 = caa_roots(caa_block(2, p));
    const std::vector<cplx> picked = {c2.plus.energy, c2.minus.energy};
    const std::vector<cplx> positional = {r2(2), r2(3)};
    for (const auto& z : picked) {
      CHECK(std::any_of(positional.begin(), positional.end(), [&](cplx w) { return std::abs(z - w) < 1e-12; }));
    }
    const ApproxPair c0 = caa_pair(0, p);
    const Eigen::VectorXcd r0 = caa_roots(caa_block(0, p));
    CHECK(std::min(std::abs(c0.plus.energy - r0(0)), std::abs(c0.plus.energy - r0(1))) < 1e-12);
    CHECK(std::min(std::abs(c0.minus.energy - r0(0)), std::abs(c0.minus.energy - r0(1))) < 1e-12);
  }
}

TEST_CASE("CAA reduces to AA without coupling") {
  for (int m = 0; m < 4; ++m) {
    for (double eps : {0.1, 0.5}) {
      const ApproxPair a = aa_pair(m, params(1.0, eps, 0.0));
      const ApproxPair c = caa_pair(m, params(1.0, eps, 0.0));
      CHECK(std::abs(a.plus.energy - c.plus.energy) < 1e-14);
      CHECK(std::abs(a.minus.energy - c.minus.energy) < 1e-14);
      double prev = 0.0;
      for (double g : {1e-3, 5e-4, 2.5e-4}) {
        const double d = std::abs(aa_pair(m, params(1.0, eps, g)).plus.energy -
                                  caa_pair(m, params(1.0, eps, g)).plus.energy);
        if (prev > 1e-13) CHECK(d / prev == doctest::Approx(0.25).epsilon(0.02));
        prev = d;
      }
      const double tiny = std::abs(aa_pair(m, params(1.0, eps, 1e-6)).minus.energy -
                                   caa_pair(m, params(1.0, eps, 1e-6)).minus.energy);
      CHECK(tiny < 1e-8);
    }
  }
}

TEST_CASE("CAA residual is below the AA residual") {
  const int n_fock = 60;
  for (double eps : {0.1, 0.5}) {
    for (double g = 0.1; g <= 1.5 + 1e-12; g += 0.1) {
      const ModelParams p = params(1.0, eps, g);
      const Eigen::MatrixXcd H = build_hamiltonian(p, cutoff(n_fock));
      for (int m = 0; m <= 3; ++m) {
        const ApproxPair a = aa_pair(m, p);
        const ApproxPair c = caa_pair(m, p);
        for (bool plus : {true, false}) {
          const ApproxState& as = plus ? a.plus : a.minus;
          const ApproxState& cs = plus ? c.plus : c.minus;
          const double ra = residual(H, state_to_fock(as, p, n_fock), as.energy);
          const double rc = residual(H, state_to_fock(cs, p, n_fock), cs.energy);
          CAPTURE(eps);
          CAPTURE(g);
          CAPTURE(m);
          CHECK(rc < ra);
        }
      }
    }
  }
}
