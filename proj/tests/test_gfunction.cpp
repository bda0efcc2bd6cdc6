#include <doctest.h>

#include "oracles.hpp"
#include "ptqrm/errors.hpp"
#include "ptqrm/gfunction.hpp"

#include <algorithm>

using namespace ptqrm;

namespace {

ModelParams params(double delta, double eps, double g, BiasKind bias = BiasKind::imaginary) {
  ModelParams p;
  p.delta = delta;
  p.epsilon = eps;
  p.g = g;
  p.bias = bias;
  return p;
}

TruncationConfig cutoff(int n) {
  TruncationConfig t;
  t.n_fock = n;
  return t;
}

std::vector<double> real_eigenvalues(const ModelParams& p, double lo, double hi) {
  std::vector<double> out;
  for (const auto& e : diagonalize(p, cutoff(60)).pairs) {
    if (std::abs(e.energy.imag()) < 1e-9 && e.energy.real() > lo && e.energy.real() < hi) {
      out.push_back(e.energy.real());
    }
  }
  return out;
}

}  // namespace

TEST_CASE("series seeds and the delta = 0 limit") {
  const TruncationConfig t;
  const CoefficientTables c = coefficient_tables(cplx(0.3, 0.05), params(0.5, 0.2, 0.25), t);
  CHECK(c.f[0] == cplx(1.0, 0.0));
  CHECK(c.c[0] == cplx(1.0, 0.0));
  CHECK(c.n_used > 5);
  CHECK(c.n_used < t.n_series);

  const SeriesBranch b = series_plus(cplx(0.3, 0.0), params(0.0, 0.2, 0.25), t);
  for (const auto& e : b.upper) CHECK(std::abs(e) == 0.0);
  CHECK(std::abs(b.lower[0] - 1.0) < 1e-15);
}

TEST_CASE("coefficients are conjugate between branches for real energy") {
  const ModelParams p = params(0.5, 0.2, 0.25);
  for (double E : {-0.2, 0.1, 0.7, 1.9}) {
    const SeriesBranch plus = series_plus(E, p, {});
    const SeriesBranch minus = series_minus(E, p, {});
    const std::size_t n = std::min(plus.upper.size(), minus.upper.size());
    REQUIRE(n > 5);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(std::abs(plus.upper[k] - std::conj(minus.upper[k])) < 1e-13);
      CHECK(std::abs(plus.lower[k] - std::conj(minus.lower[k])) < 1e-13);
    }
  }
}

TEST_CASE("without bias both branches coincide") {
  const ModelParams p = params(0.5, 0.0, 0.4);
  const cplx E(0.8, 0.1);
  const SeriesBranch plus = series_plus(E, p, {});
  const SeriesBranch minus = series_minus(E, p, {});
  REQUIRE(plus.upper.size() == minus.upper.size());
  for (std::size_t k = 0; k < plus.upper.size(); ++k) {
    CHECK(std::abs(plus.upper[k] - minus.upper[k]) < 1e-15);
    CHECK(std::abs(plus.lower[k] - minus.lower[k]) < 1e-15);
  }
}

TEST_CASE("series converges for small coupling") {
  for (double g : {1e-3, 0.05, 0.5, 1.5}) {
    const SeriesBranch b = series_plus(cplx(0.37, 0.0), params(0.5, 0.2, g), {});
    CHECK(b.n_used < 80);
    CHECK(std::isfinite(std::abs(b.lower_sum)));
    // Weighted terms can rise before decaying once g is of order one.
    if (g <= 0.05) {
      for (std::size_t k = 0; k < b.lower.size(); ++k) CHECK(std::abs(b.lower[k]) <= 1.0 + 1e-12);
    }
    CHECK(std::abs(b.lower.back()) < 1e-12);
  }
}

TEST_CASE("weighted tail decays") {
  const SeriesBranch b = series_minus(cplx(0.8, 0.0), params(0.5, 0.2, 0.6), {});
  const std::size_t n = b.lower.size();
  REQUIRE(n > 12);
  CHECK(std::abs(b.lower[n - 1]) < std::abs(b.lower[n - 10]));
  CHECK(b.tail < 1e-12);
}

TEST_CASE("pole denominator") {
  const ModelParams p = params(0.5, 0.2, 0.25);
  const cplx pole(1.0 - 0.0625, 0.1);
  CHECK_THROWS_AS(series_plus(pole, p, {}), PoleDenominator);
  CHECK_NOTHROW(series_plus(pole + 0.01, p, {}));
}

TEST_CASE("series cap") {
  TruncationConfig t;
  t.n_series = 10;
  CHECK_THROWS_AS(series_plus(cplx(0.3, 0.0), params(0.5, 0.2, 0.8), t), SeriesNotConverged);
}

TEST_CASE("ED eigenvalues are zeros of G and nearby points are not") {
  const ModelParams p = params(0.5, 0.2, 0.25);
  for (const auto& e : diagonalize(p, cutoff(60)).pairs) {
    if (e.energy.real() > 4.5) break;
    CHECK(std::abs(g_complex(e.energy, p, {})) < 1e-8);
    CHECK(std::abs(g_complex(e.energy + 0.1, p, {})) > 1e-3);
    CHECK(std::abs(g_complex(e.energy + cplx(0.0, 0.1), p, {})) > 1e-3);
  }
}

TEST_CASE("hermitian G is real on the real axis") {
  const ModelParams p = params(0.5, 0.0, 0.4);
  for (double E : {-0.1, 0.45, 1.3, 2.2}) {
    const cplx G = g_complex(E, p, {});
    CHECK(std::abs(G.imag()) < 1e-12 * std::max(1.0, std::abs(G)));
  }
}

TEST_CASE("real G function equals the sum form") {
  const ModelParams p = params(0.5, 0.2, 0.4);
  for (double E : {-0.3, 0.2, 0.9}) {
    const SeriesBranch b = series_plus(E, p, {});
    const double ref = std::norm(b.upper_sum) - std::norm(b.lower_sum);
    CHECK(g_real(E, p, {}) == doctest::Approx(ref).epsilon(1e-12));
    const GEvaluation ev = evaluate_g(E, p, {});
    REQUIRE(ev.g_real.has_value());
    CHECK(*ev.g_real == doctest::Approx(ref).epsilon(1e-12));
  }
  CHECK_FALSE(evaluate_g(cplx(0.2, 0.01), p, {}).g_real.has_value());
}

TEST_CASE("G derivative matches a finite difference of G") {
  const ModelParams p = params(0.5, 0.2, 0.3);
  const cplx E(0.6, 0.05);
  const double h = 1e-5;
  const cplx fd = (g_complex(E + h, p, {}) - g_complex(E - h, p, {})) / (2.0 * h);
  CHECK(std::abs(g_derivative(E, p, {}) - fd) < 1e-6 * std::max(1.0, std::abs(fd)));
}

TEST_CASE("complex zero scan recovers the ED spectrum") {
  const ModelParams p = params(0.5, 0.2, 0.25);
  const EnergyRegion region;
  const ZeroScanResult r = find_zeros_complex(region, p, {});
  std::vector<cplx> ed;
  for (const auto& e : diagonalize(p, cutoff(60)).pairs) {
    if (e.energy.real() >= region.re_min && e.energy.real() <= region.re_max) ed.push_back(e.energy);
  }
  CHECK(r.zeros.size() == ed.size());
  for (const auto& z : r.zeros) {
    Eigen::VectorXcd v = Eigen::Map<Eigen::VectorXcd>(ed.data(), static_cast<Eigen::Index>(ed.size()));
    CHECK(oracle::nearest(z, v) < 1e-6);
  }
}

TEST_CASE("zero scan below the ground state is empty") {
  EnergyRegion region;
  region.re_min = -3.0;
  region.re_max = -1.0;
  ZeroScanOptions opts;
  opts.n_re = 60;
  opts.n_im = 30;
  CHECK(find_zeros_complex(region, params(0.5, 0.2, 0.25), {}, opts).zeros.empty());
}

TEST_CASE("broken-phase zeros come in conjugate pairs") {
  const ModelParams p = params(0.5, 0.2, 0.8);
  EnergyRegion region;
  region.re_min = -1.0;
  region.re_max = 1.0;
  region.im_min = -0.3;
  region.im_max = 0.3;
  ZeroScanOptions opts;
  opts.n_re = 120;
  opts.n_im = 80;
  opts.keep_grid = true;
  const ZeroScanResult r = find_zeros_complex(region, p, {}, opts);
  CHECK(r.log_abs_g2.rows() == 80);
  CHECK(r.log_abs_g2.cols() == 120);
  int complex_zeros = 0;
  for (const auto& z : r.zeros) {
    if (std::abs(z.imag()) < 1e-8) continue;
    ++complex_zeros;
    const bool paired = std::any_of(r.zeros.begin(), r.zeros.end(),
                                    [&](cplx w) { return std::abs(w - std::conj(z)) < 1e-6; });
    CHECK(paired);
  }
  CHECK(complex_zeros >= 2);
}

TEST_CASE("real zeros match the real ED eigenvalues") {
  SUBCASE("unbroken phase") {
    const ModelParams p = params(0.5, 0.2, 0.1);
    const auto zeros = find_zeros_real(-0.5, 2.5, p, {});
    const auto ed = real_eigenvalues(p, -0.5, 2.5);
    REQUIRE(zeros.size() == ed.size());
    for (std::size_t i = 0; i < ed.size(); ++i) CHECK(std::abs(zeros[i].E - ed[i]) < 1e-8);
  }
  SUBCASE("hermitian limit") {
    const ModelParams p = params(0.5, 0.0, 0.6);
    const auto zeros = find_zeros_real(-0.8, 3.0, p, {});
    const auto ed = real_eigenvalues(p, -0.8, 3.0);
    REQUIRE(zeros.size() == ed.size());
    for (std::size_t i = 0; i < ed.size(); ++i) CHECK(std::abs(zeros[i].E - ed[i]) < 1e-8);
  }
  SUBCASE("merged pair has no real zero") {
    const ModelParams p = params(0.5, 0.2, 0.7);
    const Eigensystem es = diagonalize(p, cutoff(60));
    const double centre = es.pairs[0].energy.real();
    REQUIRE(std::abs(es.pairs[0].energy.imag()) > 1e-4);
    for (const auto& z : find_zeros_real(-0.5, 2.5, p, {})) CHECK(std::abs(z.E - centre) > 0.05);
  }
}

TEST_CASE("exceptional points of the ground pair") {
  const ModelParams p = params(0.5, 0.2, 0.0);
  EpSearch s;
  s.hi = 1.2;
  const EPLocation a = locate_ep(p, s);
  CHECK(std::abs(a.control - 0.6828) < 5e-4);
  CHECK(a.residual_g < 1e-9);
  CHECK(a.residual_dg < 1e-9);

  ModelParams q = p;
  q.epsilon = 0.4;
  const EPLocation b = locate_ep(q, s);
  CHECK(std::abs(b.control - 0.3358) < 5e-4);

  CHECK(aa_ground_ep_coupling(0.5, 0.2) == doctest::Approx(std::sqrt(std::log(2.5) / 2.0)).epsilon(1e-14));
  CHECK(std::abs(aa_ground_ep_coupling(0.5, 0.2) - 0.67687) < 1e-5);
  CHECK(std::abs(aa_ground_ep_coupling(0.5, 0.2) - a.control) < 0.01);

  SUBCASE("tangent real zero at the located coupling") {
    ModelParams at = p;
    at.g = a.control;
    const auto zeros = find_zeros_real(a.E_ep - 0.2, a.E_ep + 0.2, at, {});
    const bool tangent = std::any_of(zeros.begin(), zeros.end(), [&](const RealZero& z) {
      return z.multiplicity == 2 && std::abs(z.E - a.E_ep) < 1e-4;
    });
    CHECK(tangent);
  }
  SUBCASE("bias as the control") {
    ModelParams r = params(0.5, 0.0, 0.5);
    EpSearch e;
    e.control = EpControl::epsilon;
    e.hi = 0.5;
    const EPLocation c = locate_ep(r, e);
    CHECK(c.control > 0.0);
    CHECK(c.control < 0.5);
    CHECK(c.residual_g < 1e-9);
    r.epsilon = c.control * 0.999;
    CHECK(std::abs(diagonalize(r, cutoff(50)).pairs[0].energy.imag()) < 1e-8);
    r.epsilon = c.control * 1.001;
    CHECK(std::abs(diagonalize(r, cutoff(50)).pairs[0].energy.imag()) > 1e-6);
  }
  SUBCASE("no merger inside the bracket") {
    EpSearch e;
    e.hi = 0.3;
    CHECK_THROWS_AS(locate_ep(p, e), NoBracket);
  }
}
