// Randomized invariant checks shared by the unit tests and the acceptance
// runner. Each check draws its own parameters from a seeded generator and
// returns the violation measure of one case; a case passes when the measure
// is below the tolerance.

#pragma once

#include "oracles.hpp"
#include "ptqrm/approx.hpp"
#include "ptqrm/dynamics.hpp"
#include "ptqrm/errors.hpp"
#include "ptqrm/gfunction.hpp"
#include "ptqrm/metrology.hpp"

#include <chrono>
#include <functional>
#include <string>

namespace props {

using ptqrm::cplx;

struct Report {
  std::string name;
  int cases = 0;
  int failures = 0;
  double worst = 0.0;         // largest violation measure
  double slowest = 0.0;       // seconds
  double tolerance = 0.0;
  bool ok() const { return cases > 0 && failures == 0 && slowest < 1.0; }
};

using Case = std::function<double(std::mt19937_64&)>;

inline Report run(const std::string& name, int cases, unsigned long long seed, double tol, const Case& body) {
  Report r;
  r.name = name;
  r.tolerance = tol;
  auto gen = oracle::rng(seed);
  for (int i = 0; i < cases; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const double v = body(gen);
    const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ++r.cases;
    r.slowest = std::max(r.slowest, dt);
    r.worst = std::max(r.worst, v);
    if (!(v < tol)) ++r.failures;
  }
  return r;
}

inline ptqrm::ModelParams draw_model(std::mt19937_64& gen) {
  ptqrm::ModelParams p;
  p.delta = oracle::uniform(gen, 0.1, 1.2);
  p.epsilon = oracle::uniform(gen, 0.0, 1.0);
  p.g = oracle::uniform(gen, 0.0, 1.2);
  return p;
}

// Redraws until the eigensystem is comfortably away from an exceptional point.
inline std::pair<ptqrm::ModelParams, ptqrm::Eigensystem> draw_regular(std::mt19937_64& gen, int& n_fock) {
  for (;;) {
    const ptqrm::ModelParams p = draw_model(gen);
    n_fock = static_cast<int>(oracle::uniform(gen, 8.0, 30.0));
    ptqrm::TruncationConfig t;
    t.n_fock = n_fock;
    try {
      ptqrm::Eigensystem es = ptqrm::diagonalize(p, t);
      if (es.cond < 1e5) return {p, std::move(es)};
    } catch (const ptqrm::DefectiveMatrix&) {
    }
  }
}

inline double biorthonormality(std::mt19937_64& gen) {
  int nf = 0;
  const auto [p, es] = draw_regular(gen, nf);
  const Eigen::MatrixXcd G = es.left_matrix().adjoint() * es.right_matrix();
  return (G - Eigen::MatrixXcd::Identity(G.rows(), G.cols())).cwiseAbs().maxCoeff();
}

inline double conjugation_closure(std::mt19937_64& gen) {
  int nf = 0;
  const auto [p, es] = draw_regular(gen, nf);
  const Eigen::VectorXcd E = es.energies();
  double worst = 0.0;
  int upper = 0, lower = 0;
  for (Eigen::Index i = 0; i < E.size(); ++i) {
    worst = std::max(worst, oracle::nearest(std::conj(E(i)), E));
    if (E(i).imag() > 1e-8) ++upper;
    if (E(i).imag() < -1e-8) ++lower;
  }
  return upper == lower ? worst : INFINITY;
}

inline double sigma_z_rescaling(std::mt19937_64& gen) {
  const ptqrm::ModelParams p = draw_model(gen);
  const int nf = static_cast<int>(oracle::uniform(gen, 6.0, 20.0));
  Eigen::VectorXcd psi(ptqrm::basis_dim(nf));
  for (Eigen::Index i = 0; i < psi.size(); ++i) {
    psi(i) = cplx(oracle::uniform(gen, -1.0, 1.0), oracle::uniform(gen, -1.0, 1.0));
  }
  const double c = std::exp(oracle::uniform(gen, -30.0, 30.0));
  double worst = std::abs(ptqrm::sigma_z_expectation(c * psi) - ptqrm::sigma_z_expectation(psi));

  ptqrm::TruncationConfig t;
  t.n_fock = nf;
  ptqrm::Eigensystem es;
  try {
    es = ptqrm::diagonalize(p, t);
  } catch (const ptqrm::DefectiveMatrix&) {
    return worst;
  }
  const ptqrm::SpectralBasis b = ptqrm::basis_from_eigensystem(es);
  const auto times = ptqrm::time_grid(5.0, 0.5);
  const auto a = ptqrm::evolve_spectral(b, psi, times);
  const auto s = ptqrm::evolve_spectral(b, c * psi, times);
  for (std::size_t k = 0; k < times.size(); ++k) {
    worst = std::max(worst, std::abs(a.sigma_z[k] - s.sigma_z[k]));
  }
  return worst;
}

inline double qfi_gauge(std::mt19937_64& gen) {
  const double delta = oracle::uniform(gen, 0.2, 1.0);
  const double g = oracle::uniform(gen, 0.0, 1.0);
  const double ep = delta * std::exp(-2.0 * g * g);
  const double eps = ep * oracle::uniform(gen, 0.05, 0.9);
  const double k = oracle::uniform(gen, -3.0, 3.0);
  const double phi0 = oracle::uniform(gen, 0.0, 6.283);
  ptqrm::ModelParams base;
  base.delta = delta;
  base.g = g;
  const ptqrm::StateProvider prov =
      ptqrm::aa_state_provider(base, ptqrm::QfiParameter::epsilon, 0, ptqrm::Branch::plus, 30);
  const ptqrm::StateProvider gauged = [&](double l) {
    return Eigen::VectorXcd(prov(l) * std::exp(cplx(0.0, l + k * l * l + phi0)));
  };
  const double a = ptqrm::qfi_numeric(prov, eps).value;
  const double b = ptqrm::qfi_numeric(gauged, eps).value;
  return std::abs(a - b) / std::max(1.0, a);
}

inline double overlap_symmetry(std::mt19937_64& gen) {
  const int m = static_cast<int>(oracle::uniform(gen, 0.0, 40.0));
  const int n = static_cast<int>(oracle::uniform(gen, 0.0, 40.0));
  const double delta = oracle::uniform(gen, 0.0, 2.0);
  const double g = oracle::uniform(gen, 0.0, 2.0);
  const double a = ptqrm::overlap_D(m, n, delta, g);
  const double b = ptqrm::overlap_D(n, m, delta, g);
  const int size = std::max(m, n);
  const Eigen::MatrixXd D = ptqrm::overlap_table(std::min(size, 12), delta, g).D;
  const double table = (D - D.transpose()).cwiseAbs().maxCoeff();
  return std::max(std::abs(a - b), table);
}

inline double g_conjugation(std::mt19937_64& gen) {
  const ptqrm::ModelParams p = draw_model(gen);
  const cplx E(oracle::uniform(gen, -1.0, 3.0), oracle::uniform(gen, -0.8, 0.8));
  try {
    const cplx a = ptqrm::g_complex(E, p, {});
    const cplx b = ptqrm::g_complex(std::conj(E), p, {});
    return std::abs(b - std::conj(a)) / std::max(1.0, std::abs(a));
  } catch (const ptqrm::PoleDenominator&) {
    return 0.0;
  }
}

}  // namespace props
