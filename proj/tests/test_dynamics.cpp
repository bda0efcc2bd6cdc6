#include <doctest.h>

#include "oracles.hpp"
#include "ptqrm/dynamics.hpp"
#include "ptqrm/errors.hpp"

#include <algorithm>
#include <numeric>

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

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("time grid") {
  const auto t = time_grid(1.0, 0.25);
  REQUIRE(t.size() == 5);
  CHECK(t.front() == 0.0);
  CHECK(t.back() == doctest::Approx(1.0));
  CHECK(time_grid(200.0, 0.01).size() == 20001);
}

TEST_CASE("sigma_z expectation") {
  const int nf = 4;
  Eigen::VectorXcd up = Eigen::VectorXcd::Zero(basis_dim(nf));
  up(basis_index(0, 2, nf)) = 1.0;
  Eigen::VectorXcd down = Eigen::VectorXcd::Zero(basis_dim(nf));
  down(basis_index(1, 0, nf)) = cplx(0.0, 3.0);
  CHECK(sigma_z_expectation(up) == doctest::Approx(1.0));
  CHECK(sigma_z_expectation(down) == doctest::Approx(-1.0));
  CHECK(std::abs(sigma_z_expectation(up + cplx(0.0, 1.0) / 3.0 * down)) < 1e-15);
  CHECK(qubit_population(1.0) == 1.0);
  CHECK(qubit_population(-1.0) == 0.0);
  CHECK(upper_vacuum_state(nf) == Eigen::VectorXcd::Unit(basis_dim(nf), basis_index(0, 0, nf)));
}

TEST_CASE("hermitian evolution conserves the norm") {
  const ModelParams p = params(1.0, 0.0, 0.4);
  const auto times = time_grid(200.0, 0.5);
  const DynamicsTrace tr = evolve(p, cutoff(40), upper_vacuum_state(40), times);
  CHECK(tr.method == EvolutionMethod::spectral);
  CHECK(tr.sigma_z.front() == doctest::Approx(1.0));
  double worst = 0.0;
  for (double n : tr.norm()) worst = std::max(worst, std::abs(n - 1.0));
  CHECK(worst < 1e-8);
}

TEST_CASE("spectral evolution matches direct integration and an RK4 oracle") {
  const ModelParams p = params(1.0, 0.1, 0.2);
  const int nf = 30;
  const auto times = time_grid(20.0, 0.1);
  const Eigen::VectorXcd psi0 = upper_vacuum_state(nf);
  const DynamicsTrace spectral = evolve(p, cutoff(nf), psi0, times);
  const DynamicsTrace direct = evolve_direct(build_hamiltonian_sparse(p, cutoff(nf)), psi0, times);
  CHECK(direct.method == EvolutionMethod::direct);
  CHECK(sup_diff(spectral.sigma_z, direct.sigma_z) < 1e-6);
  const auto rk4 = oracle::rk4_sigma_z(build_hamiltonian(p, cutoff(nf)), psi0, 0.1, static_cast<int>(times.size()), 40);
  CHECK(sup_diff(spectral.sigma_z, rk4) < 1e-7);
  for (std::size_t i = 0; i < times.size(); ++i) {
    CHECK(std::abs(spectral.log_norm[i] - direct.log_norm[i]) < 1e-6);
  }
}

TEST_CASE("broken-phase norm grows without overflow") {
  const ModelParams p = params(1.0, 0.5, 1.25);
  const auto times = time_grid(400.0, 1.0);
  const DynamicsTrace tr = evolve(p, cutoff(40), upper_vacuum_state(40), times);
  CHECK(std::isfinite(tr.log_norm.back()));
  CHECK(tr.log_norm.back() > 1.0);
  for (double s : tr.sigma_z) {
    CHECK(s <= 1.0 + 1e-12);
    CHECK(s >= -1.0 - 1e-12);
  }
}

TEST_CASE("ill-conditioned basis falls back to direct integration") {
  const ModelParams p = params(0.5, 0.2, 0.3);
  EvolveOptions opts;
  opts.cond_limit = 1.0;
  const DynamicsTrace tr = evolve(p, cutoff(20), upper_vacuum_state(20), time_grid(5.0, 0.5), opts);
  CHECK(tr.method == EvolutionMethod::direct);
  CHECK(tr.fallback);
}

TEST_CASE("deep strong coupling keeps the qubit in the upper half") {
  const ModelParams p = params(1.0, 0.1, 1.25);
  const DynamicsTrace tr = evolve(p, cutoff(60), upper_vacuum_state(60), time_grid(200.0, 0.05));
  CHECK(*std::min_element(tr.sigma_z.begin(), tr.sigma_z.end()) > 0.0);
}

TEST_CASE("approximate spectral bases") {
  const ModelParams p = params(1.0, 0.1, 0.2);
  const SpectralBasis aa = approx_basis(ApproxMethod::aa, p, 30, 6);
  CHECK(aa.energies.size() == 12);
  CHECK(aa.source == "aa");
  CHECK((aa.duals.adjoint() * aa.modes).diagonal().isOnes(1e-10));
  const SpectralBasis ed = basis_from_eigensystem(diagonalize(p, cutoff(30)));
  CHECK(ed.source == "ed");
  const Eigen::MatrixXcd gram = ed.duals.adjoint() * ed.modes;
  CHECK((gram - Eigen::MatrixXcd::Identity(gram.rows(), gram.cols())).norm() < 1e-8);
}

TEST_CASE("emission spectrum calibration") {
  const double dt = 0.01;
  const auto t = time_grid(200.0, dt);
  SUBCASE("constant signal vanishes after detrending") {
    const std::vector<double> x(t.size(), 0.7);
    const EmissionSpectrum s = emission_spectrum(x, dt);
    CHECK(s.bin_width() == doctest::Approx(1.0 / (t.size() * dt)));
    for (std::size_t i = 1; i < s.freqs.size(); ++i) CHECK(s.magnitude[i] < 1e-9);
    CHECK(find_peaks(s, 1e-6).peaks.empty());
  }
  SUBCASE("pure cosine lands within one bin") {
    for (double nu0 : {0.0317, 0.125, 0.4}) {
      std::vector<double> x;
      for (double ti : t) x.push_back(0.3 * std::cos(2.0 * M_PI * nu0 * ti));
      for (Window w : {Window::hann, Window::none}) {
        EmissionOptions o;
        o.window = w;
        const EmissionSpectrum s = emission_spectrum(x, dt, o);
        const PeakSet ps = dominant_peaks(s);
        REQUIRE(ps.peaks.size() == 1);
        CHECK(std::abs(ps.peaks[0].position - nu0) < s.bin_width());
        CHECK(ps.peaks[0].height == doctest::Approx(s.line_height(0.3)).epsilon(0.02));
        CHECK(ps.peaks[0].fwhm == doctest::Approx(s.resolution_fwhm).epsilon(0.1));
      }
      std::vector<double> raw = x;
      EmissionOptions o;
      o.window = Window::none;
      o.detrend = false;
      o.zero_pad = 1;
      const EmissionSpectrum s = emission_spectrum(raw, dt, o);
      for (std::size_t i = 0; i < s.freqs.size(); i += 97) {
        CHECK(std::abs(s.magnitude[i] - oracle::dft_magnitude(raw, dt, s.freqs[i])) < 1e-9);
      }
    }
  }
  SUBCASE("raw spectrum keeps the mean") {
    std::vector<double> x;
    for (double ti : t) x.push_back(0.5 + 0.2 * std::cos(2.0 * M_PI * 0.2 * ti));
    const EmissionSpectrum s = emission_spectrum(x, dt);
    CHECK(s.raw_magnitude[0] > 10.0 * s.magnitude[0]);
  }
  SUBCASE("nothing above a high floor") {
    std::vector<double> x;
    for (double ti : t) x.push_back(0.01 * std::sin(2.0 * M_PI * 0.3 * ti));
    CHECK(find_peaks(emission_spectrum(x, dt), 1e6).peaks.empty());
  }
}

TEST_CASE("halving the step leaves the spectrum unchanged") {
  const ModelParams p = params(1.0, 0.1, 0.2);
  const SpectralBasis b = approx_basis(ApproxMethod::caa, p, 30);
  auto peaks = [&](double dt) {
    const auto tr = evolve_spectral(b, upper_vacuum_state(30), time_grid(200.0, dt));
    return dominant_peaks(emission_spectrum(tr.sigma_z, dt));
  };
  const PeakSet a = peaks(0.02);
  const PeakSet c = peaks(0.01);
  REQUIRE(a.peaks.size() == c.peaks.size());
  for (std::size_t i = 0; i < a.peaks.size(); ++i) {
    CHECK(std::abs(a.peaks[i].position - c.peaks[i].position) < 1e-6);
    CHECK(a.peaks[i].height == doctest::Approx(c.peaks[i].height).epsilon(1e-3));
  }
}
