#pragma once

#include "ptqrm/approx.hpp"
#include "ptqrm/model.hpp"

#include <string>
#include <vector>

namespace ptqrm {

// Eigen-expansion of the propagator: psi(t) = sum_k c_k e^{-i E_k t} mode_k.
struct SpectralBasis {
  Eigen::VectorXcd energies;
  Eigen::MatrixXcd modes;    // columns in the model-core basis
  Eigen::MatrixXcd duals;    // columns d_k with c_k = d_k^H psi0
  double cond = 1.0;
  std::string source;        // "ed", "aa", "caa"
};

SpectralBasis basis_from_eigensystem(const Eigensystem& es);

// Approximate states of manifolds 0..n_manifolds-1, both branches. The
// model is complex symmetric, so each mode's dual is conj(mode)/(mode^T mode).
SpectralBasis basis_from_states(const std::vector<Eigen::VectorXcd>& states,
                                const std::vector<ComplexEnergy>& energies,
                                const std::string& source);

enum class ApproxMethod { aa, caa };

SpectralBasis approx_basis(ApproxMethod method, const ModelParams& params, int n_fock,
                           int n_manifolds = 2);

enum class EvolutionMethod { spectral, direct };

struct DynamicsTrace {
  std::vector<double> times;
  std::vector<double> sigma_z;
  std::vector<double> log_norm;  // ln ||psi(t)||
  EvolutionMethod method = EvolutionMethod::spectral;
  bool fallback = false;         // direct integration chosen because the basis was ill-conditioned

  std::vector<double> norm() const;  // exp(log_norm); may overflow to inf for long broken-phase runs
};

// Upper qubit level with the cavity in vacuum.
Eigen::VectorXcd upper_vacuum_state(int n_fock);

std::vector<double> time_grid(double t_total, double dt);

DynamicsTrace evolve_spectral(const SpectralBasis& basis, const Eigen::VectorXcd& initial,
                              const std::vector<double>& times);

struct DirectOptions {
  double abs_tol = 1e-11;
  double rel_tol = 1e-11;
};

// Adaptive Dormand-Prince integration of i dpsi/dt = H psi, renormalized at
// every output time.
DynamicsTrace evolve_direct(const Eigen::SparseMatrix<cplx>& H, const Eigen::VectorXcd& initial,
                            const std::vector<double>& times, const DirectOptions& opts = {});

struct EvolveOptions {
  double cond_limit = 1e10;
  DirectOptions direct;
};

// Spectral evolution on the exact eigensystem, direct integration when the
// eigenvector matrix is too ill-conditioned.
DynamicsTrace evolve(const ModelParams& params, const TruncationConfig& trunc,
                     const Eigen::VectorXcd& initial, const std::vector<double>& times,
                     const EvolveOptions& opts = {});

// <psi|sigma_z|psi> / <psi|psi>
double sigma_z_expectation(const Eigen::VectorXcd& psi);
inline double qubit_population(double sigma_z) { return 0.5 * (1.0 + sigma_z); }

// ---------------------------------------------------------------- spectra

enum class Window { none, hann };

struct EmissionOptions {
  Window window = Window::hann;
  bool detrend = true;
  int zero_pad = 4;
};

struct EmissionSpectrum {
  std::vector<double> freqs;       // ordinary frequency, nu >= 0
  std::vector<cplx> amplitude;     // dt sum_n w_n x_n e^{-2 pi i nu t_n}
  std::vector<double> magnitude;
  std::vector<double> raw_magnitude;  // same transform without detrending
  double dt = 0.0;
  double record_length = 0.0;      // N dt; one frequency bin is 1 / record_length
  double resolution_fwhm = 0.0;    // FWHM of the window's own line shape
  double coherent_gain = 1.0;      // mean window weight
  EmissionOptions options;

  double bin_width() const { return 1.0 / record_length; }
  // Line height produced by a sinusoid of the given amplitude.
  double line_height(double amplitude) const {
    return 0.5 * amplitude * coherent_gain * record_length;
  }
};

EmissionSpectrum emission_spectrum(const std::vector<double>& series, double dt,
                                   const EmissionOptions& opts = {});

struct Peak {
  double position;
  double height;
  double fwhm;
};

struct PeakSet {
  std::vector<Peak> peaks;  // ascending position
};

// Local maxima above noise_floor with nu >= min_freq.
PeakSet find_peaks(const EmissionSpectrum& spectrum, double noise_floor, double min_freq = 0.0);

struct DominantPeakOptions {
  double rel_floor = 0.4;        // fraction of the tallest peak; harmonics from normalizing stay below
  double min_amplitude = 0.01;   // smallest oscillation amplitude of <sigma_z> counted as a line
};

// Peaks above both floors, ignoring nu < 2 / record_length.
PeakSet dominant_peaks(const EmissionSpectrum& spectrum, const DominantPeakOptions& opts = {});

}  // namespace ptqrm
