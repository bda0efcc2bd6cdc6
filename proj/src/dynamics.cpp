#include "ptqrm/dynamics.hpp"

#include "ptqrm/errors.hpp"

#include <boost/numeric/odeint.hpp>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>

namespace ptqrm {

namespace {

std::mutex fftw_plan_mutex;  // planner calls are not thread safe

void record_state(DynamicsTrace& tr, const Eigen::VectorXcd& psi, double log_scale) {
  const double n2 = psi.squaredNorm();
  if (!(n2 > 0.0) || !std::isfinite(n2)) throw NumericalError("state norm vanished or overflowed");
  tr.sigma_z.push_back(sigma_z_expectation(psi));
  tr.log_norm.push_back(log_scale + 0.5 * std::log(n2));
}

}  // namespace

std::vector<double> DynamicsTrace::norm() const {
  std::vector<double> out(log_norm.size());
  std::transform(log_norm.begin(), log_norm.end(), out.begin(), [](double x) { return std::exp(x); });
  return out;
}

Eigen::VectorXcd upper_vacuum_state(int n_fock) {
  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(basis_dim(n_fock));
  psi(basis_index(0, 0, n_fock)) = 1.0;
  return psi;
}

std::vector<double> time_grid(double t_total, double dt) {
  if (!(dt > 0.0) || !(t_total > 0.0)) throw ConfigError("time_grid: t_total and dt must be > 0");
  const auto n = static_cast<std::size_t>(std::llround(t_total / dt));
  std::vector<double> t(n + 1);
  for (std::size_t i = 0; i <= n; ++i) t[i] = static_cast<double>(i) * dt;
  return t;
}

double sigma_z_expectation(const Eigen::VectorXcd& psi) {
  const Eigen::Index half = psi.size() / 2;
  const double up = psi.head(half).squaredNorm();
  const double down = psi.tail(half).squaredNorm();
  return (up - down) / (up + down);
}

// ---------------------------------------------------------------- bases

SpectralBasis basis_from_eigensystem(const Eigensystem& es) {
  SpectralBasis b;
  b.energies = es.energies();
  b.modes = es.right_matrix();
  b.duals = es.left_matrix();
  b.cond = es.cond;
  b.source = "ed";
  return b;
}

SpectralBasis basis_from_states(const std::vector<Eigen::VectorXcd>& states,
                                const std::vector<ComplexEnergy>& energies,
                                const std::string& source) {
  if (states.empty() || states.size() != energies.size()) {
    throw ConfigError("basis_from_states: states and energies must be non-empty and match");
  }
  const Eigen::Index dim = states.front().size();
  const auto n = static_cast<Eigen::Index>(states.size());
  SpectralBasis b;
  b.energies.resize(n);
  b.modes.resize(dim, n);
  b.duals.resize(dim, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const Eigen::VectorXcd& s = states[static_cast<std::size_t>(k)];
    const cplx cnorm = s.transpose() * s;
    if (std::abs(cnorm) < 1e-300) throw NumericalError("basis_from_states: self-orthogonal mode");
    b.energies(k) = energies[static_cast<std::size_t>(k)];
    b.modes.col(k) = s;
    b.duals.col(k) = s.conjugate() / std::conj(cnorm);
  }
  b.source = source;
  return b;
}

SpectralBasis approx_basis(ApproxMethod method, const ModelParams& params, int n_fock,
                           int n_manifolds) {
  if (n_manifolds < 1) throw ConfigError("approx_basis: need at least one manifold");
  std::vector<Eigen::VectorXcd> states;
  std::vector<ComplexEnergy> energies;
  for (int m = 0; m < n_manifolds; ++m) {
    const ApproxPair pair = method == ApproxMethod::aa ? aa_pair(m, params) : caa_pair(m, params);
    for (const ApproxState* s : {&pair.plus, &pair.minus}) {
      states.push_back(state_to_fock(*s, params, n_fock));
      energies.push_back(s->energy);
    }
  }
  return basis_from_states(states, energies, method == ApproxMethod::aa ? "aa" : "caa");
}

// ---------------------------------------------------------------- evolution

DynamicsTrace evolve_spectral(const SpectralBasis& basis, const Eigen::VectorXcd& initial,
                              const std::vector<double>& times) {
  if (initial.size() != basis.modes.rows()) throw ConfigError("evolve_spectral: dimension mismatch");
  const Eigen::VectorXcd coeff = basis.duals.adjoint() * initial;

  // Keep only modes that are actually populated; the largest growth rate
  // among them is factored out of every amplitude.
  std::vector<Eigen::Index> live;
  double grow = -std::numeric_limits<double>::infinity();
  const double cmax = coeff.cwiseAbs().maxCoeff();
  for (Eigen::Index k = 0; k < coeff.size(); ++k) {
    if (std::abs(coeff(k)) > 1e-15 * cmax) {
      live.push_back(k);
      grow = std::max(grow, basis.energies(k).imag());
    }
  }
  if (live.empty()) throw NumericalError("evolve_spectral: initial state has no overlap with the basis");
  Eigen::MatrixXcd R(basis.modes.rows(), static_cast<Eigen::Index>(live.size()));
  Eigen::VectorXcd c(static_cast<Eigen::Index>(live.size()));
  Eigen::VectorXcd E(static_cast<Eigen::Index>(live.size()));
  for (std::size_t i = 0; i < live.size(); ++i) {
    const auto j = static_cast<Eigen::Index>(i);
    R.col(j) = basis.modes.col(live[i]);
    c(j) = coeff(live[i]);
    E(j) = basis.energies(live[i]);
  }

  DynamicsTrace tr;
  tr.method = EvolutionMethod::spectral;
  tr.times = times;
  tr.sigma_z.reserve(times.size());
  tr.log_norm.reserve(times.size());
  Eigen::VectorXcd amp(c.size());
  for (double t : times) {
    for (Eigen::Index j = 0; j < c.size(); ++j) {
      amp(j) = c(j) * std::exp(cplx((E(j).imag() - grow) * t, -E(j).real() * t));
    }
    record_state(tr, R * amp, grow * t);
  }
  return tr;
}

DynamicsTrace evolve_direct(const Eigen::SparseMatrix<cplx>& H, const Eigen::VectorXcd& initial,
                            const std::vector<double>& times, const DirectOptions& opts) {
  namespace ode = boost::numeric::odeint;
  if (H.rows() != initial.size()) throw ConfigError("evolve_direct: dimension mismatch");
  if (times.empty()) return {};
  const Eigen::Index dim = initial.size();
  using State = std::vector<double>;

  // Real layout [Re psi, Im psi]; dpsi/dt = -i H psi.
  Eigen::VectorXcd work(dim);
  auto rhs = [&](const State& x, State& dxdt, double) {
    Eigen::Map<const Eigen::VectorXd> re(x.data(), dim);
    Eigen::Map<const Eigen::VectorXd> im(x.data() + dim, dim);
    work.real() = re;
    work.imag() = im;
    const Eigen::VectorXcd hpsi = H * work;
    Eigen::Map<Eigen::VectorXd>(dxdt.data(), dim) = hpsi.imag();
    Eigen::Map<Eigen::VectorXd>(dxdt.data() + dim, dim) = -hpsi.real();
  };

  State x(static_cast<std::size_t>(2 * dim));
  const double n0 = initial.norm();
  if (!(n0 > 0.0)) throw ConfigError("evolve_direct: zero initial state");
  for (Eigen::Index i = 0; i < dim; ++i) {
    x[static_cast<std::size_t>(i)] = initial(i).real() / n0;
    x[static_cast<std::size_t>(dim + i)] = initial(i).imag() / n0;
  }
  double log_scale = std::log(n0);

  auto stepper = ode::make_controlled(opts.abs_tol, opts.rel_tol, ode::runge_kutta_dopri5<State>());
  auto as_vector = [&](const State& s) {
    Eigen::VectorXcd psi(dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      psi(i) = cplx(s[static_cast<std::size_t>(i)], s[static_cast<std::size_t>(dim + i)]);
    }
    return psi;
  };

  DynamicsTrace tr;
  tr.method = EvolutionMethod::direct;
  tr.times = times;
  record_state(tr, as_vector(x), log_scale);
  double dt_guess = 1e-3;
  for (std::size_t k = 1; k < times.size(); ++k) {
    const double t0 = times[k - 1];
    const double t1 = times[k];
    if (!(t1 > t0)) throw ConfigError("evolve_direct: times must be strictly increasing");
    ode::integrate_adaptive(stepper, rhs, x, t0, t1, std::min(dt_guess, t1 - t0));
    double n2 = 0.0;
    for (double v : x) n2 += v * v;
    const double n = std::sqrt(n2);
    if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("evolve_direct: state norm degenerate");
    for (double& v : x) v /= n;
    log_scale += std::log(n);
    record_state(tr, as_vector(x), log_scale);
  }
  return tr;
}

DynamicsTrace evolve(const ModelParams& params, const TruncationConfig& trunc,
                     const Eigen::VectorXcd& initial, const std::vector<double>& times,
                     const EvolveOptions& opts) {
  try {
    const Eigensystem es = exact_diagonalize(build_hamiltonian(params, trunc), opts.cond_limit);
    return evolve_spectral(basis_from_eigensystem(es), initial, times);
  } catch (const DefectiveMatrix&) {
    DynamicsTrace tr = evolve_direct(build_hamiltonian_sparse(params, trunc), initial, times, opts.direct);
    tr.fallback = true;
    return tr;
  }
}

// ---------------------------------------------------------------- spectra

namespace {

std::vector<double> window_weights(Window w, std::size_t n) {
  std::vector<double> out(n, 1.0);
  if (w == Window::hann && n > 1) {
    const double pi = std::acos(-1.0);
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = 0.5 * (1.0 - std::cos(2.0 * pi * static_cast<double>(i) / static_cast<double>(n - 1)));
    }
  }
  return out;
}

std::vector<cplx> real_dft(const std::vector<double>& x, std::size_t n_fft) {
  std::vector<double> in(n_fft, 0.0);
  std::copy(x.begin(), x.end(), in.begin());
  const std::size_t n_out = n_fft / 2 + 1;
  std::vector<cplx> out(n_out);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(n_fft), in.data(),
                                reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex);
    fftw_destroy_plan(plan);
  }
  return out;
}

double line_fwhm(const std::vector<double>& mag, std::size_t i, double df) {
  const double half = 0.5 * mag[i];
  std::size_t l = i;
  while (l > 0 && mag[l] > half) --l;
  std::size_t r = i;
  while (r + 1 < mag.size() && mag[r] > half) ++r;
  auto cross = [&](std::size_t a, std::size_t b) {
    // linear interpolation of the half-height crossing between bins a and b
    const double ya = mag[a];
    const double yb = mag[b];
    if (ya == yb) return static_cast<double>(a);
    return static_cast<double>(a) + (half - ya) / (yb - ya) * (static_cast<double>(b) - static_cast<double>(a));
  };
  const double left = mag[l] <= half ? cross(l, l + 1) : static_cast<double>(l);
  const double right = mag[r] <= half ? cross(r - 1, r) : static_cast<double>(r);
  return (right - left) * df;
}

}  // namespace

EmissionSpectrum emission_spectrum(const std::vector<double>& series, double dt,
                                   const EmissionOptions& opts) {
  if (series.size() < 4) throw ConfigError("emission_spectrum: series too short");
  if (!(dt > 0.0)) throw ConfigError("emission_spectrum: dt must be > 0");
  if (opts.zero_pad < 1) throw ConfigError("emission_spectrum: zero_pad must be >= 1");

  const std::size_t n = series.size();
  const std::size_t n_fft = n * static_cast<std::size_t>(opts.zero_pad);
  const std::vector<double> w = window_weights(opts.window, n);

  double gain = 0.0;
  for (double v : w) gain += v;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);

  std::vector<double> x(n);
  std::vector<double> raw(n);
  for (std::size_t i = 0; i < n; ++i) {
    raw[i] = w[i] * series[i];
    x[i] = w[i] * (opts.detrend ? series[i] - mean : series[i]);
  }

  EmissionSpectrum s;
  s.dt = dt;
  s.record_length = static_cast<double>(n) * dt;
  s.options = opts;
  s.coherent_gain = gain / static_cast<double>(n);
  const std::vector<cplx> F = real_dft(x, n_fft);
  const std::vector<cplx> R = real_dft(raw, n_fft);
  const double df = 1.0 / (static_cast<double>(n_fft) * dt);
  s.freqs.resize(F.size());
  s.amplitude.resize(F.size());
  s.magnitude.resize(F.size());
  s.raw_magnitude.resize(F.size());
  for (std::size_t k = 0; k < F.size(); ++k) {
    s.freqs[k] = static_cast<double>(k) * df;
    s.amplitude[k] = dt * F[k];
    s.magnitude[k] = std::abs(s.amplitude[k]);
    s.raw_magnitude[k] = dt * std::abs(R[k]);
  }

  // Line shape of the window itself, centred at zero frequency.
  const std::vector<cplx> W = real_dft(w, n_fft);
  std::vector<double> wm(W.size());
  for (std::size_t k = 0; k < W.size(); ++k) wm[k] = std::abs(W[k]);
  s.resolution_fwhm = 2.0 * line_fwhm(wm, 0, df);
  return s;
}

PeakSet find_peaks(const EmissionSpectrum& spectrum, double noise_floor, double min_freq) {
  const auto& y = spectrum.magnitude;
  const auto& f = spectrum.freqs;
  PeakSet out;
  if (y.size() < 3) return out;
  const double df = f[1] - f[0];
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    if (!(y[i] > y[i - 1] && y[i] >= y[i + 1])) continue;
    if (!(y[i] > noise_floor) || f[i] < min_freq) continue;
    const double denom = y[i - 1] - 2.0 * y[i] + y[i + 1];
    const double shift = denom != 0.0 ? 0.5 * (y[i - 1] - y[i + 1]) / denom : 0.0;
    const double height = y[i] - 0.25 * (y[i - 1] - y[i + 1]) * shift;
    out.peaks.push_back({f[i] + shift * df, height, line_fwhm(y, i, df)});
  }
  return out;
}

PeakSet dominant_peaks(const EmissionSpectrum& spectrum, const DominantPeakOptions& opts) {
  const double min_freq = 2.0 / spectrum.record_length;
  const PeakSet all = find_peaks(spectrum, 0.0, min_freq);
  double top = 0.0;
  for (const Peak& p : all.peaks) top = std::max(top, p.height);
  const double floor = std::max(opts.rel_floor * top, spectrum.line_height(opts.min_amplitude));
  PeakSet out;
  for (const Peak& p : all.peaks) {
    if (p.height > floor) out.peaks.push_back(p);
  }
  return out;
}

}  // namespace ptqrm
