#include "ptqrm/metrology.hpp"

#include "ptqrm/errors.hpp"

#include <Eigen/Eigenvalues>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

namespace ptqrm {

namespace {

Eigen::VectorXcd normalized(const Eigen::VectorXcd& v) {
  const double n = v.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw NumericalError("state provider returned a degenerate vector");
  return v / n;
}

double fubini_study(const StateProvider& provider, const Eigen::VectorXcd& center, double lambda0,
                    double h, double min_overlap) {
  auto aligned = [&](double lambda) {
    Eigen::VectorXcd s = normalized(provider(lambda));
    const cplx ov = center.dot(s);
    if (std::abs(ov) < min_overlap) {
      std::ostringstream os;
      os << "phase alignment failed at lambda=" << lambda << " (|overlap| = " << std::abs(ov) << ")";
      throw PhaseAlignmentFailed(os.str());
    }
    return Eigen::VectorXcd(s * (std::conj(ov) / std::abs(ov)));
  };
  const Eigen::VectorXcd d = (aligned(lambda0 + h) - aligned(lambda0 - h)) / (2.0 * h);
  return d.squaredNorm() - std::norm(d.dot(center));
}

}  // namespace

QfiEstimate qfi_numeric(const StateProvider& provider, double lambda0, const QfiOptions& opts) {
  const double h = opts.step > 0.0 ? opts.step : 1e-4 * (1.0 + std::abs(lambda0));
  const Eigen::VectorXcd center = normalized(provider(lambda0));
  const double scale = opts.normalization == QfiNormalization::standard ? 4.0 : 1.0;

  QfiEstimate est;
  est.coarse = scale * fubini_study(provider, center, lambda0, h, opts.min_overlap);
  est.fine = scale * fubini_study(provider, center, lambda0, 0.5 * h, opts.min_overlap);
  est.value = std::max(0.0, (4.0 * est.fine - est.coarse) / 3.0);
  est.consistent = std::abs(est.fine - est.coarse) <= opts.richardson_tol * std::abs(est.fine) + 1e-12;
  return est;
}

double qfi_nhtls_analytic(double delta, double epsilon) {
  if (std::abs(epsilon - delta) < 1e-12) throw AtEP("qfi_nhtls_analytic: epsilon at the exceptional point");
  const double d2 = delta * delta;
  const double e2 = epsilon * epsilon;
  if (epsilon <= delta) return 1.0 / (4.0 * (d2 - e2));
  return d2 / (4.0 * e2 * (e2 - d2));
}

double qfi_ptqrm_aa_analytic(double delta, double epsilon, double g) {
  const double ep = delta * std::exp(-2.0 * g * g);
  if (std::abs(epsilon - ep) < 1e-12) throw AtEP("qfi_ptqrm_aa_analytic: epsilon at the exceptional point");
  const double e2 = epsilon * epsilon;
  const double ep2 = delta * delta * std::exp(-4.0 * g * g);
  if (epsilon <= ep) return 1.0 / (4.0 * (ep2 - e2));
  return (delta * delta - g * g) / (4.0 * e2 * (e2 - ep2));
}

// ---------------------------------------------------------------- providers

ModelParams with_parameter(ModelParams p, QfiParameter which, double value) {
  (which == QfiParameter::g ? p.g : p.epsilon) = value;
  return p;
}

namespace {

// Negative parameter values are reached through the model's symmetries:
// H(-g) = P H(g) P with P = (-1)^n, and H(-eps) = X H(eps) X with
// X = sigma_x (-1)^n. Both commute with the spectral ordering.
Eigen::VectorXcd reflect(Eigen::VectorXcd psi, QfiParameter which, int n_fock) {
  const Eigen::Index b = n_fock + 1;
  for (Eigen::Index n = 1; n < b; n += 2) {
    psi(n) = -psi(n);
    psi(b + n) = -psi(b + n);
  }
  if (which == QfiParameter::epsilon) {
    const Eigen::VectorXcd upper = psi.head(b);
    psi.head(b) = psi.tail(b);
    psi.tail(b) = upper;
  }
  return psi;
}

}  // namespace

StateProvider exact_state_provider(const ModelParams& base, QfiParameter which, int state_index,
                                   const TruncationConfig& trunc, EigenSide side) {
  if (state_index < 0 || state_index >= basis_dim(trunc.n_fock)) {
    throw ConfigError("exact_state_provider: state index out of range");
  }
  return [=](double lambda) {
    const Eigensystem es = diagonalize(with_parameter(base, which, std::abs(lambda)), trunc);
    const EigenPair& p = es.pairs[static_cast<std::size_t>(state_index)];
    Eigen::VectorXcd psi = side == EigenSide::right ? p.right : p.left.normalized();
    return lambda < 0.0 ? reflect(std::move(psi), which, trunc.n_fock) : psi;
  };
}

StateProvider aa_state_provider(const ModelParams& base, QfiParameter which, int m, Branch branch,
                                int n_fock) {
  return [=](double lambda) {
    const ModelParams p = with_parameter(base, which, std::abs(lambda));
    const ApproxPair pair = aa_pair(m, p);
    Eigen::VectorXcd psi = state_to_fock(branch == Branch::plus ? pair.plus : pair.minus, p, n_fock);
    return lambda < 0.0 ? reflect(std::move(psi), which, n_fock) : psi;
  };
}

Eigen::VectorXcd nhtls_state(double delta, double epsilon, Branch branch) {
  Eigen::VectorXcd s(2);
  if (delta == 0.0) {
    // diagonal +-i eps/2; the plus root is -i eps/2 on the lower level
    if (branch == Branch::plus) s << 0.0, 1.0;
    else s << 1.0, 0.0;
    return s;
  }
  const cplx root = std::sqrt(cplx(delta * delta - epsilon * epsilon, 0.0));
  const cplx E = branch == Branch::plus ? -0.5 * root : 0.5 * root;
  s << 1.0, (cplx(0.0, 0.5 * epsilon) - E) * (2.0 / delta);
  return s.normalized();
}

StateProvider nhtls_state_provider(double delta, Branch branch) {
  return [=](double epsilon) { return nhtls_state(delta, epsilon, branch); };
}

std::string to_string(QfiMethod m) {
  switch (m) {
    case QfiMethod::numeric_exact: return "numeric_exact";
    case QfiMethod::numeric_aa: return "numeric_aa";
    case QfiMethod::numeric_nhtls: return "numeric_nhtls";
    case QfiMethod::analytic_nhtls: return "analytic_nhtls";
    case QfiMethod::analytic_ptqrm_aa: return "analytic_ptqrm_aa";
  }
  return "unknown";
}

std::string to_string(QfiParameter p) { return p == QfiParameter::g ? "g" : "epsilon"; }

// ---------------------------------------------------------------- curves and surfaces

QfiResult qfi_curve(const ModelParams& base, QfiParameter which, const std::vector<double>& grid,
                    int state_index, const TruncationConfig& trunc, const QfiOptions& opts) {
  QfiResult r;
  r.parameter = which;
  r.grid = grid;
  r.state_index = state_index;
  r.method = QfiMethod::numeric_exact;
  const StateProvider provider = exact_state_provider(base, which, state_index, trunc);
  for (double lambda : grid) {
    try {
      r.values.push_back(qfi_numeric(provider, lambda, opts).value);
      r.masked.push_back(false);
    } catch (const NumericalError&) {
      r.values.push_back(std::numeric_limits<double>::quiet_NaN());
      r.masked.push_back(true);
    }
  }
  return r;
}

QfiSurface qfi_surface(double delta, const std::vector<double>& g_grid,
                       const std::vector<double>& eps_grid, int state_index, QfiReference reference,
                       QfiParameter which, const TruncationConfig& trunc, int mask_cells,
                       const QfiOptions& opts, int workers) {
  if (g_grid.empty() || eps_grid.empty()) throw ConfigError("qfi_surface: empty grid");
  const auto ng = static_cast<Eigen::Index>(g_grid.size());
  const auto ne = static_cast<Eigen::Index>(eps_grid.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();

  QfiSurface s;
  s.g_grid = g_grid;
  s.eps_grid = eps_grid;
  s.parameter = which;
  s.reference = reference;
  s.difference = Eigen::MatrixXd::Constant(ne, ng, nan);
  s.mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(ne, ng, false);
  Eigen::MatrixXi phase(ne, ng);  // bit 0: model pair real, bit 1: reference pair real
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> failed =
      Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>::Constant(ne, ng, false);

  auto cell = [&](Eigen::Index i, Eigen::Index j) {
    ModelParams p;
    p.delta = delta;
    p.g = g_grid[static_cast<std::size_t>(j)];
    p.epsilon = eps_grid[static_cast<std::size_t>(i)];
    const double lambda = which == QfiParameter::g ? p.g : p.epsilon;
    int ph = 0;
    try {
      const Eigensystem es = exact_diagonalize(build_hamiltonian(p, trunc),
                                               std::numeric_limits<double>::infinity());
      if (std::abs(es.pairs[static_cast<std::size_t>(state_index)].energy.imag()) < 1e-8) ph |= 1;
      if (reference == QfiReference::nhtls ? p.epsilon < delta : true) ph |= 2;
      phase(i, j) = ph;

      const double f_model = qfi_numeric(exact_state_provider(p, which, state_index, trunc), lambda, opts).value;
      double f_ref = 0.0;
      if (reference == QfiReference::hermitian) {
        ModelParams h = p;
        h.bias = BiasKind::real;
        f_ref = qfi_numeric(exact_state_provider(h, which, state_index, trunc), lambda, opts).value;
      } else if (which == QfiParameter::epsilon) {
        f_ref = qfi_numeric(nhtls_state_provider(delta), lambda, opts).value;
      }
      s.difference(i, j) = f_model - f_ref;
    } catch (const NumericalError&) {
      phase(i, j) = ph;
      failed(i, j) = true;
    }
  };

  std::atomic<Eigen::Index> next{0};
  auto work = [&] {
    for (Eigen::Index c = next++; c < ne * ng; c = next++) cell(c / ng, c % ng);
  };
  const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(ne * ng)));
  if (n_workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }

  for (Eigen::Index i = 0; i < ne; ++i) {
    for (Eigen::Index j = 0; j < ng; ++j) {
      bool m = failed(i, j);
      for (Eigen::Index di = -mask_cells; di <= mask_cells && !m; ++di) {
        for (Eigen::Index dj = -mask_cells; dj <= mask_cells; ++dj) {
          const Eigen::Index ii = i + di;
          const Eigen::Index jj = j + dj;
          if (ii < 0 || ii >= ne || jj < 0 || jj >= ng) continue;
          if (phase(ii, jj) != phase(i, j)) {
            m = true;
            break;
          }
        }
      }
      if (m) {
        s.mask(i, j) = true;
        s.difference(i, j) = nan;
        ++s.masked_cells;
      }
    }
  }
  return s;
}

// ---------------------------------------------------------------- preparation time

PrepTimeResult prep_time(const GapFunction& gap, double lambda_c, const PrepTimeOptions& opts) {
  if (!(lambda_c > 0.0)) throw ConfigError("prep_time: lambda_c must be > 0");
  if (opts.samples < 2) throw ConfigError("prep_time: need at least two samples");
  auto checked = [&](double lambda) {
    const double d = gap(lambda);
    if (!(d >= opts.gap_floor)) {
      std::ostringstream os;
      os << "gap " << d << " below floor at lambda=" << lambda;
      throw GapClosed(os.str());
    }
    return d;
  };

  PrepTimeResult r;
  r.lambda_c = lambda_c;
  for (int k = 0; k < opts.samples; ++k) {
    const double lambda = lambda_c * k / (opts.samples - 1);
    r.sample_lambda.push_back(lambda);
    r.sample_gap.push_back(checked(lambda));
  }
  // Crossings between samples: shrink each sampled local minimum by ternary search.
  const double closure = opts.closure_rel * *std::max_element(r.sample_gap.begin(), r.sample_gap.end());
  const auto& lam = r.sample_lambda;
  const auto& gp = r.sample_gap;
  const int ns = static_cast<int>(gp.size());
  for (int k = 1; k + 1 < ns; ++k) {
    if (gp[k] > gp[k - 1] || gp[k] > gp[k + 1]) continue;
    double a = lam[k - 1], b = lam[k + 1];
    for (int it = 0; it < 200 && b - a > 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, b); ++it) {
      const double m1 = a + (b - a) / 3.0, m2 = b - (b - a) / 3.0;
      if (checked(m1) < checked(m2)) b = m2;
      else a = m1;
    }
    const double at = 0.5 * (a + b);
    const double d = checked(at);
    if (d < closure) {
      std::ostringstream os;
      os << "gap closes near lambda=" << at << " (" << d << ")";
      throw GapClosed(os.str());
    }
  }
  double err = 0.0;
  r.time = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      [&](double lambda) { return 1.0 / checked(lambda); }, 0.0, lambda_c, opts.max_depth, opts.tol,
      &err);
  r.error_estimate = err;
  return r;
}

GapFunction nhtls_gap(double delta) {
  return [=](double epsilon) { return std::sqrt(std::abs(delta * delta - epsilon * epsilon)); };
}

namespace {

// Near an EP the two eigenvalues are individually good only to ~sqrt(u |H|),
// but the trace and determinant of H restricted to their joint invariant
// subspace are well conditioned; the gap is taken from those.
double pair_gap(const Eigen::MatrixXcd& H) {
  const Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(H, false);
  if (solver.info() != Eigen::Success) throw NumericalError("exact_gap: eigenvalue solver failed");
  const Eigen::VectorXcd& w = solver.eigenvalues();
  const std::vector<int> order = spectral_order(w);
  const cplx e0 = w(order[0]), e1 = w(order[1]);
  const cplx center = 0.5 * (e0 + e1);
  const double radius = 0.5 * std::abs(e1 - e0);
  double others = std::numeric_limits<double>::infinity();
  for (std::size_t k = 2; k < order.size(); ++k) others = std::min(others, std::abs(w(order[k]) - center));
  if (!(others > 4.0 * radius)) return 2.0 * radius;  // no isolated pair to refine

  const Eigen::Index n = H.rows();
  const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(H - center * Eigen::MatrixXcd::Identity(n, n));
  Eigen::MatrixXcd Q(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    Q(i, 0) = 1.0;
    Q(i, 1) = (i % 2 ? -1.0 : 1.0) * (1.0 + 0.5 * std::sin(1.0 + i));
  }
  // each step damps the rest of the spectrum by radius / others
  const int steps = 2 + static_cast<int>(std::ceil(40.0 / std::max(1.0, std::log(others / std::max(radius, 1e-300)))));
  for (int it = 0; it < steps; ++it) {
    const Eigen::HouseholderQR<Eigen::MatrixXcd> qr(lu.solve(Q));
    Q = qr.householderQ() * Eigen::MatrixXcd::Identity(n, 2);
  }
  const Eigen::Matrix2cd M = Q.adjoint() * H * Q;
  const cplx tr = M.trace();
  return std::abs(std::sqrt(tr * tr - 4.0 * M.determinant()));
}

}  // namespace

GapFunction exact_gap(const ModelParams& base, QfiParameter which, const TruncationConfig& trunc) {
  return [=](double lambda) { return pair_gap(build_hamiltonian(with_parameter(base, which, lambda), trunc)); };
}

GapFunction aa_gap(const ModelParams& base, QfiParameter which) {
  return [=](double lambda) {
    const auto [plus, minus] = aa_energies(0, with_parameter(base, which, lambda));
    return std::abs(minus - plus);
  };
}

}  // namespace ptqrm
