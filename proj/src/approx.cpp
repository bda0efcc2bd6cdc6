#include "ptqrm/approx.hpp"

#include "ptqrm/errors.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ptqrm {

double laguerre_assoc(int m, int alpha, double x) {
  if (m < 0) throw ConfigError("laguerre_assoc: m must be >= 0");
  double prev = 1.0;
  if (m == 0) return prev;
  double cur = 1.0 + alpha - x;
  for (int k = 1; k < m; ++k) {
    const double next = ((2.0 * k + 1.0 + alpha - x) * cur - (k + alpha) * prev) / (k + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

double overlap_D(int m, int n, double delta, double g) {
  if (m < 0 || n < 0) throw ConfigError("overlap_D: indices must be >= 0");
  if (n < m) std::swap(m, n);
  const int k = n - m;
  const double x = 4.0 * g * g;
  const double lag = laguerre_assoc(m, k, x);
  if (k == 0) return 0.5 * delta * std::exp(-2.0 * g * g) * lag;
  if (g == 0.0) return 0.0;
  const double log_mag = k * std::log(2.0 * g) - 2.0 * g * g +
                         0.5 * (std::lgamma(m + 1.0) - std::lgamma(n + 1.0));
  return 0.5 * delta * std::exp(log_mag) * lag;
}

double manifold_coupling(int m, int n, double delta, double g) {
  const double sign = (std::min(m, n) % 2 == 0) ? 1.0 : -1.0;
  return sign * overlap_D(m, n, delta, g);
}

OverlapTable overlap_table(int m_max, double delta, double g) {
  if (m_max < 0) throw ConfigError("overlap_table: m_max must be >= 0");
  OverlapTable t;
  t.delta = delta;
  t.g = g;
  t.D.resize(m_max + 1, m_max + 1);
  for (int m = 0; m <= m_max; ++m) {
    for (int n = m; n <= m_max; ++n) {
      t.D(m, n) = t.D(n, m) = overlap_D(m, n, delta, g);
    }
  }
  return t;
}

// ---------------------------------------------------------------- shared block algebra

namespace {

Eigen::MatrixXcd manifold_block(const std::vector<int>& ms, const ModelParams& p) {
  const int L = static_cast<int>(ms.size());
  const double g2 = p.g * p.g;
  const cplx half_bias = 0.5 * p.bias_amplitude();
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Zero(2 * L, 2 * L);
  for (int i = 0; i < L; ++i) {
    M(i, i) = static_cast<double>(ms[static_cast<std::size_t>(i)]) - g2 + half_bias;
    M(L + i, L + i) = static_cast<double>(ms[static_cast<std::size_t>(i)]) - g2 - half_bias;
    for (int j = 0; j < L; ++j) {
      const double k = manifold_coupling(ms[static_cast<std::size_t>(i)],
                                         ms[static_cast<std::size_t>(j)], p.delta, p.g);
      M(i, L + j) = -k;
      M(L + i, j) = -k;
    }
  }
  return M;
}

// Normalizes sum |u|^2 + |v|^2 = 1 and fixes the phase so that the coefficient
// of the anchor manifold (upper sector, else lower) is real positive.
void finish_state(ApproxState& s, int anchor, const Eigen::VectorXcd& vec) {
  const int L = static_cast<int>(s.manifolds.size());
  s.u = vec.head(L);
  s.v = vec.tail(L);
  const double nrm = vec.norm();
  if (!(nrm > 0.0)) throw NumericalError("approximate state has zero norm");
  cplx ref = s.u(anchor);
  if (std::abs(ref) < 1e-14 * nrm) ref = s.v(anchor);
  const cplx phase = std::abs(ref) > 0.0 ? std::conj(ref) / std::abs(ref) : cplx(1.0, 0.0);
  s.norm = phase / nrm;
  s.u *= s.norm;
  s.v *= s.norm;
}

}  // namespace

std::pair<ComplexEnergy, ComplexEnergy> aa_energies(int m, const ModelParams& params) {
  params.validate();
  if (m < 0) throw ConfigError("aa_energies: m must be >= 0");
  const ModelParams p = params.in_cavity_units();
  const double d = overlap_D(m, m, p.delta, p.g);
  const cplx beta = p.bias_amplitude();
  const cplx root = std::sqrt(cplx(4.0 * d * d, 0.0) + beta * beta);
  const double center = m - p.g * p.g;
  return {params.omega * (center - 0.5 * root), params.omega * (center + 0.5 * root)};
}

ApproxPair aa_pair(int m, const ModelParams& params) {
  const auto [e_plus, e_minus] = aa_energies(m, params);
  const ModelParams p = params.in_cavity_units();
  const double k = manifold_coupling(m, m, p.delta, p.g);
  const cplx omega_up = static_cast<double>(m) - p.g * p.g + 0.5 * p.bias_amplitude();
  const double d = overlap_D(m, m, p.delta, p.g);
  const cplx disc = cplx(4.0 * d * d, 0.0) + p.bias_amplitude() * p.bias_amplitude();
  const bool degenerate = std::abs(disc) < 1e-12 * (1.0 + 4.0 * d * d);

  auto build = [&](ComplexEnergy E, Branch br) {
    ApproxState s;
    s.m = m;
    s.branch = br;
    s.manifolds = {m};
    s.energy = E;
    s.ep_degenerate = degenerate;
    Eigen::VectorXcd vec(2);
    if (std::abs(k) > 1e-300) {
      // (omega_up - E) u - K v = 0
      vec << 1.0, (omega_up - E / params.omega) / k;
    } else {
      // uncoupled qubit levels: E+ takes the lower diagonal entry
      const bool upper_is_lower_root =
          (omega_up.real() < (static_cast<double>(m) - p.g * p.g - 0.5 * p.bias_amplitude()).real());
      const bool pick_upper = (br == Branch::plus) == upper_is_lower_root;
      vec << (pick_upper ? 1.0 : 0.0), (pick_upper ? 0.0 : 1.0);
    }
    finish_state(s, 0, vec);
    return s;
  };
  return {build(e_plus, Branch::plus), build(e_minus, Branch::minus)};
}

CaaBlock caa_block(int m, const ModelParams& params) {
  params.validate();
  if (m < 0) throw ConfigError("caa_block: m must be >= 0");
  const ModelParams p = params.in_cavity_units();
  CaaBlock b;
  b.m = m;
  for (int k = m - 1; k <= m + 1; ++k) {
    if (k >= 0) b.manifolds.push_back(k);
  }
  b.matrix = params.omega * manifold_block(b.manifolds, p);
  return b;
}

Eigen::VectorXcd caa_roots(const CaaBlock& block) {
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(block.matrix, false);
  const Eigen::VectorXcd w = es.eigenvalues();
  const std::vector<int> order = spectral_order(w);
  Eigen::VectorXcd out(w.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) out(i) = w(order[static_cast<std::size_t>(i)]);
  return out;
}

ApproxPair caa_pair(int m, const ModelParams& params, const CaaOptions& opts) {
  const CaaBlock block = caa_block(m, params);
  const auto [a_plus, a_minus] = aa_energies(m, params);
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(block.matrix, true);
  if (es.info() != Eigen::Success) throw NumericalError("caa_pair: block eigensolve failed");
  const Eigen::VectorXcd& r = es.eigenvalues();
  const int n = static_cast<int>(r.size());

  // Best ordered assignment (i -> E+, j -> E-) and the best one using a different root set.
  double best = std::numeric_limits<double>::infinity();
  int bi = -1;
  int bj = -1;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double c = std::abs(r(i) - a_plus) + std::abs(r(j) - a_minus);
      if (c < best) {
        best = c;
        bi = i;
        bj = j;
      }
    }
  }
  double runner = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const bool same_set = (i == bi && j == bj) || (i == bj && j == bi);
      if (same_set) continue;
      // exactly degenerate roots give the same pair, not a competing one
      const double tie = 1e-9 * std::max(1.0, std::abs(r(bi)) + std::abs(r(bj)));
      if (std::abs(r(i) - r(bi)) + std::abs(r(j) - r(bj)) < tie) continue;
      runner = std::min(runner, std::abs(r(i) - a_plus) + std::abs(r(j) - a_minus));
    }
  }
  if (runner - best < opts.selection_margin) {
    std::ostringstream os;
    os << "caa_pair: root selection ambiguous for m=" << m << " (margin " << runner - best << ")";
    throw SelectionAmbiguous(os.str());
  }

  const int anchor = static_cast<int>(std::find(block.manifolds.begin(), block.manifolds.end(), m) -
                                      block.manifolds.begin());
  const double scale = std::max(1.0, std::abs(r(bi) - r(bj)));
  const bool degenerate = std::abs(r(bi) - r(bj)) < 1e-9 * scale;
  // Within an eigenspace shared with an unchosen root, keep the combination
  // that lives most on manifold m.
  auto vector_for = [&](int idx, int other) -> Eigen::VectorXcd {
    const double tie = 1e-9 * std::max(1.0, std::abs(r(idx)));
    std::vector<int> cols{idx};
    for (int k = 0; k < n; ++k) {
      if (k != idx && k != other && std::abs(r(k) - r(idx)) < tie) cols.push_back(k);
    }
    if (cols.size() == 1) return es.eigenvectors().col(idx);
    Eigen::MatrixXcd V(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t c = 0; c < cols.size(); ++c) V.col(static_cast<Eigen::Index>(c)) = es.eigenvectors().col(cols[c]);
    Eigen::HouseholderQR<Eigen::MatrixXcd> qr(V);
    const Eigen::MatrixXcd Q = qr.householderQ() * Eigen::MatrixXcd::Identity(n, V.cols());
    const Eigen::Index L = n / 2;
    Eigen::MatrixXcd P(2, Q.cols());
    P.row(0) = Q.row(anchor);
    P.row(1) = Q.row(L + anchor);
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(P, Eigen::ComputeFullV);
    return Q * svd.matrixV().col(0);
  };
  auto build = [&](int idx, int other, Branch br) {
    ApproxState s;
    s.m = m;
    s.branch = br;
    s.manifolds = block.manifolds;
    s.energy = r(idx);
    s.ep_degenerate = degenerate;
    finish_state(s, anchor, vector_for(idx, other));
    return s;
  };
  return {build(bi, bj, Branch::plus), build(bj, bi, Branch::minus)};
}

// ---------------------------------------------------------------- Fock reconstruction

Eigen::MatrixXd displaced_number_states(double g, int sign, int n_max, int n_fock, double tail_tol) {
  if (n_max < 0 || n_fock < 0) throw ConfigError("displaced_number_states: negative size");
  // Work on a padded basis so the ladder never touches the artificial edge.
  const int L = n_fock + n_max + 60 + static_cast<int>(std::ceil(4.0 * g * g));
  Eigen::VectorXd cur(L + 1);
  const double amp = -static_cast<double>(sign) * g;
  cur(0) = std::exp(-0.5 * g * g);
  for (int k = 0; k < L; ++k) cur(k + 1) = cur(k) * amp / std::sqrt(k + 1.0);

  Eigen::MatrixXd out(n_fock + 1, n_max + 1);
  double worst_tail = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    out.col(n) = cur.head(n_fock + 1);
    worst_tail = std::max(worst_tail, cur.tail(L - n_fock).squaredNorm());
    if (n == n_max) break;
    // |n+1> = (a^dag - amp) |n> / sqrt(n+1)  since A = a - amp
    Eigen::VectorXd next(L + 1);
    next(0) = -amp * cur(0);
    for (int k = 1; k <= L; ++k) next(k) = std::sqrt(static_cast<double>(k)) * cur(k - 1) - amp * cur(k);
    cur = next / std::sqrt(n + 1.0);
  }
  if (worst_tail > tail_tol) {
    std::ostringstream os;
    os << "displaced states leave weight " << worst_tail << " beyond n_fock=" << n_fock;
    throw TruncationTail(os.str());
  }
  return out;
}

Eigen::VectorXcd state_to_fock(const ApproxState& state, const ModelParams& params, int n_fock) {
  params.validate();
  if (state.manifolds.empty()) throw ConfigError("state_to_fock: empty state");
  const double g = params.in_cavity_units().g;
  const int n_max = *std::max_element(state.manifolds.begin(), state.manifolds.end());
  const Eigen::MatrixXd plus = displaced_number_states(g, +1, n_max, n_fock);
  const Eigen::MatrixXd minus = displaced_number_states(g, -1, n_max, n_fock);

  Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(basis_dim(n_fock));
  for (std::size_t i = 0; i < state.manifolds.size(); ++i) {
    const int k = state.manifolds[i];
    const double parity = (k % 2 == 0) ? 1.0 : -1.0;
    psi.head(n_fock + 1) += state.u(static_cast<Eigen::Index>(i)) * plus.col(k).cast<cplx>();
    psi.tail(n_fock + 1) += parity * state.v(static_cast<Eigen::Index>(i)) * minus.col(k).cast<cplx>();
  }
  const double nrm = psi.norm();
  if (!(nrm > 0.0)) throw NumericalError("state_to_fock: zero vector");
  return psi / nrm;
}

}  // namespace ptqrm
