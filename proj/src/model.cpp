#include "ptqrm/model.hpp"

#include "ptqrm/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace ptqrm {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

void ModelParams::validate() const {
  require(std::isfinite(delta) && std::isfinite(epsilon) && std::isfinite(g) &&
              std::isfinite(omega),
          "model parameters must be finite");
  require(delta >= 0.0, "delta must be >= 0");
  require(epsilon >= 0.0, "epsilon must be >= 0");
  require(g >= 0.0, "g must be >= 0");
  require(omega > 0.0, "omega must be > 0");
}

ModelParams ModelParams::in_cavity_units() const {
  ModelParams p = *this;
  p.delta /= omega;
  p.epsilon /= omega;
  p.g /= omega;
  p.omega = 1.0;
  return p;
}

void TruncationConfig::validate() const {
  require(n_fock >= 2, "n_fock must be >= 2");
  require(n_series >= 10, "n_series must be >= 10");
  require(series_tol > 0.0 && eig_tol > 0.0 && cond_limit > 0.0,
          "tolerances must be > 0");
}

Eigen::SparseMatrix<cplx> build_hamiltonian_sparse(const ModelParams& params,
                                                   const TruncationConfig& trunc) {
  params.validate();
  trunc.validate();
  const int nf = trunc.n_fock;
  const int dim = basis_dim(nf);
  const cplx half_bias = 0.5 * params.bias_amplitude();

  std::vector<Eigen::Triplet<cplx>> t;
  t.reserve(static_cast<std::size_t>(dim) * 4);
  for (int q = 0; q < 2; ++q) {
    const double sz = q == 0 ? 1.0 : -1.0;
    for (int n = 0; n <= nf; ++n) {
      const int i = basis_index(q, n, nf);
      t.emplace_back(i, i, params.omega * n + sz * half_bias);
      if (n < nf) {
        const double a = params.g * sz * std::sqrt(static_cast<double>(n + 1));
        const int j = basis_index(q, n + 1, nf);
        t.emplace_back(i, j, a);
        t.emplace_back(j, i, a);
      }
      // -(delta/2) sigma_x couples the two qubit levels at equal photon number
      t.emplace_back(i, basis_index(1 - q, n, nf), -0.5 * params.delta);
    }
  }
  Eigen::SparseMatrix<cplx> H(dim, dim);
  H.setFromTriplets(t.begin(), t.end());
  return H;
}

Eigen::MatrixXcd build_hamiltonian(const ModelParams& params, const TruncationConfig& trunc) {
  return Eigen::MatrixXcd(build_hamiltonian_sparse(params, trunc));
}

Eigen::VectorXd sigma_z_diagonal(int n_fock) {
  Eigen::VectorXd d(basis_dim(n_fock));
  d.head(n_fock + 1).setOnes();
  d.tail(n_fock + 1).setConstant(-1.0);
  return d;
}

Eigen::VectorXcd Eigensystem::energies() const {
  Eigen::VectorXcd e(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) e(static_cast<Eigen::Index>(k)) = pairs[k].energy;
  return e;
}

Eigen::MatrixXcd Eigensystem::right_matrix() const {
  if (pairs.empty()) return {};
  Eigen::MatrixXcd R(pairs.front().right.size(), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) R.col(static_cast<Eigen::Index>(k)) = pairs[k].right;
  return R;
}

Eigen::MatrixXcd Eigensystem::left_matrix() const {
  if (pairs.empty()) return {};
  Eigen::MatrixXcd L(pairs.front().left.size(), static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t k = 0; k < pairs.size(); ++k) L.col(static_cast<Eigen::Index>(k)) = pairs[k].left;
  return L;
}

std::vector<int> spectral_order(const Eigen::VectorXcd& energies, double tie_tol) {
  std::vector<int> idx(static_cast<std::size_t>(energies.size()));
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](int a, int b) { return energies(a).real() < energies(b).real(); });
  // Group runs of numerically equal real parts and order them by imaginary part.
  std::size_t start = 0;
  while (start < idx.size()) {
    std::size_t end = start + 1;
    while (end < idx.size()) {
      const double ra = energies(idx[end - 1]).real();
      const double rb = energies(idx[end]).real();
      if (std::abs(rb - ra) > tie_tol * (1.0 + std::abs(ra))) break;
      ++end;
    }
    std::stable_sort(idx.begin() + static_cast<std::ptrdiff_t>(start),
                     idx.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](int a, int b) { return energies(a).imag() < energies(b).imag(); });
    start = end;
  }
  return idx;
}

Eigensystem exact_diagonalize(const Eigen::MatrixXcd& H, double cond_limit) {
  if (H.rows() != H.cols() || H.rows() == 0) {
    throw ConfigError("exact_diagonalize: matrix must be square and non-empty");
  }
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(H, true);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("exact_diagonalize: eigen decomposition failed");
  }
  const Eigen::VectorXcd& w = solver.eigenvalues();
  const std::vector<int> order = spectral_order(w);

  const Eigen::Index n = H.rows();
  Eigen::MatrixXcd R(n, n);
  Eigen::VectorXcd E(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const int src = order[static_cast<std::size_t>(k)];
    R.col(k) = solver.eigenvectors().col(src).normalized();
    E(k) = w(src);
  }

  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(R);
  const auto& s = svd.singularValues();
  const double cond = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1)
                                             : std::numeric_limits<double>::infinity();
  if (!(cond <= cond_limit)) {
    std::ostringstream os;
    os << "eigenvector matrix is defective (cond = " << cond << " > " << cond_limit << ")";
    throw DefectiveMatrix(os.str(), cond);
  }

  const Eigen::MatrixXcd Rinv = R.partialPivLu().inverse();
  Eigensystem out;
  out.cond = cond;
  out.pairs.resize(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < n; ++k) {
    EigenPair& p = out.pairs[static_cast<std::size_t>(k)];
    p.energy = E(k);
    p.right = R.col(k);
    p.left = Rinv.row(k).adjoint();
    p.cond = p.left.norm();
  }
  return out;
}

Eigensystem diagonalize(const ModelParams& params, const TruncationConfig& trunc) {
  return exact_diagonalize(build_hamiltonian(params, trunc), trunc.cond_limit);
}

ConvergedEigensystem converged_diagonalize(const ModelParams& params, TruncationConfig trunc,
                                           double e_cut, int n_fock_max) {
  Eigensystem prev = diagonalize(params, trunc);
  while (trunc.n_fock + 20 <= n_fock_max) {
    TruncationConfig next = trunc;
    next.n_fock += 20;
    Eigensystem cur = diagonalize(params, next);
    double shift = 0.0;
    for (const auto& p : prev.pairs) {
      if (p.energy.real() >= e_cut) continue;
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : cur.pairs) best = std::min(best, std::abs(c.energy - p.energy));
      shift = std::max(shift, best);
    }
    if (shift < trunc.eig_tol) return {std::move(prev), trunc.n_fock, shift};
    prev = std::move(cur);
    trunc = next;
  }
  throw NumericalError("converged_diagonalize: truncation did not converge below n_fock_max");
}

}  // namespace ptqrm
