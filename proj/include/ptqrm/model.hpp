// model.hpp - PT-symmetric quantum Rabi Hamiltonian on a truncated
// qubit (x) Fock basis, and the exact-diagonalization oracle.
//
// Basis ordering (shared by every module):
//   index(q, n) = q * (n_fock + 1) + n
// with q = 0 the sigma_z = +1 (upper) qubit level, q = 1 the sigma_z = -1
// level, and n = 0..n_fock the photon number. The qubit index is slowest.

#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <complex>
#include <vector>

namespace ptqrm {

using cplx = std::complex<double>;
using ComplexEnergy = cplx;

enum class BiasKind {
  imaginary,  // +i*eps/2 sigma_z  (PT-symmetric model)
  real        // +eps/2 sigma_z    (Hermitian asymmetric Rabi model)
};

struct ModelParams {
  double delta = 0.5;
  double epsilon = 0.0;
  double g = 0.0;
  double omega = 1.0;
  BiasKind bias = BiasKind::imaginary;

  // Throws ConfigError when delta, epsilon, g < 0 or omega <= 0, or any is non-finite.
  void validate() const;

  // Same model expressed in units of the cavity frequency (omega = 1).
  ModelParams in_cavity_units() const;

  cplx bias_amplitude() const {
    return bias == BiasKind::imaginary ? cplx(0.0, epsilon) : cplx(epsilon, 0.0);
  }
};

struct TruncationConfig {
  int n_fock = 60;          // photon cutoff N
  int n_series = 200;       // hard cap on series terms
  double series_tol = 1e-14;
  double eig_tol = 1e-8;
  double cond_limit = 1e10; // eigenvector-matrix conditioning before DefectiveMatrix

  void validate() const;
};

inline int basis_dim(int n_fock) { return 2 * (n_fock + 1); }
inline int basis_index(int qubit, int photon, int n_fock) {
  return qubit * (n_fock + 1) + photon;
}

// -(delta/2) sx + (beta/2) sz + omega a^dag a + g (a^dag + a) sz,
// beta = i*eps or eps depending on bias kind.
Eigen::SparseMatrix<cplx> build_hamiltonian_sparse(const ModelParams& params,
                                                   const TruncationConfig& trunc);
Eigen::MatrixXcd build_hamiltonian(const ModelParams& params, const TruncationConfig& trunc);

// sigma_z on the same basis (diagonal +1 / -1 blocks).
Eigen::VectorXd sigma_z_diagonal(int n_fock);

struct EigenPair {
  ComplexEnergy energy;
  Eigen::VectorXcd right;  // <right|right> = 1
  Eigen::VectorXcd left;   // <left|right> = 1
  double cond = 1.0;       // eigenvalue condition number ||left|| ||right|| / |<left|right>|
};

struct Eigensystem {
  std::vector<EigenPair> pairs;
  double cond = 1.0;  // 2-norm condition number of the right-eigenvector matrix

  std::size_t size() const { return pairs.size(); }
  Eigen::VectorXcd energies() const;
  Eigen::MatrixXcd right_matrix() const;
  Eigen::MatrixXcd left_matrix() const;
};

// Full eigensystem of a square matrix. Left vectors are the (conjugated) rows
// of the inverse right-vector matrix, so <left_m|right_n> = delta_mn by
// construction. Sorted by ascending real part; (near-)equal real parts are
// ordered by ascending imaginary part.
// Throws DefectiveMatrix when cond exceeds cond_limit.
Eigensystem exact_diagonalize(const Eigen::MatrixXcd& H, double cond_limit = 1e10);

Eigensystem diagonalize(const ModelParams& params, const TruncationConfig& trunc);

// Reorders energies with the same (Re, then Im) rule as exact_diagonalize;
// returns the permutation.
std::vector<int> spectral_order(const Eigen::VectorXcd& energies, double tie_tol = 1e-9);

struct ConvergedEigensystem {
  Eigensystem system;
  int n_fock = 0;
  double max_shift = 0.0;  // largest change of an eigenvalue below e_cut on the last N -> N+20 step
};

// Raises n_fock from trunc.n_fock in steps of 20 until every eigenvalue with
// Re E < e_cut moves by less than trunc.eig_tol; throws NumericalError if
// n_fock_max is reached first.
ConvergedEigensystem converged_diagonalize(const ModelParams& params, TruncationConfig trunc,
                                           double e_cut = 8.0, int n_fock_max = 400);

}  // namespace ptqrm
