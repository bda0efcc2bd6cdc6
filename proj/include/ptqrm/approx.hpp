// approx.hpp - displaced-oscillator overlaps and the adiabatic (AA) and
// corrected adiabatic (CAA) eigenpairs.
//
// Manifold m pairs |m>_{A+} (upper qubit level) with |m>_{A-} (lower level),
// |n>_{A+-} = D(-+g)|n>. Approximate states are
//   upper = sum_k u_k |k>_{A+},   lower = sum_k (-1)^k v_k |k>_{A-}
// and (u, v) solve the E-independent block
//   [ diag(k - g^2 + beta/2)   -K          ] [u]     [u]
//   [ -K                       diag(k - g^2 - beta/2) ] [v] = E [v]
// with the signed coupling K_kl = (-1)^min(k,l) D_kl.

#pragma once

#include "ptqrm/model.hpp"

#include <vector>

namespace ptqrm {

// Associated Laguerre polynomial L_m^alpha(x) by the three-term recurrence in m.
double laguerre_assoc(int m, int alpha, double x);

// (delta/2) (2g)^(n-m) e^(-2g^2) sqrt(m!/n!) L_m^(n-m)(4g^2) for n >= m,
// symmetric in (m, n). Factorials through lgamma.
double overlap_D(int m, int n, double delta, double g);

// (-1)^min(m,n) overlap_D(m, n, delta, g)
double manifold_coupling(int m, int n, double delta, double g);

struct OverlapTable {
  Eigen::MatrixXd D;  // (M+1) x (M+1)
  double delta = 0.0;
  double g = 0.0;
};

OverlapTable overlap_table(int m_max, double delta, double g);

enum class Branch { plus, minus };  // plus: E+ (lower root), minus: E-

struct ApproxState {
  int m = 0;
  Branch branch = Branch::plus;
  std::vector<int> manifolds;  // participating manifold indices, ascending
  Eigen::VectorXcd u;          // upper-sector coefficients, one per manifold
  Eigen::VectorXcd v;          // lower-sector coefficients
  cplx norm{1.0, 0.0};         // factor that brought sum |u|^2 + |v|^2 to 1
  ComplexEnergy energy;
  bool ep_degenerate = false;  // the two roots of the pair coincide
};

struct ApproxPair {
  ApproxState plus;
  ApproxState minus;
};

// Closed-form AA roots E+- = m - g^2 -+ (1/2) sqrt(4 D_mm^2 + beta^2), beta = i eps
// (or eps for a real bias), principal square root.
std::pair<ComplexEnergy, ComplexEnergy> aa_energies(int m, const ModelParams& params);

ApproxPair aa_pair(int m, const ModelParams& params);

struct CaaBlock {
  Eigen::MatrixXcd matrix;  // 6x6 for m > 0, 4x4 for m = 0
  int m = 0;
  std::vector<int> manifolds;
};

// Block over manifolds {m-1, m, m+1} (dropping negatives). The determinant
// condition det(block - E) = 0 is the CAA secular equation.
CaaBlock caa_block(int m, const ModelParams& params);

// All roots of the block, sorted by (Re, Im).
Eigen::VectorXcd caa_roots(const CaaBlock& block);

struct CaaOptions {
  double selection_margin = 1e-6;
};

// Picks the two roots nearest to the AA pair. Throws SelectionAmbiguous when
// another choice of two roots is within selection_margin of the best match.
ApproxPair caa_pair(int m, const ModelParams& params, const CaaOptions& opts = {});

// Columns n = 0..n_max of the displaced number states |n>_{A sign}, sign = +1
// for A+ (coherent amplitude -g) and -1 for A-, expanded on photon numbers
// 0..n_fock. Throws TruncationTail when the weight beyond n_fock exceeds tail_tol.
Eigen::MatrixXd displaced_number_states(double g, int sign, int n_max, int n_fock,
                                        double tail_tol = 1e-12);

// Reconstructs the approximate state on the model-core basis, unit norm.
Eigen::VectorXcd state_to_fock(const ApproxState& state, const ModelParams& params, int n_fock);

}  // namespace ptqrm
