// metrology.hpp - quantum Fisher information of eigenstates and the
// adiabatic ground-state preparation time.

#pragma once

#include "ptqrm/approx.hpp"
#include "ptqrm/model.hpp"

#include <functional>
#include <string>
#include <vector>

namespace ptqrm {

// lambda -> state vector (any normalization; qfi_numeric normalizes).
using StateProvider = std::function<Eigen::VectorXcd(double)>;

enum class QfiNormalization {
  fubini_study,  // <d psi|d psi> - |<d psi|psi>|^2, the convention of the closed forms
  standard       // 4 x fubini_study
};

struct QfiOptions {
  double step = -1.0;              // finite-difference step; <= 0 selects 1e-4 (1 + |lambda|)
  QfiNormalization normalization = QfiNormalization::fubini_study;
  double richardson_tol = 1e-4;    // relative agreement required between h and h/2
  double min_overlap = 0.5;        // phase alignment fails below this |<psi(l0)|psi(l0 +- h)>|
};

struct QfiEstimate {
  double value = 0.0;   // Richardson-extrapolated
  double coarse = 0.0;  // step h
  double fine = 0.0;    // step h/2
  bool consistent = true;
};

// Throws PhaseAlignmentFailed when a neighbouring state is nearly orthogonal
// to the central one (the provider is discontinuous there, e.g. across an EP).
QfiEstimate qfi_numeric(const StateProvider& provider, double lambda0, const QfiOptions& opts = {});

// Closed forms in the fubini_study normalization. Throw AtEP within 1e-12 of
// the exceptional point.
double qfi_nhtls_analytic(double delta, double epsilon);
double qfi_ptqrm_aa_analytic(double delta, double epsilon, double g);

// ---------------------------------------------------------------- state providers

enum class QfiParameter { g, epsilon };
enum class EigenSide { right, left };

ModelParams with_parameter(ModelParams p, QfiParameter which, double value);

// Exact eigenstate number state_index (model-core ordering) of the model with
// the chosen parameter set to lambda. Negative lambda maps to |lambda| through
// the photon-parity (g) or sigma_x-parity (eps) symmetry, so central
// differences work at lambda = 0.
StateProvider exact_state_provider(const ModelParams& base, QfiParameter which, int state_index,
                                   const TruncationConfig& trunc, EigenSide side = EigenSide::right);

// AA state of manifold m on the Fock basis.
StateProvider aa_state_provider(const ModelParams& base, QfiParameter which, int m, Branch branch,
                                int n_fock);

// Qubit-only eigenstate of -(delta/2) sx + (i eps/2) sz, closed form, as a 2-vector.
// plus is the root -(1/2) sqrt(delta^2 - eps^2) (principal branch).
Eigen::VectorXcd nhtls_state(double delta, double epsilon, Branch branch = Branch::plus);
StateProvider nhtls_state_provider(double delta, Branch branch = Branch::plus);

// ---------------------------------------------------------------- curves and surfaces

enum class QfiMethod { numeric_exact, numeric_aa, numeric_nhtls, analytic_nhtls, analytic_ptqrm_aa };

std::string to_string(QfiMethod m);
std::string to_string(QfiParameter p);

struct QfiResult {
  QfiParameter parameter = QfiParameter::g;
  std::vector<double> grid;
  std::vector<double> values;  // NaN where masked
  std::vector<bool> masked;
  int state_index = 0;
  QfiMethod method = QfiMethod::numeric_exact;
};

// Exact numeric QFI along a grid of the chosen parameter; points where the
// derivative cannot be formed (phase alignment, defective eigensystem) are masked.
QfiResult qfi_curve(const ModelParams& base, QfiParameter which, const std::vector<double>& grid,
                    int state_index, const TruncationConfig& trunc, const QfiOptions& opts = {});

enum class QfiReference { hermitian, nhtls };

struct QfiSurface {
  std::vector<double> g_grid;
  std::vector<double> eps_grid;
  QfiParameter parameter = QfiParameter::epsilon;
  QfiReference reference = QfiReference::nhtls;
  Eigen::MatrixXd difference;                      // rows: eps, cols: g; NaN where masked
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> mask;
  int masked_cells = 0;
};

// F_model - F_reference over (g, eps). Cells within mask_cells grid cells of a
// PT phase change of either model are masked. Cells are shared among `workers` threads.
QfiSurface qfi_surface(double delta, const std::vector<double>& g_grid,
                       const std::vector<double>& eps_grid, int state_index, QfiReference reference,
                       QfiParameter which, const TruncationConfig& trunc, int mask_cells = 2,
                       const QfiOptions& opts = {}, int workers = 1);

// ---------------------------------------------------------------- preparation time

using GapFunction = std::function<double(double)>;

struct PrepTimeOptions {
  double tol = 1e-12;
  unsigned max_depth = 15;
  double gap_floor = 1e-10;
  // a sampled minimum refined below closure_rel * (largest sampled gap) counts
  // as a crossing; eigenvalues near an EP are only good to ~sqrt(machine eps)
  double closure_rel = 1e-6;
  int samples = 64;  // gap samples recorded on a uniform grid over [0, lambda_c]
};

struct PrepTimeResult {
  double lambda_c = 0.0;
  double time = 0.0;            // integral of 1 / gap over [0, lambda_c]
  double error_estimate = 0.0;
  std::vector<double> sample_lambda;
  std::vector<double> sample_gap;
};

// Throws GapClosed when the gap drops below gap_floor inside the interval.
PrepTimeResult prep_time(const GapFunction& gap, double lambda_c, const PrepTimeOptions& opts = {});

// sqrt|delta^2 - eps^2| as a function of eps.
GapFunction nhtls_gap(double delta);

// |E_1 - E_0| of the exact spectrum as a function of the chosen parameter.
GapFunction exact_gap(const ModelParams& base, QfiParameter which, const TruncationConfig& trunc);

// |E- - E+| of the ground AA pair.
GapFunction aa_gap(const ModelParams& base, QfiParameter which);

}  // namespace ptqrm
