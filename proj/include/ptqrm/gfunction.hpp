// gfunction.hpp - Bogoliubov-operator series, G-functions and exceptional points.
//
// Coefficients are stored with their coupling weight folded in: the tables
// hold e_n g^n, f_n g^n, c_n g^n, d_n g^n. The raw f_n grow like (2g)^-n and
// overflow for small g, while the weighted sequence decays for every g and is
// exactly what the G-function sums.

#pragma once

#include "ptqrm/model.hpp"

#include <optional>
#include <vector>

namespace ptqrm {

struct CoefficientTables {
  std::vector<cplx> e, f;  // A+ branch (bias +beta/2)
  std::vector<cplx> c, d;  // A- branch (bias -beta/2)
  int n_used = 0;
  double tail = 0.0;  // largest magnitude among the last retained terms
};

struct SeriesBranch {
  std::vector<cplx> upper;  // e_n g^n  (or d_n g^n on the minus branch)
  std::vector<cplx> lower;  // f_n g^n  (or c_n g^n)
  cplx upper_sum{0.0, 0.0};
  cplx lower_sum{0.0, 0.0};
  int n_used = 0;
  double tail = 0.0;
};

// sign = +1 builds (e, f) with +beta/2, sign = -1 builds (d, c) with -beta/2.
// Throws PoleDenominator when a denominator n - g^2 +- beta/2 - E vanishes
// (|.| < 1e-12) and SeriesNotConverged when n_series is exhausted.
SeriesBranch series_branch(ComplexEnergy E, const ModelParams& params,
                           const TruncationConfig& trunc, int sign);

inline SeriesBranch series_plus(ComplexEnergy E, const ModelParams& p, const TruncationConfig& t) {
  return series_branch(E, p, t, +1);
}
inline SeriesBranch series_minus(ComplexEnergy E, const ModelParams& p, const TruncationConfig& t) {
  return series_branch(E, p, t, -1);
}

CoefficientTables coefficient_tables(ComplexEnergy E, const ModelParams& params,
                                     const TruncationConfig& trunc);

// sum(e) sum(d) - sum(f) sum(c)
cplx g_complex(ComplexEnergy E, const ModelParams& params, const TruncationConfig& trunc);

// |sum(e)|^2 - |sum(f)|^2 for imaginary bias; for a real bias all
// coefficients are real on the real axis and the real part of g_complex is returned.
double g_real(double E, const ModelParams& params, const TruncationConfig& trunc);

struct GEvaluation {
  ComplexEnergy E;
  cplx g_complex;
  std::optional<double> g_real;  // only when Im E == 0
  cplx dG_dE;
};

GEvaluation evaluate_g(ComplexEnergy E, const ModelParams& params, const TruncationConfig& trunc);

// Central difference with step 1e-6 (1 + |E|).
cplx g_derivative(ComplexEnergy E, const ModelParams& params, const TruncationConfig& trunc);

// ---------------------------------------------------------------- zero finding

struct EnergyRegion {
  double re_min = -0.5, re_max = 4.5;
  double im_min = -0.6, im_max = 0.6;
};

struct ZeroScanOptions {
  int n_re = 400;
  int n_im = 200;
  double tol = 1e-8;          // accepted |G| after refinement
  double percentile = 0.10;   // seeds: local minima of ln|G|^2 below this quantile
  double merge_tol = 1e-8;
  int max_newton = 60;
  bool keep_grid = false;
};

struct ZeroScanResult {
  std::vector<ComplexEnergy> zeros;  // sorted by (Re, Im)
  int seeds = 0;
  int diverged = 0;                 // seeds dropped: no convergence or left the region
  Eigen::MatrixXd log_abs_g2;       // n_im x n_re, filled when keep_grid
};

ZeroScanResult find_zeros_complex(const EnergyRegion& region, const ModelParams& params,
                                  const TruncationConfig& trunc, const ZeroScanOptions& opts = {});

struct RealZero {
  double E;
  int multiplicity;  // 1 for a sign change, 2 for a tangency
  double residual;   // |G| at E
};

struct RealZeroOptions {
  int samples = 4000;
  double xtol = 1e-12;
  double tangency_tol = 1e-6;
};

std::vector<RealZero> find_zeros_real(double e_min, double e_max, const ModelParams& params,
                                      const TruncationConfig& trunc,
                                      const RealZeroOptions& opts = {});

// ---------------------------------------------------------------- exceptional points

enum class EpControl { g, epsilon };

struct EpSearch {
  EpControl control = EpControl::g;
  double lo = 0.0;  // control bracket; the pair must be real at one end and complex at the other
  double hi = 1.0;
  int pair = 0;     // 0 = ground pair (ED states 0 and 1), k = states 2k and 2k+1
};

struct EPLocation {
  double control = 0.0;  // g_ep or eps_ep
  double E_ep = 0.0;
  int manifold_hint = 0;
  double residual_g = 0.0;
  double residual_dg = 0.0;
};

// Solves G = dG/dE = 0 on the real axis for (E, control). The coarse stage
// bisects the control on the sign of G at its critical point between the pair;
// a two-variable Newton step polishes the result.
// Throws NoBracket when the pair does not merge inside [lo, hi].
EPLocation locate_ep(const ModelParams& params, const EpSearch& search,
                     const TruncationConfig& trunc = {});

// Exceptional point predicted at the adiabatic level for the ground pair:
// eps = delta exp(-2 g^2), i.e. g = sqrt(ln(delta/eps)/2).
double aa_ground_ep_coupling(double delta, double epsilon);

}  // namespace ptqrm
