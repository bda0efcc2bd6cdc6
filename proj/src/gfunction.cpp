#include "ptqrm/gfunction.hpp"

#include "ptqrm/errors.hpp"

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ptqrm {

namespace {

constexpr double kPoleEps = 1e-12;
constexpr int kTailTerms = 5;

cplx pole_checked(cplx den, int n, ComplexEnergy E) {
  if (std::abs(den) < kPoleEps) {
    std::ostringstream os;
    os << "pole denominator at n=" << n << " for E=" << E;
    throw PoleDenominator(os.str());
  }
  return den;
}

}  // namespace

SeriesBranch series_branch(ComplexEnergy E, const ModelParams& params,
                           const TruncationConfig& trunc, int sign) {
  params.validate();
  trunc.validate();
  const ModelParams p = params.in_cavity_units();
  const ComplexEnergy En = E / params.omega;
  const double g2 = p.g * p.g;
  const double d2 = p.delta * p.delta;
  const cplx half_bias = 0.5 * static_cast<double>(sign) * p.bias_amplitude();

  SeriesBranch out;
  out.upper.reserve(64);
  out.lower.reserve(64);

  // Weighted three-term recursion for t_n = f_n g^n:
  //   (m+1) t_{m+1} = (1/2) A_m t_m - g^2 t_{m-1}
  //   A_m = m + 3g^2 - beta/2 - E - delta^2 / (4 (m - g^2 + beta/2 - E))
  //   e_n g^n = (delta/2) t_n / (n - g^2 + beta/2 - E)
  cplx t_prev(0.0, 0.0);
  cplx t_cur(1.0, 0.0);
  double scale = 0.0;
  int small_run = 0;
  for (int m = 0; m < trunc.n_series; ++m) {
    const cplx den = pole_checked(static_cast<double>(m) - g2 + half_bias - En, m, E);
    const cplx e_term = 0.5 * p.delta * t_cur / den;
    out.lower.push_back(t_cur);
    out.upper.push_back(e_term);
    out.lower_sum += t_cur;
    out.upper_sum += e_term;

    const double mag = std::max(std::abs(t_cur), std::abs(e_term));
    scale = std::max({scale, mag, std::abs(out.lower_sum), std::abs(out.upper_sum)});
    small_run = mag < trunc.series_tol * scale ? small_run + 1 : 0;
    if (small_run >= kTailTerms) {
      out.n_used = m + 1;
      double tail = 0.0;
      for (int k = m + 1 - kTailTerms; k <= m; ++k) {
        tail = std::max({tail, std::abs(out.lower[static_cast<std::size_t>(k)]),
                         std::abs(out.upper[static_cast<std::size_t>(k)])});
      }
      out.tail = tail;
      return out;
    }

    const cplx a = static_cast<double>(m) + 3.0 * g2 - half_bias - En - d2 / (4.0 * den);
    const cplx t_next = (0.5 * a * t_cur - g2 * t_prev) / static_cast<double>(m + 1);
    t_prev = t_cur;
    t_cur = t_next;
  }
  std::ostringstream os;
  os << "series did not converge within " << trunc.n_series << " terms at E=" << E;
  throw SeriesNotConverged(os.str());
}

CoefficientTables coefficient_tables(ComplexEnergy E, const ModelParams& params,
                                     const TruncationConfig& trunc) {
  SeriesBranch plus = series_plus(E, params, trunc);
  SeriesBranch minus = series_minus(E, params, trunc);
  CoefficientTables t;
  t.e = std::move(plus.upper);
  t.f = std::move(plus.lower);
  t.d = std::move(minus.upper);
  t.c = std::move(minus.lower);
  t.n_used = std::max(plus.n_used, minus.n_used);
  t.tail = std::max(plus.tail, minus.tail);
  return t;
}

cplx g_complex(ComplexEnergy E, const ModelParams& params, const TruncationConfig& trunc) {
  const SeriesBranch plus = series_plus(E, params, trunc);
  const SeriesBranch minus = series_minus(E, params, trunc);
  return plus.upper_sum * minus.upper_sum - plus.lower_sum * minus.lower_sum;
}

double g_real(double E, const ModelParams& params, const TruncationConfig& trunc) {
  if (params.bias == BiasKind::real) return g_complex(E, params, trunc).real();
  const SeriesBranch plus = series_plus(E, params, trunc);
  return std::norm(plus.upper_sum) - std::norm(plus.lower_sum);
}

cplx g_derivative(ComplexEnergy E, const ModelParams& params, const TruncationConfig& trunc) {
  const double h = 1e-6 * (1.0 + std::abs(E));
  return (g_complex(E + h, params, trunc) - g_complex(E - h, params, trunc)) / (2.0 * h);
}

GEvaluation evaluate_g(ComplexEnergy E, const ModelParams& params, const TruncationConfig& trunc) {
  GEvaluation ev;
  ev.E = E;
  ev.g_complex = g_complex(E, params, trunc);
  if (E.imag() == 0.0) ev.g_real = g_real(E.real(), params, trunc);
  ev.dG_dE = g_derivative(E, params, trunc);
  return ev;
}

// ---------------------------------------------------------------- complex zeros

ZeroScanResult find_zeros_complex(const EnergyRegion& region, const ModelParams& params,
                                  const TruncationConfig& trunc, const ZeroScanOptions& opts) {
  if (!(region.re_max > region.re_min) || !(region.im_max > region.im_min)) {
    throw ConfigError("find_zeros_complex: empty region");
  }
  if (opts.n_re < 3 || opts.n_im < 3) throw ConfigError("find_zeros_complex: grid too coarse");

  const int nx = opts.n_re;
  const int ny = opts.n_im;
  const double dx = (region.re_max - region.re_min) / (nx - 1);
  const double dy = (region.im_max - region.im_min) / (ny - 1);
  const double inf = std::numeric_limits<double>::infinity();

  Eigen::MatrixXd lg(ny, nx);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const ComplexEnergy E(region.re_min + i * dx, region.im_min + j * dy);
      double v = inf;
      try {
        v = std::log(std::norm(g_complex(E, params, trunc)));
      } catch (const PoleDenominator&) {
      }
      lg(j, i) = v;
    }
  }

  // |G| falls by orders of magnitude along Re E, so the percentile is taken
  // on ln|G|^2 relative to the median of its own column.
  Eigen::MatrixXd rel(ny, nx);
  std::vector<double> finite;
  finite.reserve(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
  std::vector<double> col;
  for (int i = 0; i < nx; ++i) {
    col.clear();
    for (int j = 0; j < ny; ++j) {
      if (std::isfinite(lg(j, i))) col.push_back(lg(j, i));
    }
    double med = 0.0;
    if (!col.empty()) {
      auto mid = col.begin() + static_cast<std::ptrdiff_t>(col.size() / 2);
      std::nth_element(col.begin(), mid, col.end());
      med = *mid;
    }
    for (int j = 0; j < ny; ++j) {
      rel(j, i) = lg(j, i) - med;
      if (std::isfinite(rel(j, i))) finite.push_back(rel(j, i));
    }
  }

  ZeroScanResult out;
  if (finite.empty()) return out;
  auto nth = finite.begin() +
             static_cast<std::ptrdiff_t>(opts.percentile * static_cast<double>(finite.size() - 1));
  std::nth_element(finite.begin(), nth, finite.end());
  const double threshold = *nth;

  std::vector<ComplexEnergy> seeds;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double v = lg(j, i);
      if (!(rel(j, i) <= threshold)) continue;
      bool is_min = true;
      for (int dj = -1; dj <= 1 && is_min; ++dj) {
        for (int di = -1; di <= 1; ++di) {
          if (di == 0 && dj == 0) continue;
          const int jj = j + dj;
          const int ii = i + di;
          if (jj < 0 || jj >= ny || ii < 0 || ii >= nx) continue;
          if (lg(jj, ii) < v) {
            is_min = false;
            break;
          }
        }
      }
      if (is_min) seeds.emplace_back(region.re_min + i * dx, region.im_min + j * dy);
    }
  }
  out.seeds = static_cast<int>(seeds.size());

  const double margin = 1e-9;
  for (ComplexEnergy E : seeds) {
    bool ok = false;
    try {
      for (int it = 0; it < opts.max_newton; ++it) {
        const cplx G = g_complex(E, params, trunc);
        const cplx dG = g_derivative(E, params, trunc);
        if (dG == cplx(0.0, 0.0)) break;
        const cplx step = G / dG;
        E -= step;
        if (!std::isfinite(E.real()) || !std::isfinite(E.imag())) break;
        if (std::abs(step) < 1e-14 * (1.0 + std::abs(E))) {
          ok = std::abs(g_complex(E, params, trunc)) < opts.tol;
          break;
        }
      }
    } catch (const NumericalError&) {
      ok = false;
    }
    if (!ok) {
      ++out.diverged;
      continue;
    }
    if (E.real() < region.re_min - margin || E.real() > region.re_max + margin ||
        E.imag() < region.im_min - margin || E.imag() > region.im_max + margin) {
      continue;  // converged to a zero outside the scanned window
    }
    const bool dup = std::any_of(out.zeros.begin(), out.zeros.end(), [&](const ComplexEnergy& z) {
      return std::abs(z - E) < opts.merge_tol;
    });
    if (!dup) out.zeros.push_back(E);
  }

  Eigen::VectorXcd z(static_cast<Eigen::Index>(out.zeros.size()));
  for (std::size_t k = 0; k < out.zeros.size(); ++k) z(static_cast<Eigen::Index>(k)) = out.zeros[k];
  const std::vector<int> order = spectral_order(z);
  std::vector<ComplexEnergy> sorted;
  sorted.reserve(out.zeros.size());
  for (int k : order) sorted.push_back(out.zeros[static_cast<std::size_t>(k)]);
  out.zeros = std::move(sorted);
  if (opts.keep_grid) out.log_abs_g2 = std::move(lg);
  return out;
}

// ---------------------------------------------------------------- real zeros

std::vector<RealZero> find_zeros_real(double e_min, double e_max, const ModelParams& params,
                                      const TruncationConfig& trunc, const RealZeroOptions& opts) {
  if (!(e_max > e_min)) throw ConfigError("find_zeros_real: empty interval");
  if (opts.samples < 3) throw ConfigError("find_zeros_real: too few samples");

  const double nan = std::numeric_limits<double>::quiet_NaN();
  auto G = [&](double x) {
    try {
      return g_real(x, params, trunc);
    } catch (const PoleDenominator&) {
      return nan;
    }
  };

  const int n = opts.samples;
  const double h = (e_max - e_min) / (n - 1);
  std::vector<double> xs(static_cast<std::size_t>(n));
  std::vector<double> ys(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    xs[static_cast<std::size_t>(i)] = e_min + i * h;
    ys[static_cast<std::size_t>(i)] = G(xs[static_cast<std::size_t>(i)]);
  }

  std::vector<RealZero> out;
  for (int i = 0; i + 1 < n; ++i) {
    const double ya = ys[static_cast<std::size_t>(i)];
    const double yb = ys[static_cast<std::size_t>(i + 1)];
    if (!std::isfinite(ya) || !std::isfinite(yb)) continue;
    const double xa = xs[static_cast<std::size_t>(i)];
    const double xb = xs[static_cast<std::size_t>(i + 1)];
    if (ya == 0.0) {
      out.push_back({xa, 1, 0.0});
      continue;
    }
    if (ya * yb < 0.0) {
      boost::uintmax_t iters = 200;
      auto tol = [&](double a, double b) { return std::abs(b - a) < opts.xtol; };
      const auto [lo, hi] = boost::math::tools::toms748_solve(G, xa, xb, ya, yb, tol, iters);
      const double root = 0.5 * (lo + hi);
      const double r = std::abs(G(root));
      // A sign change through a pole converges onto the pole; real zeros do not grow.
      if (std::isfinite(r) && r <= std::min(std::abs(ya), std::abs(yb))) {
        out.push_back({root, 1, r});
      }
    }
  }

  // Tangencies: interior local minima of |G| without a sign change.
  for (int i = 1; i + 1 < n; ++i) {
    const double y0 = ys[static_cast<std::size_t>(i - 1)];
    const double y1 = ys[static_cast<std::size_t>(i)];
    const double y2 = ys[static_cast<std::size_t>(i + 1)];
    if (!std::isfinite(y0) || !std::isfinite(y1) || !std::isfinite(y2)) continue;
    if (y0 * y1 <= 0.0 || y1 * y2 <= 0.0) continue;
    if (!(std::abs(y1) <= std::abs(y0) && std::abs(y1) <= std::abs(y2))) continue;
    const double s = y1 > 0.0 ? 1.0 : -1.0;
    auto f = [&](double x) {
      const double v = G(x);
      return std::isfinite(v) ? s * v : std::numeric_limits<double>::max();
    };
    boost::uintmax_t iters = 200;
    const auto [xm, fm] = boost::math::tools::brent_find_minima(
        f, xs[static_cast<std::size_t>(i - 1)], xs[static_cast<std::size_t>(i + 1)],
        std::numeric_limits<double>::digits, iters);
    if (std::abs(fm) < opts.tangency_tol) out.push_back({xm, 2, std::abs(fm)});
  }

  std::sort(out.begin(), out.end(), [](const RealZero& a, const RealZero& b) { return a.E < b.E; });
  return out;
}

// ---------------------------------------------------------------- exceptional points

namespace {

ModelParams with_control(ModelParams p, EpControl control, double value) {
  (control == EpControl::g ? p.g : p.epsilon) = value;
  return p;
}

struct PairWindow {
  double lo = 0.0;
  double hi = 0.0;
  double center = 0.0;
  bool real_pair = false;
};

// Unbroken: the segment between the two real zeros, which holds exactly one
// extremum of G. Broken: a segment around the common real part, sized by the
// imaginary splitting and kept clear of neighbouring levels.
PairWindow pair_window(const ModelParams& p, int pair, const TruncationConfig& trunc) {
  const Eigensystem es = exact_diagonalize(build_hamiltonian(p, trunc),
                                           std::numeric_limits<double>::infinity());
  const int a = 2 * pair;
  const int b = 2 * pair + 1;
  if (b + 1 >= static_cast<int>(es.size())) throw ConfigError("locate_ep: pair index beyond truncation");
  auto E = [&](int k) { return es.pairs[static_cast<std::size_t>(k)].energy; };
  PairWindow w;
  w.center = 0.5 * (E(a).real() + E(b).real());
  w.real_pair = std::abs(E(a).imag()) < 1e-8 && std::abs(E(b).imag()) < 1e-8;
  if (w.real_pair) {
    w.lo = E(a).real();
    w.hi = E(b).real();
  } else {
    double room = E(b + 1).real() - w.center;
    if (a > 0) room = std::min(room, w.center - E(a - 1).real());
    const double half = std::min(0.5 * room, 2.0 * std::abs(E(a).imag()) + 1e-6);
    w.lo = w.center - half;
    w.hi = w.center + half;
  }
  return w;
}

double critical_value(const ModelParams& p, double s, const PairWindow& w,
                      const TruncationConfig& trunc, double* where = nullptr) {
  auto f = [&](double x) { return -s * g_real(x, p, trunc); };
  boost::uintmax_t iters = 200;
  const auto [xm, fm] = boost::math::tools::brent_find_minima(
      f, w.lo, w.hi, std::numeric_limits<double>::digits, iters);
  if (where) *where = xm;
  return -fm;
}

}  // namespace

EPLocation locate_ep(const ModelParams& params, const EpSearch& search,
                     const TruncationConfig& trunc) {
  params.validate();
  if (!(search.hi > search.lo) || search.lo < 0.0) throw ConfigError("locate_ep: invalid bracket");
  if (search.pair < 0) throw ConfigError("locate_ep: pair index must be >= 0");

  const ModelParams p_lo = with_control(params, search.control, search.lo);
  const ModelParams p_hi = with_control(params, search.control, search.hi);
  const PairWindow w_lo = pair_window(p_lo, search.pair, trunc);
  const PairWindow w_hi = pair_window(p_hi, search.pair, trunc);
  if (w_lo.real_pair == w_hi.real_pair) {
    throw NoBracket("locate_ep: pair is " + std::string(w_lo.real_pair ? "real" : "complex") +
                    " at both ends of the bracket");
  }

  // Orient G so it is positive between the two real zeros on the unbroken side.
  const ModelParams& p_unbroken = w_lo.real_pair ? p_lo : p_hi;
  const PairWindow& w_unbroken = w_lo.real_pair ? w_lo : w_hi;
  const double s = g_real(w_unbroken.center, p_unbroken, trunc) > 0.0 ? 1.0 : -1.0;

  auto phi = [&](double c) {
    const ModelParams p = with_control(params, search.control, c);
    return critical_value(p, s, pair_window(p, search.pair, trunc), trunc);
  };
  const double f_lo = phi(search.lo);
  const double f_hi = phi(search.hi);
  if (!(f_lo * f_hi < 0.0)) throw NoBracket("locate_ep: critical value does not change sign");

  boost::uintmax_t iters = 200;
  auto tol = [](double a, double b) { return std::abs(b - a) < 1e-14 * (1.0 + std::abs(a)); };
  const auto [c_a, c_b] =
      boost::math::tools::toms748_solve(phi, search.lo, search.hi, f_lo, f_hi, tol, iters);
  double c = 0.5 * (c_a + c_b);
  double E = 0.0;
  {
    const ModelParams p = with_control(params, search.control, c);
    critical_value(p, s, pair_window(p, search.pair, trunc), trunc, &E);
  }

  // Newton polish on (E, c) for F = (G, dG/dE).
  auto Gf = [&](double x, double cc) { return g_real(x, with_control(params, search.control, cc), trunc); };
  auto dGf = [&](double x, double cc) {
    const double h = 1e-6 * (1.0 + std::abs(x));
    return (Gf(x + h, cc) - Gf(x - h, cc)) / (2.0 * h);
  };
  auto residual = [&](double x, double cc) { return std::hypot(Gf(x, cc), dGf(x, cc)); };
  double res = residual(E, c);
  for (int it = 0; it < 8 && res > 1e-14; ++it) {
    const double he = 1e-4 * (1.0 + std::abs(E));
    const double hc = 1e-6 * (1.0 + std::abs(c));
    const double F1 = Gf(E, c);
    const double F2 = dGf(E, c);
    const double J11 = F2;
    const double J12 = (Gf(E, c + hc) - Gf(E, c - hc)) / (2.0 * hc);
    const double J21 = (Gf(E + he, c) - 2.0 * F1 + Gf(E - he, c)) / (he * he);
    const double J22 = (dGf(E, c + hc) - dGf(E, c - hc)) / (2.0 * hc);
    const double det = J11 * J22 - J12 * J21;
    if (det == 0.0 || !std::isfinite(det)) break;
    const double dE = (F1 * J22 - F2 * J12) / det;
    const double dc = (J11 * F2 - J21 * F1) / det;
    const double r_new = residual(E - dE, c - dc);
    if (!(r_new < res)) break;
    E -= dE;
    c -= dc;
    res = r_new;
  }

  EPLocation loc;
  loc.control = c;
  loc.E_ep = E;
  loc.manifold_hint = search.pair;
  loc.residual_g = std::abs(Gf(E, c));
  loc.residual_dg = std::abs(dGf(E, c));
  return loc;
}

double aa_ground_ep_coupling(double delta, double epsilon) {
  if (!(epsilon > 0.0) || !(epsilon <= delta)) {
    throw ConfigError("aa_ground_ep_coupling: requires 0 < epsilon <= delta");
  }
  return std::sqrt(0.5 * std::log(delta / epsilon));
}

}  // namespace ptqrm
