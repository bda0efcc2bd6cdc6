#include "commands.hpp"

#include "ptqrm/approx.hpp"
#include "ptqrm/dynamics.hpp"
#include "ptqrm/errors.hpp"
#include "ptqrm/gfunction.hpp"
#include "ptqrm/metrology.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <numbers>
#include <sstream>

namespace ptqrm::cli {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double option(const RunConfig& cfg, const std::string& key, double fallback) {
  const auto it = cfg.options.find(key);
  return it == cfg.options.end() ? fallback : it->second;
}

int int_option(const RunConfig& cfg, const std::string& key, int fallback, int min_value) {
  const double v = option(cfg, key, fallback);
  if (v != std::floor(v) || v < min_value) {
    throw ConfigError("--" + key + " must be an integer >= " + std::to_string(min_value));
  }
  return static_cast<int>(v);
}

std::string choice(const RunConfig& cfg, const std::string& key, const std::string& fallback,
                   const std::vector<std::string>& allowed) {
  const auto it = cfg.choices.find(key);
  const std::string v = it == cfg.choices.end() ? fallback : it->second;
  if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
    throw ConfigError("--" + key + " does not accept '" + v + "'");
  }
  return v;
}

std::vector<std::string> methods_of(const RunConfig& cfg, const std::vector<std::string>& defaults,
                                    const std::vector<std::string>& allowed) {
  if (cfg.method.empty()) return defaults;
  if (std::find(allowed.begin(), allowed.end(), cfg.method) == allowed.end()) {
    throw ConfigError("--method " + cfg.method + " is not available for " + cfg.command);
  }
  return {cfg.method};
}

std::vector<double> values_of(const RunConfig& cfg, const std::string& parameter) {
  if (const SweepSpec* s = cfg.find_sweep(parameter)) return s->values();
  return {parameter == "g" ? cfg.model.g : cfg.model.epsilon};
}

ModelParams with_value(ModelParams p, const std::string& parameter, double v) {
  (parameter == "g" ? p.g : p.epsilon) = v;
  return p;
}

QfiParameter qfi_parameter(const std::string& name) {
  return name == "g" ? QfiParameter::g : QfiParameter::epsilon;
}

std::string fmt(double x) { return format_real(x); }

std::string label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

// ---------------------------------------------------------------- traces

struct MethodTrace {
  std::string method;
  std::string tag;
  DynamicsTrace trace;
};

std::vector<MethodTrace> run_traces(const RunConfig& cfg) {
  const auto methods = methods_of(cfg, {"ed", "aa", "caa"}, {"ed", "aa", "caa"});
  const double t_max = option(cfg, "t-max", 200.0);
  const double dt = option(cfg, "dt", 0.01);
  const int n_manifolds = int_option(cfg, "manifolds", 2, 1);
  if (!(t_max > 0.0) || !(dt > 0.0) || dt > t_max) throw ConfigError("need 0 < dt <= t-max");
  const std::vector<double> times = time_grid(t_max, dt);
  const Eigen::VectorXcd psi0 = upper_vacuum_state(cfg.trunc.n_fock);

  return parallel_map(methods.size(), [&](std::size_t k) {
    MethodTrace mt;
    mt.method = methods[k];
    if (mt.method == "ed") {
      mt.trace = evolve(cfg.model, cfg.trunc, psi0, times);
      mt.tag = mt.trace.method == EvolutionMethod::direct ? "dynamics:ed:direct-dopri5" : "dynamics:ed:spectral";
    } else {
      const ApproxMethod am = mt.method == "aa" ? ApproxMethod::aa : ApproxMethod::caa;
      mt.trace = evolve_spectral(approx_basis(am, cfg.model, cfg.trunc.n_fock, n_manifolds), psi0, times);
      mt.tag = "dynamics:" + mt.method + ":spectral";
    }
    return mt;
  });
}

}  // namespace

int worker_count() {
  const char* env = std::getenv("PTQRM_NUM_WORKERS");
  if (!env || !*env) return std::max(1u, std::thread::hardware_concurrency());
  const std::string s(env);
  if (s.find_first_not_of("0123456789") != std::string::npos || s.size() > 6 || std::stoi(s) < 1) {
    throw ConfigError("PTQRM_NUM_WORKERS must be a positive integer, got '" + s + "'");
  }
  return std::stoi(s);
}

// ---------------------------------------------------------------- spectrum

CommandResult cmd_spectrum(const RunConfig& cfg) {
  const auto methods = methods_of(cfg, {"ed", "aa", "caa"}, {"ed", "aa", "caa", "gfunc"});
  const int n_pairs = int_option(cfg, "pairs", 4, 1);
  const std::vector<double> grid = values_of(cfg, "g");

  using Rows = std::vector<std::vector<Cell>>;
  const auto blocks = parallel_map(grid.size(), [&](std::size_t i) {
    const ModelParams p = with_value(cfg.model, "g", grid[i]);
    Rows rows;
    auto add = [&](const std::string& m, int pair, int level, cplx E) {
      rows.push_back({grid[i], m, static_cast<long long>(pair), static_cast<long long>(level), E.real(), E.imag()});
    };
    for (const auto& m : methods) {
      if (m == "ed") {
        const Eigensystem es = exact_diagonalize(build_hamiltonian(p, cfg.trunc),
                                                 std::numeric_limits<double>::infinity());
        for (int k = 0; k < 2 * n_pairs && k < static_cast<int>(es.size()); ++k) {
          add(m, k / 2, k % 2, es.pairs[static_cast<std::size_t>(k)].energy);
        }
      } else if (m == "aa") {
        for (int k = 0; k < n_pairs; ++k) {
          const auto [plus, minus] = aa_energies(k, p);
          add(m, k, 0, plus);
          add(m, k, 1, minus);
        }
      } else if (m == "caa") {
        for (int k = 0; k < n_pairs; ++k) {
          const ApproxPair pr = caa_pair(k, p);
          add(m, k, 0, pr.plus.energy);
          add(m, k, 1, pr.minus.energy);
        }
      } else {
        const double shift = p.g * p.g / p.omega;
        EnergyRegion region;
        region.re_min = p.omega * (-shift - 0.5) - 0.5 * p.delta;
        region.re_max = p.omega * (n_pairs - 1 - shift + 0.25) + 0.5 * p.delta;
        region.im_max = 0.5 * p.epsilon + 0.5;
        region.im_min = -region.im_max;
        ZeroScanOptions zo;
        zo.n_re = int_option(cfg, "n-re", 200, 3);
        zo.n_im = int_option(cfg, "n-im", 100, 3);
        const auto zeros = find_zeros_complex(region, p, cfg.trunc, zo).zeros;
        for (int k = 0; k < 2 * n_pairs && k < static_cast<int>(zeros.size()); ++k) {
          add(m, k / 2, k % 2, zeros[static_cast<std::size_t>(k)]);
        }
      }
    }
    return rows;
  });

  Table t({{"g", CellKind::real}, {"method", CellKind::text}, {"pair", CellKind::integer},
           {"level", CellKind::integer}, {"re_E", CellKind::real}, {"im_E", CellKind::real}});
  for (const auto& b : blocks) {
    for (const auto& r : b) t.add_row(r);
  }
  CommandResult out;
  out.tables.emplace_back("spectrum", std::move(t));
  for (const auto& m : methods) out.methods.push_back("spectrum:" + m);
  out.notes.push_back(std::to_string(grid.size()) + " coupling values, " + std::to_string(n_pairs) + " pairs");
  return out;
}

// ---------------------------------------------------------------- G-function scans

CommandResult cmd_gscan(const RunConfig& cfg) {
  if (!cfg.sweeps.empty()) throw ConfigError("gscan works at a single point; use --g");
  EnergyRegion region;
  region.re_min = option(cfg, "re-min", region.re_min);
  region.re_max = option(cfg, "re-max", region.re_max);
  region.im_min = option(cfg, "im-min", region.im_min);
  region.im_max = option(cfg, "im-max", region.im_max);
  CommandResult out;

  if (option(cfg, "complex", 1.0) != 0.0) {
    ZeroScanOptions zo;
    zo.n_re = int_option(cfg, "n-re", 400, 3);
    zo.n_im = int_option(cfg, "n-im", 200, 3);
    zo.keep_grid = true;
    const ZeroScanResult scan = find_zeros_complex(region, cfg.model, cfg.trunc, zo);

    Table grid({{"re_E", CellKind::real}, {"im_E", CellKind::real}, {"ln_abs_G2", CellKind::real}});
    const double dx = (region.re_max - region.re_min) / (zo.n_re - 1);
    const double dy = (region.im_max - region.im_min) / (zo.n_im - 1);
    for (int j = 0; j < zo.n_im; ++j) {
      for (int i = 0; i < zo.n_re; ++i) {
        grid.add_row({region.re_min + i * dx, region.im_min + j * dy, scan.log_abs_g2(j, i)});
      }
    }
    Table zeros({{"re_E", CellKind::real}, {"im_E", CellKind::real}, {"abs_G", CellKind::real}});
    for (const auto& z : scan.zeros) zeros.add_row({z.real(), z.imag(), std::abs(g_complex(z, cfg.model, cfg.trunc))});
    out.tables.emplace_back("gscan_grid", std::move(grid));
    out.tables.emplace_back("gscan_zeros", std::move(zeros));
    out.methods.push_back("gscan:complex-grid+newton");
    out.notes.push_back(std::to_string(scan.zeros.size()) + " complex zeros from " + std::to_string(scan.seeds) + " seeds");
  }

  const int samples = int_option(cfg, "samples", 2000, 2);
  Table curve({{"E", CellKind::real}, {"G_real", CellKind::real}});
  for (int k = 0; k < samples; ++k) {
    const double E = region.re_min + (region.re_max - region.re_min) * k / (samples - 1);
    double v = kNaN;
    try {
      v = g_real(E, cfg.model, cfg.trunc);
    } catch (const PoleDenominator&) {
    }
    curve.add_row({E, v});
  }
  Table rz({{"E", CellKind::real}, {"multiplicity", CellKind::integer}, {"residual", CellKind::real}});
  for (const auto& z : find_zeros_real(region.re_min, region.re_max, cfg.model, cfg.trunc)) {
    rz.add_row({z.E, static_cast<long long>(z.multiplicity), z.residual});
  }
  out.notes.push_back(std::to_string(rz.rows.size()) + " real zeros");
  out.tables.emplace_back("greal_curve", std::move(curve));
  out.tables.emplace_back("greal_zeros", std::move(rz));
  out.methods.push_back("gscan:real-G");
  return out;
}

// ---------------------------------------------------------------- exceptional points

CommandResult cmd_ep(const RunConfig& cfg) {
  methods_of(cfg, {"gfunc"}, {"gfunc"});
  const std::string control = choice(cfg, "control", "g", {"g", "epsilon"});
  const std::string other = control == "g" ? "epsilon" : "g";
  if (cfg.find_sweep(control)) throw ConfigError("the EP control parameter cannot be swept");
  EpSearch search;
  search.control = control == "g" ? EpControl::g : EpControl::epsilon;
  search.pair = int_option(cfg, "pair", 0, 0);
  search.lo = option(cfg, "lo", control == "g" ? 0.0 : 0.0);
  search.hi = option(cfg, "hi", control == "g" ? 1.5 : cfg.model.delta + 0.5);
  const std::vector<double> grid = values_of(cfg, other);

  const auto rows = parallel_map(grid.size(), [&](std::size_t i) {
    const ModelParams p = with_value(cfg.model, other, grid[i]);
    const EPLocation ep = locate_ep(p, search, cfg.trunc);
    double aa = kNaN;
    if (search.pair == 0) {
      if (control == "epsilon") aa = p.delta * std::exp(-2.0 * p.g * p.g);
      else if (p.epsilon > 0.0 && p.epsilon < p.delta) aa = aa_ground_ep_coupling(p.delta, p.epsilon);
    }
    const ModelParams at = with_value(p, control, ep.control);
    const Eigensystem es = exact_diagonalize(build_hamiltonian(at, cfg.trunc), std::numeric_limits<double>::infinity());
    const auto& r1 = es.pairs[static_cast<std::size_t>(2 * search.pair)].right;
    const auto& r2 = es.pairs[static_cast<std::size_t>(2 * search.pair + 1)].right;
    return std::vector<Cell>{grid[i], ep.control, ep.E_ep, ep.residual_g, ep.residual_dg, aa,
                             std::abs(r1.dot(r2))};
  });

  Table t({{other, CellKind::real}, {control + "_ep", CellKind::real}, {"E_ep", CellKind::real},
           {"residual_G", CellKind::real}, {"residual_dG", CellKind::real},
           {control + "_ep_aa", CellKind::real}, {"ed_overlap", CellKind::real}});
  for (const auto& r : rows) t.add_row(r);
  CommandResult out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out.notes.push_back(other + "=" + fmt(grid[i]) + ": " + control + "_ep=" + fmt(t.real(i, control + "_ep")));
  }
  out.tables.emplace_back("ep", std::move(t));
  out.methods.push_back("ep:gfunc-simultaneous-zero");
  return out;
}

// ---------------------------------------------------------------- dynamics and emission

CommandResult cmd_dynamics(const RunConfig& cfg) {
  if (!cfg.sweeps.empty()) throw ConfigError("dynamics works at a single point; use --g");
  const auto traces = run_traces(cfg);
  Table t({{"t", CellKind::real}, {"method", CellKind::text}, {"sigma_z", CellKind::real},
           {"log_norm", CellKind::real}});
  CommandResult out;
  for (const auto& mt : traces) {
    for (std::size_t k = 0; k < mt.trace.times.size(); ++k) {
      t.add_row({mt.trace.times[k], mt.method, mt.trace.sigma_z[k], mt.trace.log_norm[k]});
    }
    out.methods.push_back(mt.tag);
  }
  out.tables.emplace_back("dynamics", std::move(t));
  return out;
}

CommandResult cmd_emission(const RunConfig& cfg) {
  if (!cfg.sweeps.empty()) throw ConfigError("emission works at a single point; use --g");
  const auto traces = run_traces(cfg);
  const double dt = option(cfg, "dt", 0.01);
  const double f_max = option(cfg, "f-max", 1.0);
  EmissionOptions eo;
  eo.window = choice(cfg, "window", "hann", {"hann", "none"}) == "hann" ? Window::hann : Window::none;
  eo.zero_pad = int_option(cfg, "zero-pad", 4, 1);

  Table trace({{"t", CellKind::real}, {"method", CellKind::text}, {"sigma_z", CellKind::real},
               {"log_norm", CellKind::real}});
  Table spec({{"freq", CellKind::real}, {"method", CellKind::text}, {"magnitude", CellKind::real}});
  Table peaks({{"method", CellKind::text}, {"position", CellKind::real}, {"height", CellKind::real},
               {"fwhm", CellKind::real}, {"bin_width", CellKind::real}, {"resolution_fwhm", CellKind::real}});
  CommandResult out;
  for (const auto& mt : traces) {
    for (std::size_t k = 0; k < mt.trace.times.size(); ++k) {
      trace.add_row({mt.trace.times[k], mt.method, mt.trace.sigma_z[k], mt.trace.log_norm[k]});
    }
    const EmissionSpectrum es = emission_spectrum(mt.trace.sigma_z, dt, eo);
    for (std::size_t k = 0; k < es.freqs.size() && es.freqs[k] <= f_max; ++k) {
      spec.add_row({es.freqs[k], mt.method, es.magnitude[k]});
    }
    const PeakSet ps = dominant_peaks(es);
    std::ostringstream note;
    note << mt.method << ": " << ps.peaks.size() << " dominant peak(s)";
    for (const auto& pk : ps.peaks) {
      peaks.add_row({mt.method, pk.position, pk.height, pk.fwhm, es.bin_width(), es.resolution_fwhm});
      note << ' ' << fmt(pk.position);
    }
    out.notes.push_back(note.str());
    out.methods.push_back(mt.tag);
  }
  out.methods.push_back(std::string("emission:fft-") + (eo.window == Window::hann ? "hann" : "rect"));

  // Transition lines expected from the eigenvalues of each method.
  Table lines({{"method", CellKind::text}, {"label", CellKind::text}, {"position", CellKind::real}});
  for (const auto& mt : traces) {
    if (mt.method == "aa") {
      const auto [plus, minus] = aa_energies(0, cfg.model);
      lines.add_row({std::string("aa"), std::string("E- - E+"), std::abs((minus - plus).real()) / kTwoPi});
    } else {
      std::vector<cplx> E;
      if (mt.method == "caa") {
        const ApproxPair p0 = caa_pair(0, cfg.model);
        const ApproxPair p1 = caa_pair(1, cfg.model);
        E = {p0.plus.energy, p0.minus.energy, p1.plus.energy};
      } else {
        const Eigensystem es = exact_diagonalize(build_hamiltonian(cfg.model, cfg.trunc),
                                                 std::numeric_limits<double>::infinity());
        E = {es.pairs[0].energy, es.pairs[1].energy, es.pairs[2].energy};
      }
      lines.add_row({mt.method, std::string("E1 - E0"), (E[1] - E[0]).real() / kTwoPi});
      lines.add_row({mt.method, std::string("E2 - E0"), (E[2] - E[0]).real() / kTwoPi});
    }
  }
  out.tables.emplace_back("emission_trace", std::move(trace));
  out.tables.emplace_back("emission_spectrum", std::move(spec));
  out.tables.emplace_back("emission_peaks", std::move(peaks));
  out.tables.emplace_back("emission_lines", std::move(lines));
  return out;
}

// ---------------------------------------------------------------- QFI

namespace {

CommandResult qfi_surface_run(const RunConfig& cfg) {
  const std::string reference = choice(cfg, "reference", "nhtls", {"nhtls", "hermitian"});
  const std::string parameter = choice(cfg, "parameter", "epsilon", {"g", "epsilon"});
  methods_of(cfg, {"ed"}, {"ed"});
  const QfiSurface s = qfi_surface(cfg.model.delta, values_of(cfg, "g"), values_of(cfg, "epsilon"),
                                   int_option(cfg, "state", 0, 0),
                                   reference == "nhtls" ? QfiReference::nhtls : QfiReference::hermitian,
                                   qfi_parameter(parameter), cfg.trunc, int_option(cfg, "mask-cells", 2, 0), {},
                                   worker_count());
  Table t({{"g", CellKind::real}, {"epsilon", CellKind::real}, {"difference", CellKind::real},
           {"masked", CellKind::integer}});
  for (std::size_t i = 0; i < s.eps_grid.size(); ++i) {
    for (std::size_t j = 0; j < s.g_grid.size(); ++j) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto jj = static_cast<Eigen::Index>(j);
      t.add_row({s.g_grid[j], s.eps_grid[i], s.difference(ii, jj), static_cast<long long>(s.mask(ii, jj))});
    }
  }
  CommandResult out;
  out.tables.emplace_back("qfi_surface", std::move(t));
  out.documents["qfi_surface_grid"] = {{"g", s.g_grid},
                                  {"epsilon", s.eps_grid},
                                  {"parameter", to_string(s.parameter)},
                                  {"reference", reference},
                                  {"difference", matrix_to_json(s.difference)},
                                  {"masked_cells", s.masked_cells}};
  out.methods.push_back("qfi:surface:numeric_exact-minus-" + reference);
  out.notes.push_back(std::to_string(s.masked_cells) + " masked cells");
  return out;
}

}  // namespace

CommandResult cmd_qfi(const RunConfig& cfg) {
  if (cfg.find_sweep("g") && cfg.find_sweep("epsilon")) return qfi_surface_run(cfg);
  const std::string parameter = choice(cfg, "parameter", cfg.find_sweep("epsilon") ? "epsilon" : "g", {"g", "epsilon"});
  const auto methods = methods_of(cfg, {"ed", "aa"}, {"ed", "aa"});
  const int state = int_option(cfg, "state", 0, 0);
  const QfiParameter which = qfi_parameter(parameter);
  const std::vector<double> grid = values_of(cfg, parameter);
  const bool use_ed = std::find(methods.begin(), methods.end(), "ed") != methods.end();
  const bool use_aa = std::find(methods.begin(), methods.end(), "aa") != methods.end();

  const auto blocks = parallel_map(grid.size(), [&](std::size_t i) {
    const double lambda = grid[i];
    std::vector<std::vector<Cell>> rows;
    auto add = [&](const std::string& method, const std::string& model, auto&& compute) {
      double F = kNaN;
      long long masked = 0;
      long long consistent = 1;
      try {
        const QfiEstimate e = compute();
        F = e.value;
        consistent = e.consistent;
      } catch (const NumericalError&) {
        masked = 1;
        consistent = 0;
      }
      rows.push_back({parameter, lambda, method, model, F, masked, consistent});
    };
    auto numeric = [&](const StateProvider& sp) { return [&, sp] { return qfi_numeric(sp, lambda); }; };
    auto analytic = [&](auto&& f) { return [&, f] { QfiEstimate e; e.value = f(); e.coarse = e.fine = e.value; return e; }; };

    if (use_ed) {
      add("numeric_exact", "ptqrm", numeric(exact_state_provider(cfg.model, which, state, cfg.trunc)));
      if (which == QfiParameter::g) {
        ModelParams h = cfg.model;
        h.bias = BiasKind::real;
        add("numeric_exact", "hermitian", numeric(exact_state_provider(h, which, state, cfg.trunc)));
        ModelParams sym = cfg.model;
        sym.epsilon = 0.0;
        add("numeric_exact", "symmetric", numeric(exact_state_provider(sym, which, state, cfg.trunc)));
      }
    }
    if (use_aa) {
      const Branch br = state % 2 == 0 ? Branch::plus : Branch::minus;
      add("numeric_aa", "ptqrm", numeric(aa_state_provider(cfg.model, which, state / 2, br, cfg.trunc.n_fock)));
      if (which == QfiParameter::epsilon && state == 0) {
        const ModelParams& p = cfg.model;
        add("analytic_ptqrm_aa", "ptqrm", analytic([&p, lambda] { return qfi_ptqrm_aa_analytic(p.delta, lambda, p.g); }));
      }
    }
    if (which == QfiParameter::epsilon && state == 0) {
      const double delta = cfg.model.delta;
      add("numeric_nhtls", "nhtls", numeric(nhtls_state_provider(delta)));
      add("analytic_nhtls", "nhtls", analytic([delta, lambda] { return qfi_nhtls_analytic(delta, lambda); }));
    }
    return rows;
  });

  Table t({{"parameter", CellKind::text}, {"value", CellKind::real}, {"method", CellKind::text},
           {"model", CellKind::text}, {"F", CellKind::real}, {"masked", CellKind::integer},
           {"consistent", CellKind::integer}});
  for (const auto& b : blocks) {
    for (const auto& r : b) t.add_row(r);
  }
  CommandResult out;
  std::vector<std::string> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string tag = "qfi:" + t.text(r, "method") + ":" + t.text(r, "model");
    if (std::find(seen.begin(), seen.end(), tag) == seen.end()) seen.push_back(tag);
  }
  out.methods = seen;
  out.tables.emplace_back("qfi", std::move(t));
  return out;
}

// ---------------------------------------------------------------- preparation time

CommandResult cmd_preptime(const RunConfig& cfg) {
  const std::string parameter = choice(cfg, "parameter", cfg.find_sweep("g") ? "g" : "epsilon", {"g", "epsilon"});
  const auto methods = methods_of(cfg, {"ed", "aa"}, {"ed", "aa"});
  const QfiParameter which = qfi_parameter(parameter);
  const std::vector<double> grid = values_of(cfg, parameter);
  PrepTimeOptions po;
  po.tol = option(cfg, "tol", 1e-8);
  po.samples = int_option(cfg, "samples", 16, 2);

  const auto blocks = parallel_map(grid.size(), [&](std::size_t i) {
    const double lc = grid[i];
    std::vector<std::vector<Cell>> rows;
    auto add = [&](const std::string& method, const std::string& model, const GapFunction& gap,
                   const StateProvider& state) {
      double T = kNaN, err = kNaN, F = kNaN;
      long long masked = 0;
      try {
        const PrepTimeResult r = prep_time(gap, lc, po);
        T = r.time;
        err = r.error_estimate;
        F = qfi_numeric(state, lc).value;
      } catch (const NumericalError&) {
        masked = 1;
      }
      rows.push_back({parameter, lc, method, model, T, err, F, F / T, masked});
    };
    for (const auto& m : methods) {
      if (m == "ed") {
        add("ed", "ptqrm", exact_gap(cfg.model, which, cfg.trunc),
            exact_state_provider(cfg.model, which, 0, cfg.trunc));
      } else {
        add("aa", "ptqrm", aa_gap(cfg.model, which),
            aa_state_provider(cfg.model, which, 0, Branch::plus, cfg.trunc.n_fock));
      }
    }
    if (which == QfiParameter::epsilon) {
      add("analytic", "nhtls", nhtls_gap(cfg.model.delta), nhtls_state_provider(cfg.model.delta));
    }
    return rows;
  });

  Table t({{"parameter", CellKind::text}, {"lambda_c", CellKind::real}, {"method", CellKind::text},
           {"model", CellKind::text}, {"T", CellKind::real}, {"error", CellKind::real},
           {"F", CellKind::real}, {"F_over_T", CellKind::real}, {"masked", CellKind::integer}});
  for (const auto& b : blocks) {
    for (const auto& r : b) t.add_row(r);
  }
  CommandResult out;
  for (const auto& m : methods) out.methods.push_back("preptime:gauss-kronrod:" + m + "-gap");
  if (which == QfiParameter::epsilon) out.methods.push_back("preptime:gauss-kronrod:nhtls-gap");
  out.tables.emplace_back("preptime", std::move(t));
  return out;
}

// ---------------------------------------------------------------- dispatch and output

CommandResult run_command(const RunConfig& cfg) {
  cfg.validate();
  if (cfg.command == "spectrum") return cmd_spectrum(cfg);
  if (cfg.command == "gscan") return cmd_gscan(cfg);
  if (cfg.command == "ep") return cmd_ep(cfg);
  if (cfg.command == "dynamics") return cmd_dynamics(cfg);
  if (cfg.command == "emission") return cmd_emission(cfg);
  if (cfg.command == "qfi") return cmd_qfi(cfg);
  if (cfg.command == "preptime") return cmd_preptime(cfg);
  throw ConfigError("unknown command '" + cfg.command + "'");
}

std::vector<std::string> write_result(const RunConfig& cfg, const CommandResult& result) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.out_dir);
  std::vector<std::string> written;
  auto put = [&](const std::string& name, const std::string& content) {
    const std::string path = (dir / name).string();
    write_text_file(path, content);
    written.push_back(path);
  };

  if (cfg.format == "table") {
    for (const auto& [name, table] : result.tables) put(name + ".csv", to_csv(table));
    for (const auto& [name, doc] : result.documents) put(name + ".json", doc.dump(2) + "\n");
  } else {
    json payload = json::object();
    for (const auto& [name, table] : result.tables) payload[name] = table_to_json(table);
    for (const auto& [name, doc] : result.documents) payload[name] = doc;
    const json body = {{"command", cfg.command},
                       {"config_hash", config_hash(cfg)},
                       {"methods", result.methods},
                       {"payload", payload}};
    put(cfg.command + ".json", body.dump(2) + "\n");
  }
  const ResultRecord rec = make_record(cfg, nullptr, result.methods);
  json meta = rec.metadata_json();
  meta["files"] = json::array();
  for (const auto& w : written) meta["files"].push_back(fs::path(w).filename().string());
  put(cfg.command + ".meta.json", meta.dump(2) + "\n");
  return written;
}

// ---------------------------------------------------------------- reproduce

std::vector<std::string> reproduce(const std::string& out_dir, const std::string& format, bool quick) {
  namespace fs = std::filesystem;
  std::vector<std::string> written;
  auto run = [&](RunConfig cfg, const std::string& sub) {
    cfg.format = format;
    cfg.out_dir = (fs::path(out_dir) / sub).string();
    const auto files = write_result(cfg, run_command(cfg));
    written.insert(written.end(), files.begin(), files.end());
  };
  auto base = [&](const std::string& command, double delta, double eps, double g) {
    RunConfig c;
    c.command = command;
    c.model.delta = delta;
    c.model.epsilon = eps;
    c.model.g = g;
    return c;
  };
  const int n_sweep = quick ? 7 : 61;
  const double t_max = quick ? 50.0 : 200.0;

  {  // complex G landscape
    RunConfig c = base("gscan", 0.5, 0.2, 0.25);
    c.options = {{"n-re", quick ? 120.0 : 400.0}, {"n-im", quick ? 60.0 : 200.0}};
    run(c, "gscan_complex");
  }
  for (double g : {0.1, 0.5, 0.6828, 0.7}) {  // real G curves and the EP
    RunConfig c = base("gscan", 0.5, 0.2, g);
    c.options = {{"complex", 0.0}, {"samples", quick ? 400.0 : 2000.0}, {"re-min", -0.5}, {"re-max", 2.5}};
    run(c, "gscan_real/g" + label(g));
  }
  for (double eps : {0.2, 0.4}) {
    RunConfig c = base("ep", 0.5, eps, 0.0);
    run(c, "ep/eps" + label(eps));
  }
  for (double eps : {0.1, 0.5}) {  // four pairs, ED / AA / CAA
    RunConfig c = base("spectrum", 1.0, eps, 0.0);
    c.sweeps = {SweepSpec{"g", 0.0, 1.5, n_sweep}};
    run(c, "spectrum_sweep/eps" + label(eps));
  }
  const std::vector<std::pair<std::string, double>> regimes = {{"emission_weak", 0.2}, {"emission_multi", 0.75}, {"emission_strong", 1.25}};
  for (const auto& [regime, g] : regimes) {
    for (double eps : {0.1, 0.5}) {
      RunConfig c = base("emission", 1.0, eps, g);
      c.options = {{"t-max", t_max}};
      run(c, regime + "/eps" + label(eps));
      RunConfig h = c;
      h.model.bias = BiasKind::real;
      h.method = "ed";
      run(h, "emission_hermitian/g" + label(g) + "_eps" + label(eps));
    }
  }
  {  // QFI surfaces and curves
    const int n_g = quick ? 6 : 31;
    const int n_e = quick ? 6 : 31;
    for (const std::string ref : {"hermitian", "nhtls"}) {
      RunConfig c = base("qfi", 0.5, 0.0, 0.0);
      c.trunc.n_fock = 40;
      c.sweeps = {SweepSpec{"g", 0.0, 1.5, n_g}, SweepSpec{"epsilon", 0.0, 0.8, n_e}};
      c.choices = {{"reference", ref}, {"parameter", ref == "hermitian" ? "g" : "epsilon"}};
      run(c, "metrology/surface_" + ref);
    }
    // Preparation-time sweeps stop short of the exact EP of the ground pair.
    auto exact_ep = [](double eps, double g, EpControl control) {
      ModelParams p;
      p.delta = 0.5;
      p.epsilon = eps;
      p.g = g;
      EpSearch s;
      s.control = control;
      s.hi = control == EpControl::g ? 1.5 : 0.5;
      return locate_ep(p, s).control;
    };
    for (double eps : {0.2, 0.4}) {
      const double g_ep = exact_ep(eps, 0.0, EpControl::g);
      RunConfig c = base("qfi", 0.5, eps, 0.0);
      c.trunc.n_fock = 40;
      c.method = "ed";
      c.sweeps = {SweepSpec{"g", 0.02, 1.0, quick ? 8 : 50}};
      run(c, "metrology/qfi_g_eps" + label(eps));
      RunConfig p = c;
      p.command = "preptime";
      p.sweeps = {SweepSpec{"g", 0.05 * g_ep, 0.98 * g_ep, quick ? 5 : 30}};
      run(p, "metrology/preptime_g_eps" + label(eps));
    }
    for (double g : {0.1, 0.5, 1.0}) {
      const double eps_ep = exact_ep(0.0, g, EpControl::epsilon);
      RunConfig c = base("qfi", 0.5, 0.0, g);
      c.trunc.n_fock = 40;
      c.sweeps = {SweepSpec{"epsilon", 0.05 * eps_ep, 0.98 * eps_ep, quick ? 6 : 40}};
      run(c, "metrology/qfi_eps_g" + label(g));
      RunConfig p = c;
      p.command = "preptime";
      run(p, "metrology/preptime_eps_g" + label(g));
    }
  }
  return written;
}

}  // namespace ptqrm::cli
