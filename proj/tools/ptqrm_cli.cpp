#include "commands.hpp"

#include "ptqrm/errors.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <map>
#include <memory>

using namespace ptqrm;

namespace {

struct Flags {
  double delta = 0.5;
  double epsilon = 0.0;
  double g = 0.0;
  std::string g_range;
  std::string eps_range;
  std::string bias = "imaginary";
  int n_fock = 60;
  std::string method;
  std::string out = ".";
  std::string format = "table";
  std::map<std::string, double> numbers;
  std::map<std::string, std::string> names;
};

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--delta", f.delta, "qubit splitting (units of omega)")->capture_default_str();
  sub->add_option("--epsilon", f.epsilon, "bias magnitude")->capture_default_str();
  sub->add_option("--g", f.g, "coupling strength")->capture_default_str();
  sub->add_option("--g-range", f.g_range, "coupling sweep start:stop:count");
  sub->add_option("--eps-range", f.eps_range, "bias sweep start:stop:count");
  sub->add_option("--bias", f.bias, "bias kind")->check(CLI::IsMember({"imaginary", "real"}))->capture_default_str();
  sub->add_option("--n-fock", f.n_fock, "photon cutoff")->capture_default_str();
  sub->add_option("--method", f.method, "method")->check(CLI::IsMember({"ed", "aa", "caa", "gfunc"}));
  sub->add_option("--out", f.out, "output directory")->capture_default_str();
  sub->add_option("--format", f.format, "output format")->check(CLI::IsMember({"table", "structured"}))->capture_default_str();
}

// Numeric options land in RunConfig::options only when given on the command line.
void add_number(CLI::App* sub, Flags& f, const std::string& name, const std::string& help) {
  sub->add_option_function<double>("--" + name, [&f, name](double v) { f.numbers[name] = v; }, help);
}

void add_name(CLI::App* sub, Flags& f, const std::string& name, const std::string& help,
              std::vector<std::string> allowed) {
  sub->add_option_function<std::string>("--" + name, [&f, name](const std::string& v) { f.names[name] = v; }, help)
      ->check(CLI::IsMember(std::move(allowed)));
}

RunConfig to_config(const std::string& command, const Flags& f) {
  RunConfig c;
  c.command = command;
  c.model.delta = f.delta;
  c.model.epsilon = f.epsilon;
  c.model.g = f.g;
  c.model.bias = f.bias == "real" ? BiasKind::real : BiasKind::imaginary;
  c.trunc.n_fock = f.n_fock;
  if (!f.g_range.empty()) c.sweeps.push_back(parse_range(f.g_range, "g"));
  if (!f.eps_range.empty()) c.sweeps.push_back(parse_range(f.eps_range, "epsilon"));
  c.method = f.method;
  c.format = f.format;
  c.out_dir = f.out;
  c.options = f.numbers;
  c.choices = f.names;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PT-symmetric quantum Rabi model toolkit"};
  app.require_subcommand(1);
  Flags f;
  bool quick = false;

  auto* spectrum = app.add_subcommand("spectrum", "eigenvalue pairs from ED, AA, CAA or G-function zeros");
  add_common(spectrum, f);
  add_number(spectrum, f, "pairs", "number of eigenvalue pairs (default 4)");
  add_number(spectrum, f, "n-re", "G-scan grid points along Re E (gfunc)");
  add_number(spectrum, f, "n-im", "G-scan grid points along Im E (gfunc)");

  auto* gscan = app.add_subcommand("gscan", "ln|G|^2 grid, complex zeros and the real G-function");
  add_common(gscan, f);
  for (const char* n : {"re-min", "re-max", "im-min", "im-max", "n-re", "n-im", "samples", "complex"}) {
    add_number(gscan, f, n, std::string("scan setting ") + n);
  }

  auto* ep = app.add_subcommand("ep", "exceptional point from the simultaneous zero of G and dG/dE");
  add_common(ep, f);
  add_name(ep, f, "control", "parameter driven through the EP", {"g", "epsilon"});
  add_number(ep, f, "lo", "control bracket lower end");
  add_number(ep, f, "hi", "control bracket upper end");
  add_number(ep, f, "pair", "eigenvalue pair (0 = ground)");

  auto* dynamics = app.add_subcommand("dynamics", "<sigma_z(t)> from the upper-level vacuum state");
  auto* emission = app.add_subcommand("emission", "emission spectrum of <sigma_z(t)> with peak tables");
  for (auto* sub : {dynamics, emission}) {
    add_common(sub, f);
    add_number(sub, f, "t-max", "evolution time (default 200)");
    add_number(sub, f, "dt", "sampling step (default 0.01)");
    add_number(sub, f, "manifolds", "manifolds in the AA/CAA basis (default 2)");
  }
  add_number(emission, f, "f-max", "largest tabulated frequency (default 1)");
  add_number(emission, f, "zero-pad", "zero-padding factor (default 4)");
  add_name(emission, f, "window", "taper", {"hann", "none"});

  auto* qfi = app.add_subcommand("qfi", "quantum Fisher information curves or (g, epsilon) difference surfaces");
  add_common(qfi, f);
  add_name(qfi, f, "parameter", "estimated parameter", {"g", "epsilon"});
  add_name(qfi, f, "reference", "surface reference model", {"nhtls", "hermitian"});
  add_number(qfi, f, "state", "eigenstate index (default 0)");
  add_number(qfi, f, "mask-cells", "EP mask half-width in grid cells (default 2)");

  auto* preptime = app.add_subcommand("preptime", "adiabatic preparation time and F/T");
  add_common(preptime, f);
  add_name(preptime, f, "parameter", "swept parameter", {"g", "epsilon"});
  add_number(preptime, f, "tol", "quadrature tolerance (default 1e-8)");
  add_number(preptime, f, "samples", "recorded gap samples (default 16)");

  auto* repro = app.add_subcommand("reproduce", "standard survey over the reference parameter sets");
  repro->add_option("--out", f.out, "output directory")->capture_default_str();
  repro->add_option("--format", f.format, "output format")->check(CLI::IsMember({"table", "structured"}))->capture_default_str();
  repro->add_flag("--quick", quick, "smaller grids and sweeps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    cli::worker_count();
    if (repro->parsed()) {
      const auto files = cli::reproduce(f.out, f.format, quick);
      std::cout << "wrote " << files.size() << " files under " << f.out << "\n";
      return 0;
    }
    const std::string command = app.get_subcommands().front()->get_name();
    const RunConfig cfg = to_config(command, f);
    const cli::CommandResult result = cli::run_command(cfg);
    for (const auto& note : result.notes) std::cout << note << "\n";
    for (const auto& path : cli::write_result(cfg, result)) std::cout << "wrote " << path << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
