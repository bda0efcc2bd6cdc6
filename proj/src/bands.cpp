#include "ptqrm/bands.hpp"

#include "ptqrm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace ptqrm {

namespace {

int tracked_count(const Eigensystem& es, int max_states) {
  const int n = static_cast<int>(es.size());
  return max_states < 0 ? n : std::min(n, max_states);
}

}  // namespace

std::vector<Band> track_bands(const std::vector<double>& grid,
                              const std::vector<Eigensystem>& spectra,
                              const BandTrackingOptions& opts) {
  if (grid.size() != spectra.size()) throw ConfigError("track_bands: grid/spectra size mismatch");
  if (grid.empty()) return {};
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const bool inc = grid[1] > grid[0];
    if (inc ? !(grid[i] > grid[i - 1]) : !(grid[i] < grid[i - 1])) {
      throw ConfigError("track_bands: grid must be strictly monotone");
    }
  }

  std::vector<Band> bands;
  std::vector<int> open;  // open[k] = band holding state k of the previous point, -1 if none

  const int n0 = tracked_count(spectra[0], opts.max_states);
  open.assign(static_cast<std::size_t>(n0), -1);
  for (int k = 0; k < n0; ++k) {
    Band b;
    b.grid.push_back(grid[0]);
    b.energy.push_back(spectra[0].pairs[static_cast<std::size_t>(k)].energy);
    b.state_index.push_back(k);
    open[static_cast<std::size_t>(k)] = static_cast<int>(bands.size());
    bands.push_back(std::move(b));
  }

  for (std::size_t p = 1; p < grid.size(); ++p) {
    const Eigensystem& prev = spectra[p - 1];
    const Eigensystem& cur = spectra[p];
    const int np = tracked_count(prev, opts.max_states);
    const int nc = tracked_count(cur, opts.max_states);

    // All candidate links, strongest first; greedy assignment.
    std::vector<std::tuple<double, int, int>> cand;
    cand.reserve(static_cast<std::size_t>(np) * static_cast<std::size_t>(nc));
    std::vector<double> best_for_prev(static_cast<std::size_t>(np), 0.0);
    std::vector<double> second_for_prev(static_cast<std::size_t>(np), 0.0);
    for (int a = 0; a < np; ++a) {
      const auto& ra = prev.pairs[static_cast<std::size_t>(a)].right;
      for (int b = 0; b < nc; ++b) {
        const double ov = std::abs(ra.dot(cur.pairs[static_cast<std::size_t>(b)].right));
        cand.emplace_back(ov, a, b);
        auto& b1 = best_for_prev[static_cast<std::size_t>(a)];
        auto& b2 = second_for_prev[static_cast<std::size_t>(a)];
        if (ov > b1) {
          b2 = b1;
          b1 = ov;
        } else if (ov > b2) {
          b2 = ov;
        }
      }
    }
    std::sort(cand.begin(), cand.end(),
              [](const auto& x, const auto& y) { return std::get<0>(x) > std::get<0>(y); });

    std::vector<int> link_prev(static_cast<std::size_t>(np), -1);
    std::vector<int> link_cur(static_cast<std::size_t>(nc), -1);
    for (const auto& [ov, a, b] : cand) {
      if (ov <= opts.min_overlap) break;
      if (link_prev[static_cast<std::size_t>(a)] >= 0 || link_cur[static_cast<std::size_t>(b)] >= 0) continue;
      link_prev[static_cast<std::size_t>(a)] = b;
      link_cur[static_cast<std::size_t>(b)] = a;
    }

    std::vector<int> next_open(static_cast<std::size_t>(nc), -1);
    for (int b = 0; b < nc; ++b) {
      const auto& pair = cur.pairs[static_cast<std::size_t>(b)];
      const int a = link_cur[static_cast<std::size_t>(b)];
      int band_id = a >= 0 ? open[static_cast<std::size_t>(a)] : -1;
      if (band_id < 0) {
        Band nb;
        nb.split = true;
        band_id = static_cast<int>(bands.size());
        bands.push_back(std::move(nb));
      } else if (best_for_prev[static_cast<std::size_t>(a)] -
                     second_for_prev[static_cast<std::size_t>(a)] <
                 opts.ambiguity_gap) {
        bands[static_cast<std::size_t>(band_id)].ambiguous = true;
      }
      Band& band = bands[static_cast<std::size_t>(band_id)];
      band.grid.push_back(grid[p]);
      band.energy.push_back(pair.energy);
      band.state_index.push_back(b);
      next_open[static_cast<std::size_t>(b)] = band_id;
    }
    open = std::move(next_open);
  }

  for (Band& b : bands) {
    for (std::size_t i = 1; i < b.energy.size(); ++i) {
      const bool r0 = std::abs(b.energy[i - 1].imag()) < opts.real_tol;
      const bool r1 = std::abs(b.energy[i].imag()) < opts.real_tol;
      if (r0 != r1) b.ep_adjacent = true;
    }
  }
  return bands;
}

}  // namespace ptqrm
