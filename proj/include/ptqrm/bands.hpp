#pragma once

#include "ptqrm/model.hpp"

#include <vector>

namespace ptqrm {

struct Band {
  std::vector<double> grid;            // parameter values where the band is defined
  std::vector<ComplexEnergy> energy;   // one energy per grid value
  std::vector<int> state_index;        // index into that point's eigensystem
  bool split = false;        // started because a link fell below the overlap threshold
  bool ambiguous = false;    // some link had a runner-up within ambiguity_gap
  bool ep_adjacent = false;  // imaginary part switches on/off along the band
};

struct BandTrackingOptions {
  double min_overlap = 0.5;
  double ambiguity_gap = 1e-3;
  double real_tol = 1e-8;  // |Im E| below this counts as real when flagging EP adjacency
  int max_states = -1;     // track only the lowest max_states states of each point (-1: all)
};

// Links eigenstates of consecutive sweep points by maximal |<right_k|right_k+1>|.
// grid must be strictly monotone and have one eigensystem per value.
std::vector<Band> track_bands(const std::vector<double>& grid,
                              const std::vector<Eigensystem>& spectra,
                              const BandTrackingOptions& opts = {});

}  // namespace ptqrm
