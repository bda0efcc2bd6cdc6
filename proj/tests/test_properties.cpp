#include <doctest.h>

#include "properties.hpp"

namespace {

void require(const props::Report& r) {
  INFO(r.name << ": " << r.failures << " of " << r.cases << " failed, worst " << r.worst << ", slowest " << r.slowest
              << " s");
  CHECK(r.cases >= 200);
  CHECK(r.failures == 0);
  CHECK(r.slowest < 1.0);
}

}  // namespace

TEST_CASE("biorthonormality") { require(props::run("biorthonormality", 200, 11, 1e-8, props::biorthonormality)); }

TEST_CASE("conjugation closure") {
  require(props::run("conjugation closure", 200, 12, 1e-8, props::conjugation_closure));
}

TEST_CASE("sigma_z rescaling invariance") {
  require(props::run("rescaling", 200, 13, 1e-12, props::sigma_z_rescaling));
}

TEST_CASE("QFI gauge invariance") { require(props::run("qfi gauge", 200, 14, 1e-8, props::qfi_gauge)); }

TEST_CASE("overlap symmetry") { require(props::run("overlap symmetry", 500, 15, 1e-15, props::overlap_symmetry)); }

TEST_CASE("G conjugation") { require(props::run("G conjugation", 200, 16, 1e-10, props::g_conjugation)); }
