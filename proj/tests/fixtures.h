#pragma once

#include "spdcsim/jsa.h"

namespace spdc::testing {

// Apodized ppKTP source at the nominal 0.6 nm pump bandwidth.
inline SourceDesign design_source(std::size_t grid_points = 256) {
  SourceDesign d;
  d.crystal.material = Material::KTP;
  d.crystal.length = 27.5 * kMm;
  d.crystal.poling_period = 46.5 * kUm;
  d.crystal.qpm_order = -1;
  d.crystal.apodization = {ApodizationKind::gaussian_duty_cycle, 14.6 * kMm, ApodizationWidthOf::nonlinearity};
  d.grid_points = grid_points;
  return d;
}

}  // namespace spdc::testing
