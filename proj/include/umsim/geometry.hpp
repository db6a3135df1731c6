#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "umsim/common.hpp"

namespace umsim {

struct GridShape {
  int x = 1;  // count along the x axis
  int y = 1;  // count along the y axis
};

// Planar array-of-subarrays in the z = 0 plane, broadside along +z, centered
// at the origin. Element ordering is row-major over
// (subarray row, subarray col, element row, element col); rows run along y,
// columns along x. Corresponding elements of adjacent subarrays sit exactly
// d_sub = w * d_a apart along each axis.
struct ArrayGeometry {
  double carrier_wavelength_m = 0.0;  // lambda_c
  double ae_spacing_m = 0.0;          // d_a
  double sa_spacing_factor = 1.0;     // w, so d_sub = w * d_a
  GridShape sa_grid;                  // subarrays per axis
  GridShape ae_grid;                  // elements per axis within a subarray
  std::vector<Eigen::Vector3d> element_positions_m;
  std::vector<int> sa_index_of_element;

  int element_count() const { return static_cast<int>(element_positions_m.size()); }
  Eigen::Vector3d centroid() const {
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    for (const auto& p : element_positions_m) c += p;
    return element_positions_m.empty() ? c : Eigen::Vector3d(c / element_positions_m.size());
  }
};

inline ArrayGeometry build_aosa(double carrier_wavelength_m, double ae_spacing_m,
                                double sa_spacing_factor, GridShape sa_grid, GridShape ae_grid) {
  require(carrier_wavelength_m > 0.0, "build_aosa: carrier wavelength must be positive");
  require(ae_spacing_m > 0.0, "build_aosa: element spacing must be positive");
  require(sa_spacing_factor >= 1.0, "build_aosa: subarray spacing factor must be >= 1");
  require(sa_grid.x >= 1 && sa_grid.y >= 1 && ae_grid.x >= 1 && ae_grid.y >= 1,
          "build_aosa: grid counts must be >= 1");

  ArrayGeometry g;
  g.carrier_wavelength_m = carrier_wavelength_m;
  g.ae_spacing_m = ae_spacing_m;
  g.sa_spacing_factor = sa_spacing_factor;
  g.sa_grid = sa_grid;
  g.ae_grid = ae_grid;

  const double d_a = ae_spacing_m;
  const double d_sub = sa_spacing_factor * ae_spacing_m;
  const double span_x = (sa_grid.x - 1) * d_sub + (ae_grid.x - 1) * d_a;
  const double span_y = (sa_grid.y - 1) * d_sub + (ae_grid.y - 1) * d_a;

  const int n = sa_grid.x * sa_grid.y * ae_grid.x * ae_grid.y;
  g.element_positions_m.reserve(n);
  g.sa_index_of_element.reserve(n);
  for (int sr = 0; sr < sa_grid.y; ++sr) {
    for (int sc = 0; sc < sa_grid.x; ++sc) {
      const int sa_index = sr * sa_grid.x + sc;
      for (int ar = 0; ar < ae_grid.y; ++ar) {
        for (int ac = 0; ac < ae_grid.x; ++ac) {
          const double x = sc * d_sub + ac * d_a - span_x * 0.5;
          const double y = sr * d_sub + ar * d_a - span_y * 0.5;
          g.element_positions_m.emplace_back(x, y, 0.0);
          g.sa_index_of_element.push_back(sa_index);
        }
      }
    }
  }
  return g;
}

// Maximum pairwise distance between elements (diagonal aperture convention).
inline double aperture(const ArrayGeometry& g) {
  double best = 0.0;
  const auto& p = g.element_positions_m;
  for (size_t i = 0; i < p.size(); ++i)
    for (size_t j = i + 1; j < p.size(); ++j) best = std::max(best, (p[i] - p[j]).norm());
  return best;
}

// Far/near-field boundary 2 D^2 / lambda_c with D the diagonal aperture.
inline double rayleigh_distance(const ArrayGeometry& g) {
  const double d = aperture(g);
  return 2.0 * d * d / g.carrier_wavelength_m;
}

// Literature closed form for a square AoSA with sqrt_s x sqrt_s subarrays of
// sqrt_s x sqrt_s elements: {sqrt_s(sqrt_s-1) + (sqrt_s-1) w}^2 lambda_c.
// Its aperture convention differs from the diagonal one above; the geometry
// CLI reports both values side by side.
inline double rayleigh_distance_square_closed_form(int sqrt_s, double w,
                                                   double carrier_wavelength_m) {
  require(sqrt_s >= 1, "rayleigh closed form: sqrt_s must be >= 1");
  const double t = sqrt_s * (sqrt_s - 1.0) + (sqrt_s - 1.0) * w;
  return t * t * carrier_wavelength_m;
}

}  // namespace umsim
