#pragma once

#include <optional>
#include <string>
#include <vector>

#include "umsim/common.hpp"
#include "umsim/geometry.hpp"
#include "umsim/rng.hpp"

namespace umsim {

enum class FieldKind { far, near };

// Direction of (or position of) one multipath source. Far sources carry
// angles only; near sources carry a 3-D position.
struct SourceSpec {
  FieldKind kind = FieldKind::far;
  double azimuth_rad = 0.0;    // far only
  double elevation_rad = 0.0;  // far only
  Eigen::Vector3d position_m = Eigen::Vector3d::Zero();  // near only
};

struct PathComponent {
  cplx complex_gain{0.0, 0.0};
  SourceSpec source;
  std::vector<bool> visibility;  // one flag per subarray; empty means all visible

  bool visible_at(int sa_index) const {
    return visibility.empty() || visibility[static_cast<size_t>(sa_index)];
  }
};

struct SubcarrierPlan {
  double center_frequency_hz = 0.0;
  double bandwidth_hz = 0.0;
  int count = 1;

  // Evenly spaced over [f_c - B/2, f_c + B/2], endpoints included; a single
  // subcarrier sits at f_c.
  std::vector<double> frequencies_hz() const {
    require(count >= 1, "subcarriers: count must be >= 1");
    if (count == 1) return {center_frequency_hz};
    require(center_frequency_hz > bandwidth_hz / 2.0 && bandwidth_hz > 0.0,
            "subcarriers: need f_c > bandwidth/2 > 0 when count > 1");
    std::vector<double> f(count);
    for (int i = 0; i < count; ++i)
      f[i] = center_frequency_hz - bandwidth_hz / 2.0 + bandwidth_hz * i / (count - 1);
    return f;
  }
};

struct ChannelRealization {
  std::vector<double> subcarrier_frequencies_hz;
  std::vector<cmat> per_subcarrier_channel;  // N x K each; K = 1 for uplink SIMO
  std::vector<std::vector<PathComponent>> paths;  // per user
  std::string geometry_ref;
};

// Unit-direction from the array toward a far source; broadside is +z.
inline Eigen::Vector3d far_field_direction(double azimuth_rad, double elevation_rad) {
  return {std::cos(elevation_rad) * std::sin(azimuth_rad), std::sin(elevation_rad),
          std::cos(elevation_rad) * std::cos(azimuth_rad)};
}

// Phase-only array response. Far: entry_n = exp(j 2pi/lambda <u, p_n>) with u
// the unit direction toward the source. Near: exact spherical wavefront,
// entry_n = exp(-j 2pi/lambda (|q - p_n| - |q - p_ref|)) with p_ref the array
// centroid, which makes the two conventions agree as the source recedes.
inline cvec array_response(const ArrayGeometry& g, const SourceSpec& source, double wavelength_m) {
  require(wavelength_m > 0.0, "array_response: wavelength must be positive");
  const int n = g.element_count();
  cvec a(n);
  const double k = 2.0 * pi / wavelength_m;
  if (source.kind == FieldKind::far) {
    const Eigen::Vector3d u = far_field_direction(source.azimuth_rad, source.elevation_rad);
    for (int i = 0; i < n; ++i) {
      const double phase = k * u.dot(g.element_positions_m[static_cast<size_t>(i)]);
      a[i] = std::polar(1.0, phase);
    }
  } else {
    const Eigen::Vector3d q = source.position_m;
    const double ref = (q - g.centroid()).norm();
    for (int i = 0; i < n; ++i) {
      const double r = (q - g.element_positions_m[static_cast<size_t>(i)]).norm();
      if (r <= 0.0)
        throw InvalidParameterError("array_response: near source coincides with an element");
      a[i] = std::polar(1.0, -k * (r - ref));
    }
  }
  return a;
}

struct ChannelScenario {
  int num_paths = 5;
  double k_factor_db = 10.0;      // LoS power over total NLoS power
  double near_fraction = 0.5;     // bias of each path toward the near side of the Rayleigh boundary
  double distance_min_m = 1.0;
  double distance_max_m = 30.0;
  // Scatterer angles (documented choice): azimuth uniform on (-pi/2, pi/2),
  // elevation uniform on (-pi/4, pi/4).
};

namespace detail {

inline double log_uniform(RngStream& rng, double lo, double hi) {
  return std::exp(rng.uniform(std::log(lo), std::log(hi)));
}

// Distance draw: with probability near_fraction the log-uniform draw is
// restricted to the part of [lo, hi] below the Rayleigh distance, otherwise to
// the part at or above it. An empty side falls back to the whole range.
inline double draw_path_distance(RngStream& rng, const ChannelScenario& sc, double rayleigh_m) {
  const bool want_near = rng.uniform01() < sc.near_fraction;
  double lo = sc.distance_min_m;
  double hi = sc.distance_max_m;
  if (want_near && lo < rayleigh_m) {
    hi = std::min(hi, rayleigh_m);
  } else if (!want_near && hi > rayleigh_m) {
    lo = std::max(lo, rayleigh_m);
  }
  if (!(lo < hi)) {
    lo = sc.distance_min_m;
    hi = sc.distance_max_m;
  }
  return log_uniform(rng, lo, hi);
}

}  // namespace detail

// Sparse multipath draw. Path 0 is LoS with deterministic phase and power
// K above the total NLoS power; NLoS gains are CN(0, .) with total expected
// power normalized so that E ||h||^2 = N. Field kind is classified against
// the geometry's Rayleigh distance.
inline std::vector<PathComponent> sample_paths(const ArrayGeometry& g, const ChannelScenario& sc,
                                               RngStream& rng) {
  require(sc.num_paths >= 1, "sample_paths: need at least one path");
  require(sc.distance_min_m > 0.0 && sc.distance_min_m < sc.distance_max_m,
          "sample_paths: distance range must be positive and ordered");

  const double rayleigh_m = rayleigh_distance(g);
  const double k_lin = std::pow(10.0, sc.k_factor_db / 10.0);
  const int l = sc.num_paths;
  const double p_los = (l == 1) ? 1.0 : k_lin / (1.0 + k_lin);
  const double p_nlos_each = (l == 1) ? 0.0 : (1.0 / (1.0 + k_lin)) / (l - 1);

  std::vector<PathComponent> paths(static_cast<size_t>(l));
  for (int i = 0; i < l; ++i) {
    PathComponent& p = paths[static_cast<size_t>(i)];
    const double az = rng.uniform(-pi / 2.0, pi / 2.0);
    const double el = rng.uniform(-pi / 4.0, pi / 4.0);
    const double dist = detail::draw_path_distance(rng, sc, rayleigh_m);
    if (dist < rayleigh_m) {
      p.source.kind = FieldKind::near;
      p.source.position_m = dist * far_field_direction(az, el);
    } else {
      p.source.kind = FieldKind::far;
      p.source.azimuth_rad = az;
      p.source.elevation_rad = el;
    }
    p.complex_gain = (i == 0) ? cplx(std::sqrt(p_los), 0.0) : rng.cnormal(p_nlos_each);
  }
  return paths;
}

// Per-subcarrier channel: h_k = sum_l alpha_l * mask_l .* a(source_l, c/f_k).
// `absorption` optionally scales each subcarrier's amplitude (molecular
// absorption stand-in); empty means all ones.
inline cvec path_sum_channel(const ArrayGeometry& g, const std::vector<PathComponent>& paths,
                             double wavelength_m) {
  const int n = g.element_count();
  cvec h = cvec::Zero(n);
  for (const auto& p : paths) {
    const cvec a = array_response(g, p.source, wavelength_m);
    for (int i = 0; i < n; ++i) {
      if (p.visible_at(g.sa_index_of_element[static_cast<size_t>(i)])) h[i] += p.complex_gain * a[i];
    }
  }
  return h;
}

inline ChannelRealization assemble_channel(const ArrayGeometry& g,
                                           const std::vector<PathComponent>& paths,
                                           const SubcarrierPlan& plan,
                                           const std::vector<double>& absorption = {}) {
  const auto freqs = plan.frequencies_hz();
  if (!absorption.empty() && absorption.size() != freqs.size())
    throw ShapeError("assemble_channel: absorption table length must match subcarrier count");

  ChannelRealization cr;
  cr.subcarrier_frequencies_hz = freqs;
  cr.paths = {paths};
  cr.per_subcarrier_channel.reserve(freqs.size());
  for (size_t k = 0; k < freqs.size(); ++k) {
    const double lambda = speed_of_light_m_s / freqs[k];
    cvec h = path_sum_channel(g, paths, lambda);
    if (!absorption.empty()) h *= absorption[k];
    cr.per_subcarrier_channel.push_back(h);
  }
  return cr;
}

// Multi-user variant: column k of every per-subcarrier matrix is user k's
// channel assembled from its own path set.
inline ChannelRealization assemble_multiuser_channel(
    const ArrayGeometry& g, const std::vector<std::vector<PathComponent>>& user_paths,
    const SubcarrierPlan& plan, const std::vector<double>& absorption = {}) {
  require(!user_paths.empty(), "assemble_multiuser_channel: need at least one user");
  const auto freqs = plan.frequencies_hz();
  if (!absorption.empty() && absorption.size() != freqs.size())
    throw ShapeError("assemble_multiuser_channel: absorption table length must match subcarriers");

  ChannelRealization cr;
  cr.subcarrier_frequencies_hz = freqs;
  cr.paths = user_paths;
  const int n = g.element_count();
  const int k_users = static_cast<int>(user_paths.size());
  for (size_t k = 0; k < freqs.size(); ++k) {
    const double lambda = speed_of_light_m_s / freqs[k];
    cmat h(n, k_users);
    for (int u = 0; u < k_users; ++u)
      h.col(u) = path_sum_channel(g, user_paths[static_cast<size_t>(u)], lambda);
    if (!absorption.empty()) h *= absorption[k];
    cr.per_subcarrier_channel.push_back(h);
  }
  return cr;
}

}  // namespace umsim
