#pragma once

#include <cmath>
#include <string>

#include "umsim/common.hpp"
#include "umsim/geometry.hpp"
#include "umsim/rng.hpp"

namespace umsim {

enum class PilotStructure { phase_shifter, gaussian, identity };

inline PilotStructure pilot_structure_from_string(const std::string& s) {
  if (s == "phase_shifter") return PilotStructure::phase_shifter;
  if (s == "gaussian") return PilotStructure::gaussian;
  if (s == "identity") return PilotStructure::identity;
  throw InvalidParameterError("unknown pilot structure: " + s);
}

// RF-chain-limited pilot observation y = M h + n with a fat m x N matrix.
struct MeasurementOperator {
  cmat matrix;
  double noise_variance = 0.0;
  double undersampling_ratio = 1.0;

  int rows() const { return static_cast<int>(matrix.rows()); }
  int cols() const { return static_cast<int>(matrix.cols()); }
};

// m = floor(ratio * N). Phase-shifter entries are (1/sqrt(N)) e^{j phi} with
// phi uniform on [0, 2pi); gaussian entries are CN(0, 1/N).
inline MeasurementOperator build_pilot_operator(int n, double ratio, PilotStructure structure,
                                                RngStream& rng, double noise_variance = 0.0) {
  require(n >= 1, "build_pilot_operator: N must be >= 1");
  require(ratio > 0.0 && ratio <= 1.0, "build_pilot_operator: ratio must lie in (0, 1]");
  const int m = static_cast<int>(std::floor(ratio * n));
  require(m >= 1, "build_pilot_operator: floor(ratio * N) must be >= 1");

  MeasurementOperator op;
  op.noise_variance = noise_variance;
  op.undersampling_ratio = ratio;
  switch (structure) {
    case PilotStructure::identity:
      if (ratio != 1.0)
        throw InvalidParameterError("build_pilot_operator: identity structure requires ratio = 1");
      op.matrix = cmat::Identity(n, n);
      break;
    case PilotStructure::phase_shifter: {
      op.matrix.resize(m, n);
      const double scale = 1.0 / std::sqrt(static_cast<double>(n));
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c)
          op.matrix(r, c) = std::polar(scale, rng.uniform(0.0, 2.0 * pi));
      break;
    }
    case PilotStructure::gaussian: {
      op.matrix.resize(m, n);
      for (int r = 0; r < m; ++r)
        for (int c = 0; c < n; ++c) op.matrix(r, c) = rng.cnormal(1.0 / n);
      break;
    }
  }
  return op;
}

inline cvec observe(const MeasurementOperator& op, const cvec& h, RngStream& rng) {
  if (h.size() != op.matrix.cols()) throw ShapeError("observe: channel length mismatch");
  cvec y = op.matrix * h;
  if (op.noise_variance > 0.0)
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] += rng.cnormal(op.noise_variance);
  return y;
}

// Received-SNR convention: snr = ||M h||^2 / (m sigma^2), set per trial from
// the realized channel.
inline double noise_variance_for_snr(const MeasurementOperator& op, const cvec& h, double snr_db) {
  const double signal = (op.matrix * h).squaredNorm() / op.matrix.rows();
  return signal / std::pow(10.0, snr_db / 10.0);
}

// Unitary 2-D DFT dictionary over the virtual uniform grid of element
// indices: kron(F_Gy, F_Gx) composed with the permutation from the AoSA
// element ordering to row-major grid ordering. The physical subarray gap
// (w > 1) is ignored, which keeps the transform unitary.
inline cmat dft_dictionary(const ArrayGeometry& g) {
  const int gx = g.sa_grid.x * g.ae_grid.x;
  const int gy = g.sa_grid.y * g.ae_grid.y;
  const int n = gx * gy;

  auto dft_entry = [](int size, int r, int c) {
    return std::polar(1.0 / std::sqrt(static_cast<double>(size)),
                      -2.0 * pi * static_cast<double>(r) * static_cast<double>(c) / size);
  };

  // Element index -> flat row-major grid index (grid row along y, col along x).
  std::vector<int> grid_of_element(static_cast<size_t>(n));
  int e = 0;
  for (int sr = 0; sr < g.sa_grid.y; ++sr)
    for (int sc = 0; sc < g.sa_grid.x; ++sc)
      for (int ar = 0; ar < g.ae_grid.y; ++ar)
        for (int ac = 0; ac < g.ae_grid.x; ++ac) {
          const int row = sr * g.ae_grid.y + ar;
          const int col = sc * g.ae_grid.x + ac;
          grid_of_element[static_cast<size_t>(e++)] = row * gx + col;
        }

  cmat f(n, n);
  for (int out = 0; out < n; ++out) {
    const int ky = out / gx;
    const int kx = out % gx;
    for (int in = 0; in < n; ++in) {
      const int gi = grid_of_element[static_cast<size_t>(in)];
      const int ry = gi / gx;
      const int rx = gi % gx;
      f(out, in) = dft_entry(gy, ky, ry) * dft_entry(gx, kx, rx);
    }
  }
  return f;
}

}  // namespace umsim
