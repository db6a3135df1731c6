#pragma once

#include <cmath>
#include <vector>

#include "umsim/common.hpp"
#include "umsim/rng.hpp"

namespace umsim {

struct BeamformerSet {
  cmat precoders;  // N x K, column k serves user k
  double total_power = 0.0;
  std::vector<double> objective_trajectory;  // WMMSE only: sum rate per outer iteration
};

inline double sum_rate(const cmat& h, const BeamformerSet& w, double sigma2) {
  require(sigma2 > 0.0, "sum_rate: noise power must be positive");
  if (h.rows() != w.precoders.rows() || h.cols() != w.precoders.cols())
    throw ShapeError("sum_rate: dimension mismatch");
  const cmat gains = h.adjoint() * w.precoders;  // gains(k, j) = h_k^H w_j
  double rate = 0.0;
  for (Eigen::Index k = 0; k < h.cols(); ++k) {
    double interference = sigma2;
    for (Eigen::Index j = 0; j < h.cols(); ++j)
      if (j != k) interference += std::norm(gains(k, j));
    rate += std::log2(1.0 + std::norm(gains(k, k)) / interference);
  }
  return rate;
}

// Maximum ratio transmission with an equal power split.
inline BeamformerSet mrt(const cmat& h, double total_power) {
  require(total_power > 0.0, "mrt: power must be positive");
  const Eigen::Index k_users = h.cols();
  BeamformerSet out;
  out.total_power = total_power;
  out.precoders.resize(h.rows(), k_users);
  const double scale = std::sqrt(total_power / static_cast<double>(k_users));
  for (Eigen::Index k = 0; k < k_users; ++k) {
    const double norm = h.col(k).norm();
    if (norm == 0.0) throw InvalidParameterError("mrt: zero channel column");
    out.precoders.col(k) = scale / norm * h.col(k);
  }
  return out;
}

// Zero-forcing directions H (H^H H)^{-1}, each column rescaled to power P/K.
inline BeamformerSet zf_beamform(const cmat& h, double total_power) {
  require(total_power > 0.0, "zf_beamform: power must be positive");
  if (h.cols() > h.rows())
    throw InvalidParameterError("zf_beamform: more users than antennas");
  Eigen::BDCSVD<cmat> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const rvec& s = svd.singularValues();
  if (!(s[s.size() - 1] > 1e-10 * s[0]))
    throw InvalidParameterError("zf_beamform: channel matrix is rank-deficient");
  cmat dirs = svd.matrixU() * s.cwiseInverse().cast<cplx>().asDiagonal() *
              svd.matrixV().adjoint();
  BeamformerSet out;
  out.total_power = total_power;
  out.precoders.resize(h.rows(), h.cols());
  const double scale = std::sqrt(total_power / static_cast<double>(h.cols()));
  for (Eigen::Index k = 0; k < h.cols(); ++k)
    out.precoders.col(k) = scale / dirs.col(k).norm() * dirs.col(k);
  return out;
}

struct WmmseOptions {
  int max_iter = 200;
  double tol = 1e-6;
  int restarts = 3;
};

namespace detail {

// Beamformer block update in user space. With A = H D H^H + mu I the update
// W = A^{-1} H diag(c) equals H B with
//   B(mu) = mu^{-1} (diag(c) - S Q^{-1} S G diag(c)),  Q = mu I + S G S,
// where G = H^H H, S = sqrt(D). Per-user powers come from B^H G B.
struct WmmseWorkspace {
  cmat g;          // K x K Gram matrix
  rvec sqrt_d;     // S diagonal
  cvec c;          // u_k v_k
  cmat g_c;        // G diag(c)

  cmat coefficients(double mu) const {
    const Eigen::Index k = g.rows();
    cmat q = mu * cmat::Identity(k, k);
    for (Eigen::Index i = 0; i < k; ++i)
      for (Eigen::Index j = 0; j < k; ++j) q(i, j) += sqrt_d[i] * g(i, j) * sqrt_d[j];
    cmat rhs = sqrt_d.cast<cplx>().asDiagonal() * g_c;
    cmat b = c.asDiagonal();
    b -= sqrt_d.cast<cplx>().asDiagonal() * q.ldlt().solve(rhs);
    return b / mu;
  }

  double power(const cmat& b) const {
    return (b.adjoint() * g * b).diagonal().real().sum();
  }
};

}  // namespace detail

// Iterative WMMSE sum-rate maximization (alternating receive scalars, MMSE
// weights, and transmit beamformers; power constraint via bisection on the
// beamformer-update multiplier). Returns the best of `restarts` random
// initializations; restart 0 starts from scaled MRT, later restarts perturb it.
inline BeamformerSet wmmse(const cmat& h, double total_power, double sigma2, RngStream& rng,
                           const WmmseOptions& opts = {}) {
  require(total_power > 0.0 && sigma2 > 0.0, "wmmse: power and noise must be positive");
  const Eigen::Index n = h.rows();
  const Eigen::Index k_users = h.cols();
  const cmat gram = h.adjoint() * h;

  BeamformerSet best;
  double best_rate = -1.0;

  for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
    cmat w = mrt(h, total_power).precoders;
    if (restart > 0) {
      const double pert_var = total_power / static_cast<double>(k_users * n);
      for (Eigen::Index kk = 0; kk < k_users; ++kk)
        w.col(kk) += 0.5 * rng.cnormal_vector(n, pert_var);
      w *= std::sqrt(total_power) / w.norm();
    }

    BeamformerSet cur;
    cur.total_power = total_power;
    double prev_rate = -1.0;
    for (int it = 0; it < opts.max_iter; ++it) {
      const cmat gains = h.adjoint() * w;  // gains(k, j) = h_k^H w_j
      cvec u(k_users);
      rvec weights(k_users);
      for (Eigen::Index k = 0; k < k_users; ++k) {
        double total = sigma2;
        for (Eigen::Index j = 0; j < k_users; ++j) total += std::norm(gains(k, j));
        u[k] = gains(k, k) / total;
        const double mse = 1.0 - (std::conj(u[k]) * gains(k, k)).real();
        weights[k] = 1.0 / std::max(mse, 1e-15);
      }

      detail::WmmseWorkspace ws;
      ws.g = gram;
      ws.sqrt_d = rvec(k_users);
      ws.c = cvec(k_users);
      for (Eigen::Index k = 0; k < k_users; ++k) {
        ws.sqrt_d[k] = std::sqrt(weights[k] * std::norm(u[k]));
        ws.c[k] = u[k] * weights[k];
      }
      ws.g_c = gram * ws.c.asDiagonal();

      const double mu_scale = (ws.sqrt_d.array().square() * gram.diagonal().real().array()).sum() /
                              static_cast<double>(k_users);
      if (!(mu_scale > 0.0))
        throw Error("wmmse: degenerate update (all effective user weights vanished)");
      double mu_lo = 1e-14 * mu_scale;
      cmat b = ws.coefficients(mu_lo);
      if (ws.power(b) > total_power) {
        double mu_hi = mu_scale;
        int guard = 0;
        while (ws.power(ws.coefficients(mu_hi)) > total_power) {
          mu_hi *= 10.0;
          if (++guard > 60)
            throw Error("wmmse: bisection bracket failure (power does not drop below budget)");
        }
        for (int step = 0; step < 200; ++step) {
          const double mu_mid = std::sqrt(mu_lo * mu_hi);
          if (ws.power(ws.coefficients(mu_mid)) > total_power)
            mu_lo = mu_mid;
          else
            mu_hi = mu_mid;
          if (mu_hi / mu_lo < 1.0 + 1e-13) break;
        }
        b = ws.coefficients(mu_hi);
      }
      w = h * b;
      const double p = w.squaredNorm();
      if (p > total_power) w *= std::sqrt(total_power / p);

      const double rate = sum_rate(h, BeamformerSet{w, total_power, {}}, sigma2);
      cur.objective_trajectory.push_back(rate);
      if (prev_rate >= 0.0 && std::abs(rate - prev_rate) < opts.tol * std::max(prev_rate, 1e-12))
        break;
      prev_rate = rate;
    }
    cur.precoders = w;
    const double rate = cur.objective_trajectory.empty() ? 0.0 : cur.objective_trajectory.back();
    if (rate > best_rate) {
      best_rate = rate;
      best = std::move(cur);
    }
  }
  return best;
}

}  // namespace umsim
