#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "umsim/common.hpp"
#include "umsim/measurement.hpp"
#include "umsim/prior.hpp"
#include "umsim/rng.hpp"

namespace umsim {

namespace detail {

// Complex-circular Monte Carlo divergence estimate Re tr df/dy with
// (+-1 +-j)-valued probe vectors: E Re{c^H (f(y+eps c) - f(y))} / (2 eps).
inline double mc_divergence(const std::function<cvec(const cvec&)>& f, const cvec& y,
                            const cvec& fy, double eps, int n_probes, RngStream& rng) {
  require(n_probes >= 1, "mc_divergence: need at least one probe");
  const Eigen::Index n = y.size();
  double acc = 0.0;
  for (int p = 0; p < n_probes; ++p) {
    cvec c(n);
    for (Eigen::Index i = 0; i < n; ++i)
      c[i] = cplx(rng.uniform01() < 0.5 ? -1.0 : 1.0, rng.uniform01() < 0.5 ? -1.0 : 1.0);
    acc += (c.adjoint() * (f(y + eps * c) - fy))(0, 0).real() / (2.0 * eps);
  }
  return acc / n_probes;
}

struct ThinSvd {
  cmat u;   // m x r
  cmat v;   // n x r
  rvec s;   // r
  ThinSvd(const cmat& a) {
    Eigen::BDCSVD<cmat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    u = svd.matrixU();
    v = svd.matrixV();
    s = svd.singularValues();
  }
  bool full_row_rank(double rel_tol = 1e-10) const {
    return s.size() >= u.rows() && s[s.size() - 1] > rel_tol * s[0];
  }
};

}  // namespace detail

inline cvec ls_estimate(const cmat& m, const cvec& y) {
  if (y.size() != m.rows()) throw ShapeError("ls_estimate: dimension mismatch");
  detail::ThinSvd svd(m);
  if (!svd.full_row_rank())
    throw NumericalRankError("ls_estimate: measurement matrix is numerically rank-deficient");
  cvec t = svd.u.adjoint() * y;
  t = (t.array() / svd.s.array().cast<cplx>()).matrix();
  return svd.v * t;
}

inline cvec ls_estimate(const MeasurementOperator& op, const cvec& y) {
  return ls_estimate(op.matrix, y);
}

inline cvec lmmse_estimate(const cmat& m, const cvec& y, const cmat& c, double sigma2) {
  if (y.size() != m.rows() || c.rows() != m.cols() || c.rows() != c.cols())
    throw ShapeError("lmmse_estimate: dimension mismatch");
  const cmat mc = m * c;
  cmat inner = mc * m.adjoint();
  inner.diagonal().array() += sigma2;
  Eigen::LDLT<cmat> ldlt(inner);
  const double dmax = ldlt.vectorD().real().cwiseAbs().maxCoeff();
  const double dmin = ldlt.vectorD().real().minCoeff();
  if (ldlt.info() != Eigen::Success || !(dmin > 1e-13 * dmax))
    throw NumericalRankError("lmmse_estimate: M C M^H + sigma2 I is numerically singular");
  return mc.adjoint() * ldlt.solve(y);
}

inline cvec lmmse_estimate(const MeasurementOperator& op, const cvec& y, const cmat& c) {
  return lmmse_estimate(op.matrix, y, c, op.noise_variance);
}

struct OampOptions {
  int max_iter = 50;
  double tol = 1e-6;
  double damping = 0.7;  // weight on the new iterate when blending
  double initial_v2 = -1.0;  // < 0: use ||y||^2 / tr(M M^H) - sigma2
  int divergence_probes = 4;       // Monte Carlo fallback when the denoiser
  RngStream* probe_rng = nullptr;  // carries no analytic divergence
};

struct EstimatorReport {
  cvec estimate;
  std::vector<double> per_iteration_residual;
  int iterations_used = 0;
  bool converged = false;
  std::vector<double> effective_noise_track;  // scalar state v_t^2
  rvec last_pointwise_variance;               // per-entry posterior variances, if provided
};

// De-correlated OAMP: a trace-normalized LMMSE linear stage decouples the
// measurement into an AWGN denoising problem at effective noise tau_t^2; the
// NLE applies the divergence-corrected denoiser. The reported estimate is the
// denoiser's posterior output at the final iteration.
inline EstimatorReport oamp_estimate(const cmat& m, const cvec& y, double sigma2,
                                     const Denoiser& denoiser, const OampOptions& opts = {}) {
  if (y.size() != m.rows()) throw ShapeError("oamp_estimate: dimension mismatch");
  const Eigen::Index n = m.cols();
  const double n_d = static_cast<double>(n);

  detail::ThinSvd svd(m);
  const rvec s2 = svd.s.array().square();
  const cvec y_t = svd.u.adjoint() * y;  // rotated measurement, r coords
  const Eigen::Index r = svd.s.size();

  const double tr_mmh = s2.sum();
  double v2 = opts.initial_v2 >= 0.0 ? opts.initial_v2
                                     : y.squaredNorm() / tr_mmh - sigma2;
  v2 = std::max(v2, 1e-12);

  EstimatorReport rep;
  cvec x = cvec::Zero(n);     // extrinsic message into the LE
  cvec u_prev;                // posterior estimate sequence
  RngStream fallback_rng(0x0a3bdecafe150ULL);
  RngStream* probe_rng = opts.probe_rng ? opts.probe_rng : &fallback_rng;

  for (int it = 1; it <= opts.max_iter; ++it) {
    // LE with trace normalization (divergence-free linear stage).
    rvec beta = (v2 * s2.array() / (v2 * s2.array() + sigma2)).matrix();  // eigs of W_hat M
    const double t = beta.sum();
    const double gamma = n_d / t;
    rvec w_coef = (gamma * v2 * svd.s.array() / (v2 * s2.array() + sigma2)).matrix();
    cvec proj = svd.v.adjoint() * x;                       // r coords
    cvec resid_t = y_t - (svd.s.array().cast<cplx>() * proj.array()).matrix();
    cvec r_vec = x + svd.v * (w_coef.array().cast<cplx>() * resid_t.array()).matrix();

    // Effective noise of the decoupled AWGN problem.
    double tr_bb = (n_d - r) ;
    for (Eigen::Index i = 0; i < r; ++i) {
      const double b = 1.0 - gamma * beta[i];
      tr_bb += b * b;
    }
    const double tr_ww = w_coef.squaredNorm();
    const double tau2 = std::max(v2 / n_d * tr_bb + sigma2 / n_d * tr_ww, 1e-12);

    // NLE.
    DenoiseResult d = denoiser(r_vec, tau2);
    double div;
    if (d.divergence) {
      div = *d.divergence;
    } else {
      const double eps = 1e-3 * std::sqrt(tau2) * (1.0 + r_vec.norm() / std::sqrt(n_d));
      div = detail::mc_divergence(
          [&](const cvec& q) { return denoiser(q, tau2).value; }, r_vec, d.value, eps,
          opts.divergence_probes, *probe_rng);
    }
    double alpha = div / n_d;
    alpha = std::min(std::max(alpha, 1e-12), 1.0 - 1e-9);
    cvec x_new = (d.value - alpha * r_vec) / (1.0 - alpha);
    double v2_new = std::max(alpha * tau2 / (1.0 - alpha), 1e-12);

    x = opts.damping * x_new + (1.0 - opts.damping) * x;
    v2 = opts.damping * v2_new + (1.0 - opts.damping) * v2;

    if (!x.allFinite() || !d.value.allFinite() || !std::isfinite(v2))
      throw DivergenceError("oamp_estimate: non-finite state", it);

    double residual;
    if (it == 1) {
      residual = d.value.norm() == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      const double denom = u_prev.norm();
      const double num = (d.value - u_prev).norm();
      residual = denom > 0.0 ? num / denom
                             : (num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    }
    rep.per_iteration_residual.push_back(residual);
    rep.effective_noise_track.push_back(v2);
    rep.iterations_used = it;
    u_prev = d.value;
    rep.estimate = std::move(d.value);
    rep.last_pointwise_variance = std::move(d.pointwise_variance);
    if (residual < opts.tol) {
      rep.converged = true;
      break;
    }
  }
  return rep;
}

inline EstimatorReport oamp_estimate(const MeasurementOperator& op, const cvec& y,
                                     const Denoiser& denoiser, const OampOptions& opts = {}) {
  return oamp_estimate(op.matrix, y, op.noise_variance, denoiser, opts);
}

// Stein's unbiased risk estimate for y = h + n, n ~ CN(0, sigma2 I):
//   ||y - f(y)||^2 - N sigma2 + 2 sigma2 div,
// with the analytic divergence when the denoiser provides one, otherwise a
// Monte Carlo probe at step eps = 1e-3 sigma (1 + ||y||/sqrt(N)).
inline double sure(const Denoiser& denoiser, const cvec& y, double sigma2, int n_probes,
                   RngStream& rng) {
  require(sigma2 > 0.0, "sure: noise variance must be positive");
  const double n_d = static_cast<double>(y.size());
  DenoiseResult d = denoiser(y, sigma2);
  double div;
  if (d.divergence) {
    div = *d.divergence;
  } else {
    const double eps = 1e-3 * std::sqrt(sigma2) * (1.0 + y.norm() / std::sqrt(n_d));
    div = detail::mc_divergence([&](const cvec& q) { return denoiser(q, sigma2).value; }, y,
                                d.value, eps, n_probes, rng);
  }
  return (y - d.value).squaredNorm() - n_d * sigma2 + 2.0 * sigma2 * div;
}

// Generalized SURE for y = M h + n. Estimates E ||P(h_hat - h)||^2 up to an
// additive constant independent of the denoiser, with P the projection onto
// the row space of M. The denoiser consumes the sufficient statistic
// u = M^H y / sigma2; its divergence is always probed by Monte Carlo.
inline double gsure(const std::function<cvec(const cvec&)>& denoiser_u, const cmat& m,
                    const cvec& y, double sigma2, int n_probes, RngStream& rng) {
  require(sigma2 > 0.0, "gsure: noise variance must be positive");
  if (y.size() != m.rows()) throw ShapeError("gsure: dimension mismatch");
  detail::ThinSvd svd(m);
  if (!svd.full_row_rank())
    throw NumericalRankError("gsure: measurement matrix is numerically rank-deficient");

  const cvec u = m.adjoint() * y / sigma2;
  cvec t = svd.u.adjoint() * y;
  t = (t.array() / svd.s.array().cast<cplx>()).matrix();
  const cvec h_ml = svd.v * t;  // P h_ml = M^+ y

  auto project = [&](const cvec& q) { return cvec(svd.v * (svd.v.adjoint() * q)); };
  const cvec g = project(denoiser_u(u));
  const double eps = 1e-3 * (1.0 + u.norm() / std::sqrt(static_cast<double>(u.size())));
  const double div = detail::mc_divergence(
      [&](const cvec& q) { return project(denoiser_u(q)); }, u, g, eps, n_probes, rng);
  return g.squaredNorm() - 2.0 * (g.adjoint() * h_ml)(0, 0).real() + 2.0 * div;
}

// Empirical lower bound on the Lipschitz constant of an operator, from the
// maximum ratio over sampled input pairs.
inline double lipschitz_probe(const std::function<cvec(const cvec&)>& op,
                              const std::function<cvec(RngStream&)>& domain_sampler, int n_pairs,
                              RngStream& rng) {
  require(n_pairs >= 1, "lipschitz_probe: need at least one pair");
  double best = 0.0;
  for (int i = 0; i < n_pairs; ++i) {
    const cvec a = domain_sampler(rng);
    const cvec b = domain_sampler(rng);
    const double dist = (a - b).norm();
    if (dist == 0.0) continue;
    best = std::max(best, (op(a) - op(b)).norm() / dist);
  }
  return best;
}

// 10 log10(||h_hat - h||^2 / ||h||^2), floored at -300 dB for exact recovery.
inline double nmse_db(const cvec& estimate, const cvec& truth) {
  if (estimate.size() != truth.size()) throw ShapeError("nmse: length mismatch");
  const double denom = truth.squaredNorm();
  if (denom == 0.0) throw InvalidParameterError("nmse: true channel must be nonzero");
  const double ratio = (estimate - truth).squaredNorm() / denom;
  if (ratio <= 1e-30) return -300.0;
  return std::max(10.0 * std::log10(ratio), -300.0);
}

}  // namespace umsim
