#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "umsim/common.hpp"
#include "umsim/estimation.hpp"
#include "umsim/rng.hpp"

namespace umsim {

enum class ConstellationKind { qpsk, qam16 };

inline ConstellationKind constellation_kind_from_string(const std::string& s) {
  if (s == "qpsk") return ConstellationKind::qpsk;
  if (s == "qam16") return ConstellationKind::qam16;
  throw InvalidParameterError("unknown constellation: " + s);
}

// Unit-average-energy grid constellation with Gray labeling. Point order is
// the label order (I bits high, Q bits low), so it is deterministic.
struct Constellation {
  ConstellationKind kind = ConstellationKind::qpsk;
  std::vector<cplx> points;
  int bits_per_symbol = 0;

  int size() const { return static_cast<int>(points.size()); }

  int nearest_index(cplx v) const {
    int best = 0;
    double best_d = std::norm(v - points[0]);
    for (int i = 1; i < size(); ++i) {
      const double d = std::norm(v - points[static_cast<size_t>(i)]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }
  cplx nearest(cplx v) const { return points[static_cast<size_t>(nearest_index(v))]; }
};

inline Constellation make_constellation(ConstellationKind kind) {
  Constellation c;
  c.kind = kind;
  switch (kind) {
    case ConstellationKind::qpsk: {
      c.bits_per_symbol = 2;
      const double s = 1.0 / std::sqrt(2.0);
      // Per-axis Gray labels: bit 0 -> +1, bit 1 -> -1.
      for (int bi = 0; bi < 2; ++bi)
        for (int bq = 0; bq < 2; ++bq)
          c.points.emplace_back(s * (1 - 2 * bi), s * (1 - 2 * bq));
      break;
    }
    case ConstellationKind::qam16: {
      c.bits_per_symbol = 4;
      const double s = 1.0 / std::sqrt(10.0);
      // 2-bit Gray levels per axis: 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
      const double level[4] = {-3.0, -1.0, 3.0, 1.0};
      for (int bi = 0; bi < 4; ++bi)
        for (int bq = 0; bq < 4; ++bq) c.points.emplace_back(s * level[bi], s * level[bq]);
      break;
    }
  }
  return c;
}

// Exact posterior mean/variance of a uniformly drawn constellation symbol
// observed through AWGN with variance tau2.
inline void constellation_posterior(const Constellation& c, cplx r, double tau2, cplx& mean,
                                    double& var) {
  const double inv_t = 1.0 / std::max(tau2, 1e-12);
  double max_lg = -1e300;
  const int q = c.size();
  double lg[64];
  for (int k = 0; k < q; ++k) {
    lg[k] = -std::norm(r - c.points[static_cast<size_t>(k)]) * inv_t;
    max_lg = std::max(max_lg, lg[k]);
  }
  double sum = 0.0;
  cplx m(0.0, 0.0);
  double second = 0.0;
  for (int k = 0; k < q; ++k) {
    const double w = std::exp(lg[k] - max_lg);
    sum += w;
    m += w * c.points[static_cast<size_t>(k)];
    second += w * std::norm(c.points[static_cast<size_t>(k)]);
  }
  mean = m / sum;
  var = std::max(0.0, second / sum - std::norm(mean));
}

inline Denoiser constellation_denoiser(const Constellation& c) {
  return [c](const cvec& r, double tau2) {
    DenoiseResult out;
    out.value.resize(r.size());
    out.pointwise_variance.resize(r.size());
    double div = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      cplx m;
      double v;
      constellation_posterior(c, r[i], tau2, m, v);
      out.value[i] = m;
      out.pointwise_variance[i] = v;
      div += v / std::max(tau2, 1e-12);
    }
    out.divergence = div;
    return out;
  };
}

struct DetectionResult {
  cvec hard_symbols;
  cvec soft_means;       // iterative detectors only
  rvec soft_variances;   // iterative detectors only
  int iterations_used = 0;
};

enum class LinearDetector { zf, lmmse };

inline DetectionResult linear_detect(LinearDetector method, const cmat& h, const cvec& y,
                                     double sigma2, const Constellation& c) {
  if (y.size() != h.rows()) throw ShapeError("linear_detect: dimension mismatch");
  cvec est;
  if (method == LinearDetector::zf) {
    if (h.rows() < h.cols()) throw ShapeError("linear_detect: zf needs at least as many rows as columns");
    Eigen::BDCSVD<cmat> svd(h, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const rvec& s = svd.singularValues();
    if (!(s[s.size() - 1] > 1e-10 * s[0]))
      throw NumericalRankError("linear_detect: zf requires full column rank");
    est = svd.solve(y);
  } else {
    cmat a = h.adjoint() * h;
    a.diagonal().array() += sigma2;
    est = a.ldlt().solve(h.adjoint() * y);
  }
  DetectionResult out;
  out.hard_symbols.resize(est.size());
  for (Eigen::Index i = 0; i < est.size(); ++i) out.hard_symbols[i] = c.nearest(est[i]);
  out.iterations_used = 1;
  return out;
}

struct DetectOptions {
  int max_iter = 30;
  double tol = 1e-6;
  double oamp_damping = 0.9;
  double ep_damping = 0.9;     // weight on the new natural parameters
  int ep_max_iter = 20;
  double ep_var_floor = 1e-12;
};

// AMP with Onsager correction for i.i.d. H (entries ~ CN(0, 1/rows)). The
// decoupled-model variance follows the state evolution recursion
// tau^2 = sigma2 + (N/m) <posterior variance>.
inline DetectionResult detect_amp(const cmat& h, const cvec& y, double sigma2,
                                  const Constellation& c, const DetectOptions& opts = {}) {
  if (y.size() != h.rows()) throw ShapeError("detect_amp: dimension mismatch");
  const Eigen::Index n = h.cols();
  const Eigen::Index m = h.rows();
  const double beta = static_cast<double>(n) / static_cast<double>(m);

  cvec x = cvec::Zero(n);
  cvec z = cvec::Zero(m);
  double avg_var = 1.0;  // unit-energy constellations
  double onsager = 0.0;
  double tau2 = sigma2 + beta * avg_var;

  DetectionResult out;
  out.soft_means = cvec::Zero(n);
  out.soft_variances = rvec::Zero(n);
  for (int it = 1; it <= opts.max_iter; ++it) {
    z = y - h * x + onsager * z;
    const cvec r = x + h.adjoint() * z;
    tau2 = sigma2 + beta * avg_var;

    cvec x_new(n);
    double var_sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      cplx mean;
      double var;
      constellation_posterior(c, r[i], tau2, mean, var);
      x_new[i] = mean;
      out.soft_variances[i] = var;
      var_sum += var;
    }
    if (!x_new.allFinite()) throw DivergenceError("detect_amp: non-finite state", it);
    const double delta = (x_new - x).cwiseAbs().mean();
    avg_var = var_sum / static_cast<double>(n);
    onsager = beta * avg_var / std::max(tau2, 1e-12);
    x = x_new;
    out.iterations_used = it;
    if (delta < opts.tol) break;
  }
  out.soft_means = x;
  out.hard_symbols.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.hard_symbols[i] = c.nearest(x[i]);
  return out;
}

// OAMP detection through the shared recursion of oamp_estimate; handles
// general (non-i.i.d.) H at the cost of an SVD.
inline DetectionResult detect_oamp(const cmat& h, const cvec& y, double sigma2,
                                   const Constellation& c, const DetectOptions& opts = {}) {
  OampOptions oopts;
  oopts.max_iter = opts.max_iter;
  oopts.tol = opts.tol;
  oopts.damping = opts.oamp_damping;
  oopts.initial_v2 = 1.0;  // unit-energy symbols
  EstimatorReport rep = oamp_estimate(h, y, sigma2, constellation_denoiser(c), oopts);
  DetectionResult out;
  out.soft_means = rep.estimate;
  out.soft_variances = rep.last_pointwise_variance;
  out.iterations_used = rep.iterations_used;
  out.hard_symbols.resize(rep.estimate.size());
  for (Eigen::Index i = 0; i < rep.estimate.size(); ++i)
    out.hard_symbols[i] = c.nearest(rep.estimate[i]);
  return out;
}

// Expectation propagation with damped natural-parameter updates and an
// explicit per-iteration matrix inversion.
inline DetectionResult detect_ep(const cmat& h, const cvec& y, double sigma2,
                                 const Constellation& c, const DetectOptions& opts = {}) {
  if (y.size() != h.rows()) throw ShapeError("detect_ep: dimension mismatch");
  const Eigen::Index n = h.cols();
  const double inv_s2 = 1.0 / std::max(sigma2, opts.ep_var_floor);

  const cmat gram = h.adjoint() * h * inv_s2;
  const cvec hy = h.adjoint() * y * inv_s2;

  rvec lambda = rvec::Constant(n, 1.0);  // unit-energy prior as initial factor
  cvec gamma_p = cvec::Zero(n);

  DetectionResult out;
  out.soft_means = cvec::Zero(n);
  out.soft_variances = rvec::Constant(n, 1.0);

  for (int it = 1; it <= opts.ep_max_iter; ++it) {
    cmat a = gram;
    a.diagonal() += lambda.cast<cplx>();
    Eigen::LLT<cmat> llt(a);
    if (llt.info() != Eigen::Success)
      throw DivergenceError("detect_ep: gaussian covariance not positive definite", it);
    const cmat cov = llt.solve(cmat::Identity(n, n));
    const cvec mu = llt.solve(hy + gamma_p);

    bool finite = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sii = std::max(cov(i, i).real(), opts.ep_var_floor);
      const double cav_prec = 1.0 / sii - lambda[i];
      if (!(cav_prec > 0.0)) continue;  // skip unstable site this round
      const double cav_var = 1.0 / cav_prec;
      const cplx cav_mean = cav_var * (mu[i] / sii - gamma_p[i]);

      cplx post_mean;
      double post_var;
      constellation_posterior(c, cav_mean, cav_var, post_mean, post_var);
      post_var = std::max(post_var, opts.ep_var_floor);

      const double lambda_new = 1.0 / post_var - 1.0 / cav_var;
      const cplx gamma_new = post_mean / post_var - cav_mean / cav_var;
      if (!std::isfinite(lambda_new) || !std::isfinite(gamma_new.real()) ||
          !std::isfinite(gamma_new.imag())) {
        finite = false;
        continue;
      }
      if (lambda_new <= 0.0) continue;
      lambda[i] = opts.ep_damping * lambda_new + (1.0 - opts.ep_damping) * lambda[i];
      gamma_p[i] = opts.ep_damping * gamma_new + (1.0 - opts.ep_damping) * gamma_p[i];

      out.soft_means[i] = post_mean;
      out.soft_variances[i] = post_var;
    }
    if (!finite) throw DivergenceError("detect_ep: non-finite natural parameters", it);
    out.iterations_used = it;
  }
  out.hard_symbols.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) out.hard_symbols[i] = c.nearest(out.soft_means[i]);
  return out;
}

// Exhaustive maximum likelihood search; ties break to the lowest
// lexicographic symbol-index vector.
inline DetectionResult detect_ml(const cmat& h, const cvec& y, const Constellation& c) {
  if (y.size() != h.rows()) throw ShapeError("detect_ml: dimension mismatch");
  const int n = static_cast<int>(h.cols());
  const int q = c.size();
  double hypotheses = std::pow(static_cast<double>(q), n);
  if (hypotheses > static_cast<double>(1 << 20))
    throw TooLargeError("detect_ml: search space exceeds 2^20 hypotheses");

  std::vector<int> idx(static_cast<size_t>(n), 0);
  std::vector<int> best_idx = idx;
  double best_metric = std::numeric_limits<double>::infinity();
  cvec x(n);
  while (true) {
    for (int i = 0; i < n; ++i) x[i] = c.points[static_cast<size_t>(idx[static_cast<size_t>(i)])];
    const double metric = (y - h * x).squaredNorm();
    if (metric < best_metric) {
      best_metric = metric;
      best_idx = idx;
    }
    int pos = n - 1;
    while (pos >= 0 && idx[static_cast<size_t>(pos)] == q - 1) idx[static_cast<size_t>(pos--)] = 0;
    if (pos < 0) break;
    ++idx[static_cast<size_t>(pos)];
  }
  DetectionResult out;
  out.hard_symbols.resize(n);
  for (int i = 0; i < n; ++i)
    out.hard_symbols[i] = c.points[static_cast<size_t>(best_idx[static_cast<size_t>(i)])];
  out.iterations_used = 1;
  return out;
}

// Fraction of mismatched symbols (exact complex equality of constellation
// members).
inline double ser(const cvec& decided, const cvec& truth) {
  if (decided.size() != truth.size()) throw ShapeError("ser: length mismatch");
  Eigen::Index errors = 0;
  for (Eigen::Index i = 0; i < decided.size(); ++i)
    if (decided[i] != truth[i]) ++errors;
  return static_cast<double>(errors) / static_cast<double>(decided.size());
}

}  // namespace umsim
