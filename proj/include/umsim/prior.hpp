#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "umsim/common.hpp"
#include "umsim/rng.hpp"

namespace umsim {

// Output of a denoiser evaluation. `divergence` is the complex-circular
// divergence Re sum_i df_i/dy_i when available in closed form; iterative
// algorithms fall back to Monte Carlo probing when it is absent.
// `pointwise_variance` carries per-entry posterior variances for separable
// Bayes denoisers (empty otherwise).
struct DenoiseResult {
  cvec value;
  std::optional<double> divergence;
  rvec pointwise_variance;
};

using Denoiser = std::function<DenoiseResult(const cvec& y, double sigma2)>;

inline Denoiser identity_denoiser() {
  return [](const cvec& y, double) {
    return DenoiseResult{y, static_cast<double>(y.size()), rvec()};
  };
}

inline Denoiser shrinkage_denoiser(double a) {
  return [a](const cvec& y, double) {
    return DenoiseResult{a * y, a * static_cast<double>(y.size()), rvec()};
  };
}

enum class PriorFamily { gaussian, bernoulli_gaussian, gaussian_mixture };

// Analytic channel prior over C^dim with exact sampling, the sigma-smoothed
// score d/dy* log p_sigma(y) for y = h + n, n ~ CN(0, sigma2 I), and the
// closed-form MMSE denoiser via Tweedie's formula  E[h|y] = y + sigma2 * score.
//
// Bernoulli-Gaussian and mixture priors are separable (i.i.d. entries); the
// Gaussian family supports a full covariance.
class Prior {
 public:
  static Prior gaussian(cvec mean, const cmat& covariance) {
    require(mean.size() == covariance.rows() && covariance.rows() == covariance.cols(),
            "prior: mean/covariance dimensions disagree");
    Prior p;
    p.family_ = PriorFamily::gaussian;
    p.dim_ = static_cast<int>(mean.size());
    p.mean_ = std::move(mean);
    if (covariance.isDiagonal(1e-14)) {
      p.eigvals_ = covariance.diagonal().real();
    } else {
      Eigen::SelfAdjointEigenSolver<cmat> es(covariance);
      p.eigvals_ = es.eigenvalues();
      p.eigvecs_ = es.eigenvectors();
    }
    for (int i = 0; i < p.eigvals_.size(); ++i)
      require(p.eigvals_[i] > -1e-12 * p.eigvals_.cwiseAbs().maxCoeff(),
              "prior: covariance must be positive semidefinite");
    p.eigvals_ = p.eigvals_.cwiseMax(0.0);
    return p;
  }

  static Prior gaussian_iid(int dim, double variance, cplx mean = cplx(0.0, 0.0)) {
    require(dim >= 1 && variance >= 0.0, "prior: bad iid gaussian parameters");
    Prior p;
    p.family_ = PriorFamily::gaussian;
    p.dim_ = dim;
    p.mean_ = cvec::Constant(dim, mean);
    p.eigvals_ = rvec::Constant(dim, variance);
    return p;
  }

  static Prior bernoulli_gaussian(int dim, double sparsity, double slab_variance) {
    require(dim >= 1, "prior: dimension must be >= 1");
    require(sparsity > 0.0 && sparsity < 1.0, "prior: sparsity must lie in (0, 1)");
    require(slab_variance > 0.0, "prior: slab variance must be positive");
    Prior p;
    p.family_ = PriorFamily::bernoulli_gaussian;
    p.dim_ = dim;
    p.weights_ = {1.0 - sparsity, sparsity};
    p.comp_means_ = {cplx(0.0, 0.0), cplx(0.0, 0.0)};
    p.comp_vars_ = {0.0, slab_variance};
    return p;
  }

  static Prior gaussian_mixture(int dim, std::vector<double> weights, std::vector<cplx> means,
                                std::vector<double> variances) {
    require(dim >= 1, "prior: dimension must be >= 1");
    require(!weights.empty() && weights.size() == means.size() && means.size() == variances.size(),
            "prior: mixture parameter lists must be non-empty and equal-length");
    double sum = 0.0;
    for (double w : weights) {
      require(w > 0.0, "prior: mixture weights must be positive");
      sum += w;
    }
    require(std::abs(sum - 1.0) <= 1e-12, "prior: mixture weights must sum to 1");
    for (double v : variances) require(v > 0.0, "prior: mixture variances must be positive");
    Prior p;
    p.family_ = PriorFamily::gaussian_mixture;
    p.dim_ = dim;
    p.weights_ = std::move(weights);
    p.comp_means_ = std::move(means);
    p.comp_vars_ = std::move(variances);
    return p;
  }

  PriorFamily family() const { return family_; }
  int dimension() const { return dim_; }

  // Marginal mean / covariance, used by the oracle LMMSE baseline.
  cvec mean() const {
    if (family_ == PriorFamily::gaussian) return mean_;
    cplx m(0.0, 0.0);
    for (size_t k = 0; k < weights_.size(); ++k) m += weights_[k] * comp_means_[k];
    return cvec::Constant(dim_, m);
  }

  double marginal_variance() const {
    if (family_ == PriorFamily::gaussian) return eigvals_.mean();
    cplx m(0.0, 0.0);
    double second = 0.0;
    for (size_t k = 0; k < weights_.size(); ++k) {
      m += weights_[k] * comp_means_[k];
      second += weights_[k] * (comp_vars_[k] + std::norm(comp_means_[k]));
    }
    return second - std::norm(m);
  }

  cmat covariance() const {
    if (family_ == PriorFamily::gaussian) {
      if (eigvecs_.size() == 0) return eigvals_.cast<cplx>().asDiagonal();
      return eigvecs_ * eigvals_.cast<cplx>().asDiagonal() * eigvecs_.adjoint();
    }
    return marginal_variance() * cmat::Identity(dim_, dim_);
  }

  cvec sample(RngStream& rng) const {
    if (family_ == PriorFamily::gaussian) {
      cvec z(dim_);
      for (int i = 0; i < dim_; ++i) z[i] = rng.cnormal(1.0);
      if (eigvecs_.size() == 0) return mean_ + eigvals_.cwiseSqrt().cast<cplx>().asDiagonal() * z;
      return mean_ + eigvecs_ * (eigvals_.cwiseSqrt().cast<cplx>().asDiagonal() * z);
    }
    cvec h(dim_);
    for (int i = 0; i < dim_; ++i) {
      const size_t k = pick_component(rng);
      h[i] = comp_means_[k] + (comp_vars_[k] > 0.0 ? rng.cnormal(comp_vars_[k]) : cplx(0.0, 0.0));
    }
    return h;
  }

  // Smoothed score d/dy* log p_sigma(y). sigma2 = 0 requires a smooth density:
  // any Gaussian/mixture with strictly positive variances.
  cvec score(const cvec& y, double sigma2) const {
    require(sigma2 >= 0.0, "score: noise variance must be >= 0");
    check_dim(y);
    if (family_ == PriorFamily::gaussian) {
      rvec denom = eigvals_.array() + sigma2;
      if (denom.minCoeff() <= 0.0)
        throw UnsupportedEvaluationError("score: degenerate gaussian needs sigma2 > 0");
      if (eigvecs_.size() == 0) return -((y - mean_).array() / denom.array().cast<cplx>()).matrix();
      cvec t = eigvecs_.adjoint() * (y - mean_);
      t = (t.array() / denom.array().cast<cplx>()).matrix();
      return -(eigvecs_ * t);
    }
    if (family_ == PriorFamily::bernoulli_gaussian && sigma2 == 0.0)
      throw UnsupportedEvaluationError("score: bernoulli-gaussian prior has no density at sigma2 = 0");
    for (double c : comp_vars_)
      if (c + sigma2 <= 0.0)
        throw UnsupportedEvaluationError("score: smoothed component variance must be positive");
    cvec s(dim_);
    std::vector<double> gamma(weights_.size());
    for (int i = 0; i < dim_; ++i) {
      posterior_weights(y[i], sigma2, gamma);
      cplx acc(0.0, 0.0);
      for (size_t k = 0; k < weights_.size(); ++k)
        acc -= gamma[k] * (y[i] - comp_means_[k]) / (comp_vars_[k] + sigma2);
      s[i] = acc;
    }
    return s;
  }

  // Posterior mean E[h | y] in Tweedie form, with its analytic divergence and
  // per-entry posterior variances for the separable families.
  DenoiseResult denoise(const cvec& y, double sigma2) const {
    require(sigma2 > 0.0, "mmse_denoise: noise variance must be positive");
    check_dim(y);
    DenoiseResult out;
    out.value = y + sigma2 * score(y, sigma2);
    if (family_ == PriorFamily::gaussian) {
      out.divergence = (eigvals_.array() / (eigvals_.array() + sigma2)).sum();
      if (eigvecs_.size() == 0)
        out.pointwise_variance = (eigvals_.array() * sigma2 / (eigvals_.array() + sigma2)).matrix();
      return out;
    }
    // Separable mixture: posterior variance per entry; divergence = sum var / sigma2.
    out.pointwise_variance = rvec(dim_);
    std::vector<double> gamma(weights_.size());
    double div = 0.0;
    for (int i = 0; i < dim_; ++i) {
      posterior_weights(y[i], sigma2, gamma);
      cplx f(0.0, 0.0);
      double second = 0.0;
      for (size_t k = 0; k < weights_.size(); ++k) {
        const double v = comp_vars_[k] + sigma2;
        const double a = comp_vars_[k] / v;
        const cplx g = comp_means_[k] + a * (y[i] - comp_means_[k]);
        f += gamma[k] * g;
        second += gamma[k] * (comp_vars_[k] * sigma2 / v + std::norm(g));
      }
      const double var = std::max(0.0, second - std::norm(f));
      out.pointwise_variance[i] = var;
      div += var / sigma2;
    }
    out.divergence = div;
    return out;
  }

  cvec mmse_denoise(const cvec& y, double sigma2) const { return denoise(y, sigma2).value; }

  Denoiser denoiser() const {
    return [p = *this](const cvec& y, double sigma2) { return p.denoise(y, sigma2); };
  }

 private:
  void check_dim(const cvec& y) const {
    if (y.size() != dim_) throw ShapeError("prior: vector length does not match dimension");
  }

  size_t pick_component(RngStream& rng) const {
    const double u = rng.uniform01();
    double acc = 0.0;
    for (size_t k = 0; k < weights_.size(); ++k) {
      acc += weights_[k];
      if (u < acc) return k;
    }
    return weights_.size() - 1;
  }

  // Responsibilities of the sigma-smoothed mixture components at scalar y.
  void posterior_weights(cplx y, double sigma2, std::vector<double>& gamma) const {
    double max_log = -1e300;
    for (size_t k = 0; k < weights_.size(); ++k) {
      const double v = comp_vars_[k] + sigma2;
      const double lg = std::log(weights_[k]) - std::log(v) - std::norm(y - comp_means_[k]) / v;
      gamma[k] = lg;
      max_log = std::max(max_log, lg);
    }
    double sum = 0.0;
    for (double& g : gamma) {
      g = std::exp(g - max_log);
      sum += g;
    }
    for (double& g : gamma) g /= sum;
  }

  PriorFamily family_ = PriorFamily::gaussian;
  int dim_ = 0;
  // Gaussian family.
  cvec mean_;
  rvec eigvals_;
  cmat eigvecs_;  // empty for diagonal covariances
  // Separable mixture families (per-entry parameters).
  std::vector<double> weights_;
  std::vector<cplx> comp_means_;
  std::vector<double> comp_vars_;
};

}  // namespace umsim
