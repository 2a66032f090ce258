#pragma once

// Post-fit statistics: profile-likelihood standard errors, linear predictors
// and survival prediction.

#include "srcox/active_set.hpp"

#include <cstddef>
#include <functional>
#include <span>

namespace srcox {

// Profile interval where the deviance 2 (l_max - l_profile(c)) crosses 1.
struct LrInterval {
  std::size_t coefficient = 0;
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double se = 0.0;  // (upper - lower) / 2
};

class ProfileError : public std::runtime_error {
 public:
  ProfileError(const std::string& what, double value)
      : std::runtime_error(what), value_(value) {}
  // Fixed coefficient value at which the profile refit failed.
  double value() const { return value_; }

 private:
  double value_;
};

struct ProfileOptions {
  double deviance_tol = 1e-4;
  double bracket_multiplier = 4.0;  // initial bracket: estimate +- 4 Wald se
  int max_expansions = 30;
  int max_bisections = 200;
};

// Deviance-1 crossings of a profile log-likelihood, searched by bisection
// from `estimate +- initial_halfwidth`.
LrInterval lr_interval_from_profile(const std::function<double(double)>& profile_loglik,
                                    double estimate, double loglik_max, double initial_halfwidth,
                                    const ProfileOptions& options = {});

// Wald standard error of a coefficient from the information matrix
// restricted to the final working set.
double wald_standard_error(const SurvivalDataset& data, const FitResult& fit, std::size_t target);

// Profile log-likelihood with coefficient `target` fixed at `value`; every
// other parameter is refit under the same constraints.
double profile_loglik(const SurvivalDataset& data, const FitResult& fit, std::size_t target,
                      double value);

// target must be an unconstrained column of the fit.
LrInterval lr_standard_error(const SurvivalDataset& data, const FitResult& fit,
                             std::size_t target, const ProfileOptions& options = {});

// z beta^z + sum_i r_i(x_i) with uncentered components.
double linear_predictor(const FitResult& fit, std::span<const double> covariates);

class SurvivalCurve {
 public:
  SurvivalCurve(BaselineHazard baseline, double eta)
      : baseline_(std::move(baseline)), eta_(eta) {}
  double operator()(double t) const;
  double linear_predictor() const { return eta_; }

 private:
  BaselineHazard baseline_;
  double eta_;
};

SurvivalCurve survival_curve(const FitResult& fit, std::span<const double> covariates);

}  // namespace srcox
