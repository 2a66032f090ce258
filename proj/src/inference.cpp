#include "srcox/inference.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace srcox {

LrInterval lr_interval_from_profile(const std::function<double(double)>& profile_loglik,
                                    double estimate, double loglik_max, double initial_halfwidth,
                                    const ProfileOptions& options) {
  auto deviance = [&](double c) {
    double l = 0.0;
    try {
      l = profile_loglik(c);
    } catch (const ProfileError&) {
      throw;
    } catch (const std::exception& e) {
      throw ProfileError(std::string("profile refit failed: ") + e.what(), c);
    }
    return 2.0 * (loglik_max - l);
  };

  double h0 = initial_halfwidth;
  if (!(h0 > 0.0) || !std::isfinite(h0)) h0 = 1e-3 * std::max(1.0, std::abs(estimate));

  auto crossing = [&](double side) {
    double inner = estimate;
    double h = h0;
    double outer = estimate + side * h;
    double d_outer = deviance(outer);
    for (int k = 0; d_outer < 1.0; ++k) {
      if (k >= options.max_expansions)
        throw ProfileError("deviance never reached 1 while expanding the bracket", outer);
      inner = outer;
      h *= 2.0;
      outer = estimate + side * h;
      d_outer = deviance(outer);
    }
    if (std::abs(d_outer - 1.0) <= options.deviance_tol) return outer;
    double mid = 0.5 * (inner + outer);
    for (int k = 0; k < options.max_bisections; ++k) {
      mid = 0.5 * (inner + outer);
      const double d = deviance(mid);
      if (std::abs(d - 1.0) <= options.deviance_tol) break;
      if (d < 1.0)
        inner = mid;
      else
        outer = mid;
      if (std::abs(outer - inner) <= 1e-14 * (1.0 + std::abs(estimate))) break;
    }
    return mid;
  };

  LrInterval out;
  out.estimate = estimate;
  out.lower = crossing(-1.0);
  out.upper = crossing(+1.0);
  out.se = 0.5 * (out.upper - out.lower);
  return out;
}

double wald_standard_error(const SurvivalDataset& data, const FitResult& fit, std::size_t target) {
  const DesignMatrix design = build_design(data, fit.expansion);
  const auto& ws = fit.working_set;
  const auto pos = std::find(ws.begin(), ws.end(), target);
  if (pos == ws.end()) throw InputError("target column is not in the final working set");
  Eigen::MatrixXd w(design.columns.rows(), static_cast<Eigen::Index>(ws.size()));
  Eigen::VectorXd b(static_cast<Eigen::Index>(ws.size()));
  for (std::size_t k = 0; k < ws.size(); ++k) {
    w.col(static_cast<Eigen::Index>(k)) = design.columns.col(static_cast<Eigen::Index>(ws[k]));
    b[static_cast<Eigen::Index>(k)] = fit.coefficients[static_cast<Eigen::Index>(ws[k])];
  }
  const Eigen::MatrixXd info = evaluate_cox(w, b, data, CoxOrder::Hessian).information;
  const Eigen::MatrixXd cov = info.ldlt().solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  const auto k = static_cast<Eigen::Index>(pos - ws.begin());
  return std::sqrt(std::max(cov(k, k), 0.0));
}

namespace {

// Profile problem for one fixed coefficient: the target column leaves the
// design and enters through the offset.
class ProfileProblem {
 public:
  ProfileProblem(const SurvivalDataset& data, const FitResult& fit, std::size_t target)
      : data_(data), options_(fit.options) {
    const std::size_t p = fit.expansion.parameter_count();
    if (target >= p) throw InputError("target coefficient index out of range");
    if (fit.expansion.constraint_mask[target])
      throw InputError("likelihood-ratio intervals are only defined for unconstrained columns");
    const DesignMatrix full = build_design(data, fit.expansion);
    target_column_ = full.columns.col(static_cast<Eigen::Index>(target));
    reduced_.columns.resize(full.columns.rows(), static_cast<Eigen::Index>(p - 1));
    for (std::size_t c = 0, r = 0; c < p; ++c) {
      if (c == target) continue;
      reduced_.columns.col(static_cast<Eigen::Index>(r)) =
          full.columns.col(static_cast<Eigen::Index>(c));
      reduced_.labels.push_back(full.labels[c]);
      mask_.push_back(fit.expansion.constraint_mask[c]);
      ++r;
    }
    warm_beta_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p - 1));
    for (std::size_t c : fit.working_set) {
      if (c == target) continue;
      const std::size_t r = c < target ? c : c - 1;
      warm_ws_.push_back(r);
      warm_beta_[static_cast<Eigen::Index>(r)] = fit.coefficients[static_cast<Eigen::Index>(c)];
    }
  }

  double loglik(double value) {
    const Eigen::VectorXd offset = value * target_column_;
    if (reduced_.cols() == 0)
      return evaluate_cox(reduced_.columns, Eigen::VectorXd(0), data_, CoxOrder::Value, &offset)
          .loglik;
    ConstrainedSolution sol = maximize_bound_constrained(reduced_, data_, mask_, warm_ws_,
                                                         warm_beta_, options_, &offset);
    if (!sol.converged) throw ProfileError("profile refit did not converge", value);
    warm_ws_ = sol.working;
    warm_beta_ = sol.beta;
    return sol.loglik;
  }

 private:
  const SurvivalDataset& data_;
  ActiveSetOptions options_;
  DesignMatrix reduced_;
  std::vector<bool> mask_;
  Eigen::VectorXd target_column_;
  WorkingSet warm_ws_;
  Eigen::VectorXd warm_beta_;
};

}  // namespace

double profile_loglik(const SurvivalDataset& data, const FitResult& fit, std::size_t target,
                      double value) {
  ProfileProblem problem(data, fit, target);
  try {
    return problem.loglik(value);
  } catch (const ProfileError&) {
    throw;
  } catch (const std::exception& e) {
    throw ProfileError(std::string("profile refit failed: ") + e.what(), value);
  }
}

LrInterval lr_standard_error(const SurvivalDataset& data, const FitResult& fit,
                             std::size_t target, const ProfileOptions& options) {
  const double estimate = fit.coefficients[static_cast<Eigen::Index>(target)];
  const double wald = wald_standard_error(data, fit, target);

  // Separate warm-start chains per side keep the refits local.
  ProfileProblem below(data, fit, target);
  ProfileProblem above(data, fit, target);
  auto profile = [&](double c) { return c < estimate ? below.loglik(c) : above.loglik(c); };

  LrInterval out = lr_interval_from_profile(profile, estimate, fit.loglik,
                                            options.bracket_multiplier * wald, options);
  out.coefficient = target;
  return out;
}

double linear_predictor(const FitResult& fit, std::span<const double> covariates) {
  return fit.expansion.design_row(covariates).dot(fit.coefficients);
}

double SurvivalCurve::operator()(double t) const {
  return std::exp(-baseline_.cumulative(t) * std::exp(eta_));
}

SurvivalCurve survival_curve(const FitResult& fit, std::span<const double> covariates) {
  return SurvivalCurve(fit.baseline, linear_predictor(fit, covariates));
}

}  // namespace srcox
