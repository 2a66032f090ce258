#include "srcox/survival.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace srcox {

SurvivalDataset::SurvivalDataset(std::vector<Subject> subjects, std::size_t d_z, std::size_t d_x)
    : subjects_(std::move(subjects)), d_z_(d_z), d_x_(d_x) {
  if (subjects_.empty()) throw InputError("survival dataset has no subjects");
  const std::size_t width = d_z_ + d_x_;
  bool any_event = false;
  for (std::size_t i = 0; i < subjects_.size(); ++i) {
    const Subject& s = subjects_[i];
    if (!(s.time > 0.0) || !std::isfinite(s.time)) {
      std::ostringstream msg;
      msg << "subject " << i << ": time must be positive and finite (got " << s.time << ")";
      throw InputError(msg.str());
    }
    if (s.covariates.size() != width) {
      std::ostringstream msg;
      msg << "subject " << i << ": expected " << width << " covariates, got "
          << s.covariates.size();
      throw InputError(msg.str());
    }
    for (double v : s.covariates) {
      if (!std::isfinite(v)) {
        std::ostringstream msg;
        msg << "subject " << i << ": non-finite covariate value";
        throw InputError(msg.str());
      }
    }
    any_event = any_event || s.event;
  }
  if (!any_event) throw InputError("survival dataset has no observed events");

  sort_index_.resize(subjects_.size());
  std::iota(sort_index_.begin(), sort_index_.end(), std::size_t{0});
  std::stable_sort(sort_index_.begin(), sort_index_.end(), [this](std::size_t a, std::size_t b) {
    const Subject& sa = subjects_[a];
    const Subject& sb = subjects_[b];
    if (sa.time != sb.time) return sa.time > sb.time;
    return sa.event && !sb.event;
  });
}

std::vector<double> SurvivalDataset::covariate(std::size_t k) const {
  std::vector<double> out;
  out.reserve(subjects_.size());
  for (const Subject& s : subjects_) out.push_back(s.covariates.at(k));
  return out;
}

Eigen::MatrixXd SurvivalDataset::covariate_matrix() const {
  Eigen::MatrixXd m(n(), covariate_count());
  for (std::size_t i = 0; i < n(); ++i)
    for (std::size_t k = 0; k < covariate_count(); ++k) m(i, k) = subjects_[i].covariates[k];
  return m;
}

std::size_t SurvivalDataset::event_count() const {
  return static_cast<std::size_t>(
      std::count_if(subjects_.begin(), subjects_.end(), [](const Subject& s) { return s.event; }));
}

DesignMatrix raw_design(const SurvivalDataset& data) {
  DesignMatrix d;
  d.columns = data.covariate_matrix();
  for (std::size_t k = 0; k < data.covariate_count(); ++k) d.labels.push_back({k, -1});
  return d;
}

double BaselineHazard::cumulative(double t) const {
  auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  if (it == jump_times.begin()) return 0.0;
  return cumulative_values[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

std::vector<double> BaselineHazard::jumps() const {
  std::vector<double> out(cumulative_values.size());
  std::adjacent_difference(cumulative_values.begin(), cumulative_values.end(), out.begin());
  return out;
}

namespace {

// Risk-set sums kept relative to a running maximum of the linear predictor so
// that exp() neither overflows nor underflows to an empty risk set.
struct RiskSums {
  double shift = -std::numeric_limits<double>::infinity();
  double s0 = 0.0;
  Eigen::VectorXd s1;
  Eigen::MatrixXd s2;

  void rescale_to(double eta) {
    if (eta <= shift) return;
    if (std::isfinite(shift)) {
      const double f = std::exp(shift - eta);
      s0 *= f;
      if (s1.size() > 0) s1 *= f;
      if (s2.size() > 0) s2 *= f;
    }
    shift = eta;
  }
};

}  // namespace

CoxEvaluation evaluate_cox(const Eigen::MatrixXd& w, const Eigen::VectorXd& beta,
                           const SurvivalDataset& data, CoxOrder order,
                           const Eigen::VectorXd* offset) {
  const auto n = static_cast<Eigen::Index>(data.n());
  const Eigen::Index p = w.cols();
  if (w.rows() != n) throw InputError("design row count does not match the dataset");
  if (beta.size() != p) throw InputError("coefficient length does not match design columns");

  Eigen::VectorXd eta = p > 0 ? Eigen::VectorXd(w * beta) : Eigen::VectorXd::Zero(n);
  if (offset != nullptr) eta += *offset;
  for (Eigen::Index i = 0; i < n; ++i)
    if (!std::isfinite(eta[i])) throw NumericalError("non-finite linear predictor");

  const bool want_grad = order != CoxOrder::Value;
  const bool want_hess = order == CoxOrder::Hessian;

  RiskSums rs;
  if (want_grad) rs.s1 = Eigen::VectorXd::Zero(p);
  if (want_hess) rs.s2 = Eigen::MatrixXd::Zero(p, p);

  CoxEvaluation out;
  if (want_grad) out.score = Eigen::VectorXd::Zero(p);
  if (want_hess) out.information = Eigen::MatrixXd::Zero(p, p);

  Eigen::VectorXd event_x_sum = Eigen::VectorXd::Zero(want_grad ? p : 0);
  const auto& idx = data.sort_index();
  std::size_t pos = 0;
  while (pos < idx.size()) {
    const double t = data.subject(idx[pos]).time;
    std::size_t end = pos;
    double events = 0.0;
    double event_eta = 0.0;
    if (want_grad) event_x_sum.setZero();
    for (; end < idx.size() && data.subject(idx[end]).time == t; ++end) {
      const auto i = static_cast<Eigen::Index>(idx[end]);
      rs.rescale_to(eta[i]);
      const double r = std::exp(eta[i] - rs.shift);
      rs.s0 += r;
      if (want_grad) rs.s1.noalias() += r * w.row(i).transpose();
      if (want_hess) rs.s2.selfadjointView<Eigen::Lower>().rankUpdate(w.row(i).transpose(), r);
      if (data.subject(idx[end]).event) {
        events += 1.0;
        event_eta += eta[i];
        if (want_grad) event_x_sum.noalias() += w.row(i).transpose();
      }
    }
    if (events > 0.0) {
      out.loglik += event_eta - events * (rs.shift + std::log(rs.s0));
      if (want_grad) {
        const Eigen::VectorXd mean = rs.s1 / rs.s0;
        out.score.noalias() += event_x_sum - events * mean;
        if (want_hess) {
          out.information.noalias() += events * (rs.s2 / rs.s0 - mean * mean.transpose());
        }
      }
    }
    pos = end;
  }
  if (want_hess) {
    // Only the lower triangle of s2 was accumulated.
    out.information = out.information.selfadjointView<Eigen::Lower>();
  }
  if (!std::isfinite(out.loglik)) throw NumericalError("partial log-likelihood is not finite");
  return out;
}

double partial_log_likelihood(const DesignMatrix& design, const Eigen::VectorXd& beta,
                              const SurvivalDataset& data) {
  return evaluate_cox(design.columns, beta, data, CoxOrder::Value).loglik;
}

Eigen::VectorXd score(const DesignMatrix& design, const Eigen::VectorXd& beta,
                      const SurvivalDataset& data) {
  return evaluate_cox(design.columns, beta, data, CoxOrder::Gradient).score;
}

Eigen::MatrixXd information(const DesignMatrix& design, const Eigen::VectorXd& beta,
                            const SurvivalDataset& data) {
  return evaluate_cox(design.columns, beta, data, CoxOrder::Hessian).information;
}

namespace {

double sup_norm(const Eigen::VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

// Solves info * step = score, falling back to a small ridge when the matrix is
// numerically singular.
Eigen::VectorXd newton_direction(const Eigen::MatrixXd& info, const Eigen::VectorXd& g,
                                 bool& ridge) {
  const Eigen::Index p = info.rows();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  bool singular = ldlt.info() != Eigen::Success || !ldlt.isPositive();
  if (!singular) {
    const Eigen::VectorXd d = ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    singular = !(d.minCoeff() > 1e-12 * dmax);
  }
  if (!singular) {
    ridge = false;
    return ldlt.solve(g);
  }
  ridge = true;
  double eps = 1e-8 * info.trace() / static_cast<double>(p);
  if (!(eps > 0.0)) eps = 1e-8;
  Eigen::MatrixXd regularized = info;
  regularized.diagonal().array() += eps;
  Eigen::LDLT<Eigen::MatrixXd> ridge_ldlt(regularized);
  return ridge_ldlt.solve(g);
}

}  // namespace

NewtonResult newton_iterate(const DesignMatrix& design, const SurvivalDataset& data,
                            std::span<const std::size_t> active_columns,
                            const Eigen::VectorXd& init, const NewtonOptions& options,
                            const Eigen::VectorXd* offset) {
  if (active_columns.empty()) throw InputError("newton_fit requires at least one active column");
  const auto total = static_cast<Eigen::Index>(design.cols());
  if (init.size() != total) throw InputError("initial coefficient length does not match design");

  const auto p = static_cast<Eigen::Index>(active_columns.size());
  Eigen::MatrixXd w(design.columns.rows(), p);
  Eigen::VectorXd b(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const auto c = static_cast<Eigen::Index>(active_columns[static_cast<std::size_t>(k)]);
    if (c >= total) throw InputError("active column index out of range");
    w.col(k) = design.columns.col(c);
    b[k] = init[c];
  }

  NewtonResult result;
  CoxEvaluation ev = evaluate_cox(w, b, data, CoxOrder::Hessian, offset);
  bool converged = false;
  for (int iter = 0; iter <= options.max_iter; ++iter) {
    NewtonStep step{iter, ev.loglik, sup_norm(ev.score), 0, false};
    if (step.score_norm <= options.tol) {
      result.trace.push_back(step);
      converged = true;
      break;
    }
    if (iter == options.max_iter) {
      result.trace.push_back(step);
      break;
    }
    bool ridge = false;
    const Eigen::VectorXd direction = newton_direction(ev.information, ev.score, ridge);
    step.ridge = ridge;
    result.ridge_applied = result.ridge_applied || ridge;

    // Close to the optimum the gain of a Newton step drops below the rounding
    // noise of the summed log-likelihood; there a smaller score decides.
    const double noise = 1e-12 * std::max(1.0, std::abs(ev.loglik));
    double scale = 1.0;
    bool accepted = false;
    CoxEvaluation next;
    for (int h = 0; h <= options.max_halvings; ++h) {
      const Eigen::VectorXd trial = b + scale * direction;
      try {
        next = evaluate_cox(w, trial, data, CoxOrder::Hessian, offset);
        if (next.loglik > ev.loglik ||
            (next.loglik >= ev.loglik - noise && sup_norm(next.score) < step.score_norm)) {
          b = trial;
          accepted = true;
          step.halvings = h;
          break;
        }
      } catch (const NumericalError&) {
        // overflow: shrink the step
      }
      scale *= 0.5;
    }
    result.trace.push_back(step);
    if (!accepted) {
      // No ascent is possible along the Newton direction: the iterate sits at
      // the optimum up to floating-point resolution of the log-likelihood.
      const double resolution = 1e-6 * std::max(1.0, std::abs(ev.loglik));
      if (step.score_norm <= resolution) {
        converged = true;
        break;
      }
      result.failure = "Newton step-halving failed to increase the partial likelihood";
      break;
    }
    // A singular information matrix with a vanishing gain means the supremum
    // lies at infinity along a flat direction (monotone likelihood).
    const bool flat = ridge && next.loglik - ev.loglik <= 1e-10 * std::max(1.0, std::abs(ev.loglik));
    ev = std::move(next);
    if (flat) {
      result.trace.push_back({iter + 1, ev.loglik, sup_norm(ev.score), 0, true});
      converged = true;
      break;
    }
  }
  if (!converged && result.failure.empty())
    result.failure = "Newton solver did not converge within the iteration limit";
  result.converged = converged;

  result.beta = Eigen::VectorXd::Zero(total);
  for (Eigen::Index k = 0; k < p; ++k)
    result.beta[static_cast<Eigen::Index>(active_columns[static_cast<std::size_t>(k)])] = b[k];
  result.loglik = ev.loglik;
  result.iterations = static_cast<int>(result.trace.size()) - 1;
  return result;
}

NewtonResult newton_fit(const DesignMatrix& design, const SurvivalDataset& data,
                        std::span<const std::size_t> active_columns, const Eigen::VectorXd& init,
                        const NewtonOptions& options, const Eigen::VectorXd* offset) {
  NewtonResult r = newton_iterate(design, data, active_columns, init, options, offset);
  if (!r.converged) throw ConvergenceError(r.failure, std::move(r.trace));
  return r;
}

BaselineHazard breslow_baseline(const SurvivalDataset& data, const Eigen::VectorXd& eta) {
  if (static_cast<std::size_t>(eta.size()) != data.n())
    throw InputError("linear predictor length does not match the dataset");

  // Walk times in descending order, recording (time, jump) at event times.
  std::vector<std::pair<double, double>> jumps;
  const auto& idx = data.sort_index();
  RiskSums rs;
  std::size_t pos = 0;
  while (pos < idx.size()) {
    const double t = data.subject(idx[pos]).time;
    double events = 0.0;
    std::size_t end = pos;
    for (; end < idx.size() && data.subject(idx[end]).time == t; ++end) {
      const double e = eta[static_cast<Eigen::Index>(idx[end])];
      if (!std::isfinite(e)) throw NumericalError("non-finite linear predictor");
      rs.rescale_to(e);
      rs.s0 += std::exp(e - rs.shift);
      if (data.subject(idx[end]).event) events += 1.0;
    }
    if (events > 0.0) jumps.emplace_back(t, events * std::exp(-rs.shift) / rs.s0);
    pos = end;
  }

  BaselineHazard h;
  double cum = 0.0;
  for (auto it = jumps.rbegin(); it != jumps.rend(); ++it) {
    cum += it->second;
    h.jump_times.push_back(it->first);
    h.cumulative_values.push_back(cum);
  }
  return h;
}

}  // namespace srcox
