#include "srcox/active_set.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

namespace srcox {

std::string_view trace_action_name(TraceAction action) {
  switch (action) {
    case TraceAction::Subproblem:
      return "subproblem";
    case TraceAction::Restore:
      return "restore";
    case TraceAction::Add:
      return "add";
    case TraceAction::Terminate:
      return "terminate";
  }
  return "?";
}

WorkingSet initialize_working_set(const BasisExpansion& expansion) {
  return expansion.unconstrained_columns();
}

FeasibilityStep feasibility_ratio(const Eigen::VectorXd& current, const Eigen::VectorXd& candidate,
                                  const std::vector<bool>& mask) {
  FeasibilityStep step;
  for (std::size_t c = 0; c < mask.size(); ++c) {
    const auto k = static_cast<Eigen::Index>(c);
    if (!mask[c] || !(candidate[k] < 0.0)) continue;
    const double cur = std::max(current[k], 0.0);
    // Crossing point of the segment with the bound beta_c = 0.
    const double p = cur / (cur - candidate[k]);
    if (!step.blocking || p < step.ratio) {
      step.ratio = p;
      step.blocking = c;
    }
  }
  return step;
}

std::optional<std::size_t> select_entering_index(const Eigen::VectorXd& score,
                                                 const WorkingSet& working,
                                                 const std::vector<bool>& mask, double tol) {
  std::optional<std::size_t> best;
  double best_score = tol;
  for (std::size_t c = 0; c < mask.size(); ++c) {
    if (!mask[c] || std::binary_search(working.begin(), working.end(), c)) continue;
    const double d = score[static_cast<Eigen::Index>(c)];
    if (d > best_score) {
      best_score = d;
      best = c;
    }
  }
  return best;
}

namespace {

class Solver {
 public:
  Solver(const DesignMatrix& design, const SurvivalDataset& data, const std::vector<bool>& mask,
         const ActiveSetOptions& options, const Eigen::VectorXd* offset)
      : design_(design), data_(data), mask_(mask), options_(options), offset_(offset) {}

  ConstrainedSolution run(WorkingSet working, Eigen::VectorXd beta) {
    std::sort(working.begin(), working.end());
    working.erase(std::unique(working.begin(), working.end()), working.end());
    ConstrainedSolution sol;
    const auto p = design_.cols();
    const int max_outer = options_.max_outer > 0 ? options_.max_outer : static_cast<int>(10 * p);

    for (int outer = 0;; ++outer) {
      if (outer >= max_outer) {
        sol.converged = false;
        break;
      }
      sol.outer_iterations = outer + 1;

      // Step 2: unconstrained subproblem on the working set.
      Eigen::VectorXd candidate = solve(working, beta, sol.trace);

      // Step 3: pull infeasible candidates back to the boundary.
      for (;;) {
        const FeasibilityStep fs = feasibility_ratio(beta, candidate, mask_);
        if (!fs.blocking) break;
        const std::size_t blocking = *fs.blocking;
        beta = (1.0 - fs.ratio) * beta + fs.ratio * candidate;
        beta[static_cast<Eigen::Index>(blocking)] = 0.0;
        clip_to_bounds(beta);
        working.erase(std::find(working.begin(), working.end(), blocking));
        sol.trace.push_back({TraceAction::Restore, working.size(), -loglik(beta), fs.ratio,
                             blocking});
        candidate = solve(working, beta, sol.trace);
      }
      beta = candidate;
      sol.trace.push_back({TraceAction::Subproblem, working.size(), -loglik(beta), std::nullopt,
                           std::nullopt});

      // Step 4: KKT check and working-set growth.
      const Eigen::VectorXd d = full_score(beta);
      const auto entering = select_entering_index(d, working, mask_, options_.kkt_tol);
      if (!entering) {
        sol.converged = true;
        sol.trace.push_back({TraceAction::Terminate, working.size(), sol.trace.back().objective,
                             std::nullopt, std::nullopt});
        break;
      }
      working.insert(std::upper_bound(working.begin(), working.end(), *entering), *entering);
      sol.trace.push_back({TraceAction::Add, working.size(), sol.trace.back().objective,
                           std::nullopt, *entering});
    }
    sol.beta = std::move(beta);
    sol.loglik = loglik(sol.beta);
    sol.working = std::move(working);
    return sol;
  }

 private:
  Eigen::VectorXd solve(const WorkingSet& working, const Eigen::VectorXd& beta,
                        const IterationTrace& trace) {
    if (working.empty()) return Eigen::VectorXd::Zero(beta.size());
    NewtonResult r = newton_iterate(design_, data_, working, beta, options_.newton, offset_);
    if (r.converged) return std::move(r.beta);
    // A diverging subproblem is harmless when its iterate is already
    // infeasible: restoration only needs an ascent point.
    for (std::size_t c : working)
      if (mask_[c] && r.beta[static_cast<Eigen::Index>(c)] < 0.0) return std::move(r.beta);
    std::ostringstream msg;
    msg << "active-set subproblem on " << working.size() << " columns failed: " << r.failure;
    throw ActiveSetError(msg.str(), trace, std::move(r.trace));
  }

  void clip_to_bounds(Eigen::VectorXd& beta) const {
    for (std::size_t c = 0; c < mask_.size(); ++c) {
      const auto k = static_cast<Eigen::Index>(c);
      if (mask_[c] && beta[k] < 0.0) beta[k] = 0.0;
    }
  }

  double loglik(const Eigen::VectorXd& beta) const {
    return evaluate_cox(design_.columns, beta, data_, CoxOrder::Value, offset_).loglik;
  }

  Eigen::VectorXd full_score(const Eigen::VectorXd& beta) const {
    return evaluate_cox(design_.columns, beta, data_, CoxOrder::Gradient, offset_).score;
  }

  const DesignMatrix& design_;
  const SurvivalDataset& data_;
  const std::vector<bool>& mask_;
  const ActiveSetOptions& options_;
  const Eigen::VectorXd* offset_;
};

}  // namespace

ConstrainedSolution maximize_bound_constrained(const DesignMatrix& design,
                                               const SurvivalDataset& data,
                                               const std::vector<bool>& mask, WorkingSet start,
                                               Eigen::VectorXd start_beta,
                                               const ActiveSetOptions& options,
                                               const Eigen::VectorXd* offset) {
  if (mask.size() != design.cols()) throw InputError("constraint mask length does not match design");
  if (static_cast<std::size_t>(start_beta.size()) != design.cols())
    throw InputError("starting coefficients do not match design");
  for (std::size_t c = 0; c < mask.size(); ++c) {
    const double b = start_beta[static_cast<Eigen::Index>(c)];
    if (mask[c] && b < 0.0) throw InputError("starting coefficients are infeasible");
    if (b != 0.0 && std::find(start.begin(), start.end(), c) == start.end())
      throw InputError("starting coefficients are nonzero outside the working set");
  }
  Solver solver(design, data, mask, options, offset);
  return solver.run(std::move(start), std::move(start_beta));
}

FitResult fit_expanded(const SurvivalDataset& data, const DesignMatrix& design,
                       const BasisExpansion& expansion, const ActiveSetOptions& options) {
  const WorkingSet start = initialize_working_set(expansion);
  ConstrainedSolution sol =
      maximize_bound_constrained(design, data, expansion.constraint_mask, start,
                                 Eigen::VectorXd::Zero(static_cast<Eigen::Index>(design.cols())),
                                 options);
  FitResult out;
  out.coefficients = std::move(sol.beta);
  out.loglik = sol.loglik;
  out.working_set = std::move(sol.working);
  out.expansion = expansion;
  out.trace = std::move(sol.trace);
  out.converged = sol.converged;
  out.options = options;
  const Eigen::VectorXd eta = design.columns * out.coefficients;
  out.baseline = breslow_baseline(data, eta);
  for (std::size_t i = 0; i < expansion.shaped_count(); ++i) {
    const std::vector<double> sample = data.covariate(expansion.d_z + i);
    out.components.push_back(
        center_component(reconstruct_component(i, out.coefficients, expansion), sample));
  }
  return out;
}

FitResult fit(const SurvivalDataset& data, const ModelSpec& spec, const ActiveSetOptions& options) {
  const auto [design, expansion] = expand_design(data, spec);
  return fit_expanded(data, design, expansion, options);
}

}  // namespace srcox
