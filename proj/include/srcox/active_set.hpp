#pragma once

// Primal active-set maximization of the bound-constrained partial likelihood.
//
// The working set holds the columns currently allowed to be nonzero. Each
// outer iteration solves the unconstrained Cox subproblem on the working set;
// if the solution leaves the feasible region the iterate is interpolated back
// to the boundary and the blocking column dropped, otherwise the masked column
// with the largest positive score is added. The negative log-likelihood never
// increases along the sequence of feasible iterates.

#include "srcox/shape_basis.hpp"
#include "srcox/survival.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace srcox {

// Sorted, duplicate-free column indices.
using WorkingSet = std::vector<std::size_t>;

enum class TraceAction { Subproblem, Restore, Add, Terminate };

std::string_view trace_action_name(TraceAction action);

struct TraceRecord {
  TraceAction action = TraceAction::Subproblem;
  std::size_t working_set_size = 0;
  double objective = 0.0;  // negative partial log-likelihood
  std::optional<double> step_ratio;
  std::optional<std::size_t> index;  // column added or removed
};

using IterationTrace = std::vector<TraceRecord>;

class ActiveSetError : public std::runtime_error {
 public:
  ActiveSetError(const std::string& what, IterationTrace trace, std::vector<NewtonStep> inner)
      : std::runtime_error(what), trace_(std::move(trace)), inner_(std::move(inner)) {}
  const IterationTrace& trace() const { return trace_; }
  const std::vector<NewtonStep>& inner_trace() const { return inner_; }

 private:
  IterationTrace trace_;
  std::vector<NewtonStep> inner_;
};

struct ActiveSetOptions {
  double kkt_tol = 1e-6;
  NewtonOptions newton;
  int max_outer = 0;  // 0: 10 * P
};

WorkingSet initialize_working_set(const BasisExpansion& expansion);

struct FeasibilityStep {
  double ratio = 1.0;
  std::optional<std::size_t> blocking;
};

// Largest p in [0, 1] keeping (1-p)*current + p*candidate inside the bounds.
FeasibilityStep feasibility_ratio(const Eigen::VectorXd& current, const Eigen::VectorXd& candidate,
                                  const std::vector<bool>& mask);

// Masked column outside the working set with the largest score above tol.
std::optional<std::size_t> select_entering_index(const Eigen::VectorXd& score,
                                                 const WorkingSet& working,
                                                 const std::vector<bool>& mask, double tol);

struct ConstrainedSolution {
  Eigen::VectorXd beta;
  double loglik = 0.0;
  WorkingSet working;
  IterationTrace trace;
  bool converged = false;
  int outer_iterations = 0;
};

// Runs the active-set loop from a feasible start whose nonzero entries lie in
// `start`. An optional offset is added to every linear predictor.
ConstrainedSolution maximize_bound_constrained(const DesignMatrix& design,
                                               const SurvivalDataset& data,
                                               const std::vector<bool>& mask, WorkingSet start,
                                               Eigen::VectorXd start_beta,
                                               const ActiveSetOptions& options = {},
                                               const Eigen::VectorXd* offset = nullptr);

struct FitResult {
  Eigen::VectorXd coefficients;
  double loglik = 0.0;
  WorkingSet working_set;
  BasisExpansion expansion;
  BaselineHazard baseline;
  std::vector<ComponentFunction> components;  // centered, one per shaped covariate
  IterationTrace trace;
  bool converged = false;
  ActiveSetOptions options;
};

FitResult fit(const SurvivalDataset& data, const ModelSpec& spec,
              const ActiveSetOptions& options = {});

// Same as fit() for an already expanded design.
FitResult fit_expanded(const SurvivalDataset& data, const DesignMatrix& design,
                       const BasisExpansion& expansion, const ActiveSetOptions& options = {});

}  // namespace srcox
