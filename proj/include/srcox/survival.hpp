#pragma once

// Right-censored survival data and the Cox partial likelihood (Breslow ties).

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace srcox {

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// exp() overflowed or the likelihood went non-finite.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NewtonStep {
  int iteration = 0;
  double loglik = 0.0;
  double score_norm = 0.0;  // sup norm of the restricted score
  int halvings = 0;
  bool ridge = false;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, std::vector<NewtonStep> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<NewtonStep>& trace() const { return trace_; }

 private:
  std::vector<NewtonStep> trace_;
};

struct Subject {
  double time = 0.0;
  bool event = false;
  std::vector<double> covariates;  // linear block z first, then shaped block x
};

class SurvivalDataset {
 public:
  SurvivalDataset(std::vector<Subject> subjects, std::size_t d_z, std::size_t d_x);

  std::size_t n() const { return subjects_.size(); }
  std::size_t d_z() const { return d_z_; }
  std::size_t d_x() const { return d_x_; }
  std::size_t covariate_count() const { return d_z_ + d_x_; }

  const std::vector<Subject>& subjects() const { return subjects_; }
  const Subject& subject(std::size_t i) const { return subjects_[i]; }

  // Subject indices ordered by descending time; events precede censorings
  // at tied times.
  const std::vector<std::size_t>& sort_index() const { return sort_index_; }

  std::vector<double> covariate(std::size_t k) const;
  Eigen::MatrixXd covariate_matrix() const;
  std::size_t event_count() const;

 private:
  std::vector<Subject> subjects_;
  std::size_t d_z_;
  std::size_t d_x_;
  std::vector<std::size_t> sort_index_;
};

// Where a design column came from.
struct ColumnLabel {
  std::size_t covariate = 0;  // index into the dataset covariate vector
  int knot = -1;              // -1 for a raw linear column, else basis knot j (0-based)

  bool is_linear() const { return knot < 0; }
  bool operator==(const ColumnLabel&) const = default;
};

struct DesignMatrix {
  Eigen::MatrixXd columns;  // n x P
  std::vector<ColumnLabel> labels;

  std::size_t rows() const { return static_cast<std::size_t>(columns.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(columns.cols()); }
};

// Raw covariates as an unexpanded design (the standard Cox model).
DesignMatrix raw_design(const SurvivalDataset& data);

struct BaselineHazard {
  std::vector<double> jump_times;
  std::vector<double> cumulative_values;

  // Cumulative hazard as a right-continuous step function.
  double cumulative(double t) const;
  // Jump sizes (successive differences of the cumulative values).
  std::vector<double> jumps() const;
};

double partial_log_likelihood(const DesignMatrix& design, const Eigen::VectorXd& beta,
                              const SurvivalDataset& data);

Eigen::VectorXd score(const DesignMatrix& design, const Eigen::VectorXd& beta,
                      const SurvivalDataset& data);

// Negative Hessian of the partial log-likelihood.
Eigen::MatrixXd information(const DesignMatrix& design, const Eigen::VectorXd& beta,
                            const SurvivalDataset& data);

// Log-likelihood, score and information of the model restricted to `columns`
// with an optional fixed offset added to every linear predictor. The returned
// score/information are indexed by position in `columns`.
struct CoxEvaluation {
  double loglik = 0.0;
  Eigen::VectorXd score;
  Eigen::MatrixXd information;
};

enum class CoxOrder { Value, Gradient, Hessian };

CoxEvaluation evaluate_cox(const Eigen::MatrixXd& w, const Eigen::VectorXd& beta,
                           const SurvivalDataset& data, CoxOrder order,
                           const Eigen::VectorXd* offset = nullptr);

struct NewtonOptions {
  double tol = 1e-8;  // sup norm of the restricted score
  int max_iter = 100;
  int max_halvings = 30;
};

struct NewtonResult {
  Eigen::VectorXd beta;  // full length P, zero outside the active columns
  double loglik = 0.0;
  int iterations = 0;
  bool ridge_applied = false;
  bool converged = false;
  std::string failure;  // reason when not converged
  std::vector<NewtonStep> trace;
};

// Newton iterations with step halving. Never throws on non-convergence: the
// last accepted iterate is returned with converged = false.
NewtonResult newton_iterate(const DesignMatrix& design, const SurvivalDataset& data,
                            std::span<const std::size_t> active_columns,
                            const Eigen::VectorXd& init, const NewtonOptions& options = {},
                            const Eigen::VectorXd* offset = nullptr);

// Maximizes the partial likelihood over `active_columns`, holding every other
// coefficient at zero. No sign constraints are applied. Throws
// ConvergenceError (with the iteration trace) on non-convergence.
NewtonResult newton_fit(const DesignMatrix& design, const SurvivalDataset& data,
                        std::span<const std::size_t> active_columns, const Eigen::VectorXd& init,
                        const NewtonOptions& options = {},
                        const Eigen::VectorXd* offset = nullptr);

BaselineHazard breslow_baseline(const SurvivalDataset& data, const Eigen::VectorXd& eta);

}  // namespace srcox
