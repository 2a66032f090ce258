#pragma once

// Shape taxonomy, knot selection and the bound-constrained basis expansion of
// shape-restricted covariate effects.

#include "srcox/survival.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace srcox {

enum class ShapeType {
  l = 1,
  in = 2,
  de = 3,
  cvx = 4,
  cvxin = 5,
  cvxde = 6,
  ccv = 7,
  ccvin = 8,
  ccvde = 9,
};

std::string_view shape_label(ShapeType shape);
std::optional<ShapeType> parse_shape(std::string_view label);
// "l, in, de, ..." for error messages.
std::string valid_shape_labels();

// Piecewise-constant (step) expansions.
bool is_step_shape(ShapeType shape);
// Shapes whose first basis weight is unconstrained (cvx and ccv).
bool has_free_first_weight(ShapeType shape);
bool is_convex_shape(ShapeType shape);
bool is_concave_shape(ShapeType shape);
// +1 nondecreasing, -1 nonincreasing, 0 no monotonicity imposed.
int monotone_direction(ShapeType shape);

struct OrderStatistics {};
struct Quantiles {
  int count = 10;  // m: levels 0, 1/m, ..., 1
};
struct CustomKnots {
  std::vector<double> values;
};
using KnotStrategy = std::variant<OrderStatistics, Quantiles, CustomKnots>;

// "order_statistics", "quantiles:<m>" or "custom:[v1,v2,...]".
KnotStrategy parse_knot_strategy(std::string_view text);
std::string format_knot_strategy(const KnotStrategy& strategy);

class DegenerateCovariateError : public InputError {
 public:
  using InputError::InputError;
};

struct KnotSet {
  std::size_t covariate_index = 0;
  std::vector<double> knots;  // strictly ascending
  double observed_min = 0.0;  // range of the covariate the knots were chosen from
  double observed_max = 0.0;
  std::optional<std::string> warning;

  std::size_t size() const { return knots.size(); }
};

KnotSet select_knots(std::span<const double> values, const KnotStrategy& strategy,
                     std::size_t covariate_index = 0);

// g_j(x) for a knot X. Boundary conventions: in -> 1{X <= x}, de -> 1{x < X},
// cvx/cvxin -> (x-X)1{X <= x}, cvxde -> (X-x)1{x <= X},
// ccv/ccvde -> (X-x)1{X <= x}, ccvin -> (x-X)1{x <= X}.
double basis_value(ShapeType shape, double knot, double x);

struct CovariateSpec {
  std::string name;
  ShapeType shape = ShapeType::l;
  KnotStrategy knots = Quantiles{10};
};

// One entry per shaped covariate (the x block of the dataset); the linear
// block z is always unconstrained.
struct ModelSpec {
  std::vector<CovariateSpec> covariates;
};

struct ColumnBlock {
  std::size_t start = 0;
  std::size_t size = 0;
};

struct BasisExpansion {
  std::size_t d_z = 0;
  std::vector<ShapeType> shapes;     // per shaped covariate
  std::vector<KnotSet> knot_sets;    // per shaped covariate; empty knots for shape l
  std::vector<ColumnBlock> blocks;   // design columns owned by each shaped covariate
  std::vector<ColumnLabel> column_map;
  std::vector<bool> constraint_mask;  // true: coefficient bounded below by 0

  std::size_t parameter_count() const { return column_map.size(); }
  std::size_t shaped_count() const { return shapes.size(); }
  // Columns that carry no bound: the z block, shape-l covariates and the
  // first basis column of each cvx/ccv covariate.
  std::vector<std::size_t> unconstrained_columns() const;
  // Expanded design row for a raw covariate vector (z then x).
  Eigen::VectorXd design_row(std::span<const double> covariates) const;
};

// Evaluates an existing expansion on a dataset's covariates.
DesignMatrix build_design(const SurvivalDataset& data, const BasisExpansion& expansion);

// Column layout, labels and mask for given knot sets (knots of shape-l
// covariates are ignored).
BasisExpansion assemble_expansion(std::size_t d_z, std::vector<ShapeType> shapes,
                                  std::vector<KnotSet> knot_sets);

std::pair<DesignMatrix, BasisExpansion> expand_design(const SurvivalDataset& data,
                                                      const ModelSpec& spec);

struct ComponentFunction {
  std::size_t covariate_index = 0;  // index into the dataset covariate vector
  ShapeType shape = ShapeType::l;
  std::vector<double> knots;
  std::vector<double> weights;  // one per knot; a single slope for shape l
  double centering_constant = 0.0;

  double raw(double x) const;
  double centered(double x) const { return raw(x) - centering_constant; }
  // Knots whose weight is strictly positive.
  std::vector<double> used_knots() const;
};

// i indexes the shaped block (0 <= i < d_x).
ComponentFunction reconstruct_component(std::size_t i, const Eigen::VectorXd& beta,
                                        const BasisExpansion& expansion);

// Sets the centering constant to the sample mean of the raw function.
ComponentFunction center_component(ComponentFunction component, std::span<const double> sample);

}  // namespace srcox
