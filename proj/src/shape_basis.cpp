#include "srcox/shape_basis.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numeric>
#include <sstream>

namespace srcox {

namespace {

constexpr std::array<std::pair<ShapeType, std::string_view>, 9> kShapeLabels{{
    {ShapeType::l, "l"},
    {ShapeType::in, "in"},
    {ShapeType::de, "de"},
    {ShapeType::cvx, "cvx"},
    {ShapeType::cvxin, "cvxin"},
    {ShapeType::cvxde, "cvxde"},
    {ShapeType::ccv, "ccv"},
    {ShapeType::ccvin, "ccvin"},
    {ShapeType::ccvde, "ccvde"},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

double parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw InputError("invalid number '" + std::string(s) + "' in knot strategy");
  return v;
}

}  // namespace

std::string_view shape_label(ShapeType shape) {
  for (const auto& [s, label] : kShapeLabels)
    if (s == shape) return label;
  return "?";
}

std::optional<ShapeType> parse_shape(std::string_view label) {
  for (const auto& [s, name] : kShapeLabels)
    if (name == label) return s;
  return std::nullopt;
}

std::string valid_shape_labels() {
  std::string out;
  for (const auto& [s, label] : kShapeLabels) {
    if (!out.empty()) out += ", ";
    out += label;
  }
  return out;
}

bool is_step_shape(ShapeType shape) { return shape == ShapeType::in || shape == ShapeType::de; }

bool has_free_first_weight(ShapeType shape) {
  return shape == ShapeType::cvx || shape == ShapeType::ccv;
}

bool is_convex_shape(ShapeType shape) {
  return shape == ShapeType::cvx || shape == ShapeType::cvxin || shape == ShapeType::cvxde;
}

bool is_concave_shape(ShapeType shape) {
  return shape == ShapeType::ccv || shape == ShapeType::ccvin || shape == ShapeType::ccvde;
}

int monotone_direction(ShapeType shape) {
  switch (shape) {
    case ShapeType::in:
    case ShapeType::cvxin:
    case ShapeType::ccvin:
      return 1;
    case ShapeType::de:
    case ShapeType::cvxde:
    case ShapeType::ccvde:
      return -1;
    default:
      return 0;
  }
}

KnotStrategy parse_knot_strategy(std::string_view text) {
  text = trim(text);
  if (text == "order_statistics") return OrderStatistics{};
  if (text.starts_with("quantiles:")) {
    const std::string_view rest = trim(text.substr(10));
    int m = 0;
    auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), m);
    if (ec != std::errc{} || ptr != rest.data() + rest.size() || m < 2)
      throw InputError("quantile knot count must be an integer >= 2 (got '" + std::string(rest) +
                       "')");
    return Quantiles{m};
  }
  if (text.starts_with("custom:")) {
    std::string_view rest = trim(text.substr(7));
    if (rest.size() < 2 || rest.front() != '[' || rest.back() != ']')
      throw InputError("custom knots must be written as custom:[v1,v2,...]");
    rest = rest.substr(1, rest.size() - 2);
    CustomKnots custom;
    while (!trim(rest).empty()) {
      const auto comma = rest.find(',');
      custom.values.push_back(parse_double(rest.substr(0, comma)));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    return custom;
  }
  throw InputError("unknown knot strategy '" + std::string(text) +
                   "' (expected order_statistics, quantiles:<m> or custom:[...])");
}

std::string format_knot_strategy(const KnotStrategy& strategy) {
  struct Formatter {
    std::string operator()(const OrderStatistics&) const { return "order_statistics"; }
    std::string operator()(const Quantiles& q) const {
      return "quantiles:" + std::to_string(q.count);
    }
    std::string operator()(const CustomKnots& c) const {
      std::ostringstream os;
      os.precision(17);
      os << "custom:[";
      for (std::size_t i = 0; i < c.values.size(); ++i) os << (i ? "," : "") << c.values[i];
      os << "]";
      return os.str();
    }
  };
  return std::visit(Formatter{}, strategy);
}

KnotSet select_knots(std::span<const double> values, const KnotStrategy& strategy,
                     std::size_t covariate_index) {
  if (values.empty()) throw InputError("knot selection requires at least one value");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  if (sorted.front() == sorted.back()) {
    std::ostringstream msg;
    msg << "covariate " << covariate_index << " has fewer than 2 distinct values";
    throw DegenerateCovariateError(msg.str());
  }

  KnotSet ks;
  ks.covariate_index = covariate_index;
  ks.observed_min = sorted.front();
  ks.observed_max = sorted.back();
  if (std::holds_alternative<OrderStatistics>(strategy)) {
    ks.knots = sorted;
  } else if (const auto* q = std::get_if<Quantiles>(&strategy)) {
    if (q->count < 2) throw InputError("quantile knot count must be >= 2");
    // Lower empirical quantile: order statistic ceil(p n) for p > 0, the
    // minimum for p = 0.
    const std::size_t n = sorted.size();
    const auto m = static_cast<std::size_t>(q->count);
    ks.knots.push_back(sorted.front());
    for (std::size_t k = 1; k <= m; ++k) {
      const std::size_t rank = (k * n + m - 1) / m;  // ceil(k n / m), exact
      ks.knots.push_back(sorted[rank - 1]);
    }
  } else {
    const auto& custom = std::get<CustomKnots>(strategy);
    if (custom.values.empty()) throw InputError("custom knot list is empty");
    for (std::size_t i = 1; i < custom.values.size(); ++i)
      if (!(custom.values[i] > custom.values[i - 1]))
        throw InputError("custom knots must be strictly ascending");
    ks.knots = custom.values;
    if (custom.values.front() < sorted.front() || custom.values.back() > sorted.back()) {
      std::ostringstream msg;
      msg << "covariate " << covariate_index << ": custom knots extend outside the observed range ["
          << sorted.front() << ", " << sorted.back() << "]";
      ks.warning = msg.str();
    }
  }
  ks.knots.erase(std::unique(ks.knots.begin(), ks.knots.end()), ks.knots.end());
  return ks;
}

double basis_value(ShapeType shape, double knot, double x) {
  switch (shape) {
    case ShapeType::in:
      return knot <= x ? 1.0 : 0.0;
    case ShapeType::de:
      return x < knot ? 1.0 : 0.0;
    case ShapeType::cvx:
    case ShapeType::cvxin:
      return knot <= x ? x - knot : 0.0;
    case ShapeType::cvxde:
      return x <= knot ? knot - x : 0.0;
    case ShapeType::ccv:
    case ShapeType::ccvde:
      return knot <= x ? knot - x : 0.0;
    case ShapeType::ccvin:
      return x <= knot ? x - knot : 0.0;
    case ShapeType::l:
      break;
  }
  throw InputError("basis_value is undefined for the linear shape");
}

std::vector<std::size_t> BasisExpansion::unconstrained_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < constraint_mask.size(); ++c)
    if (!constraint_mask[c]) out.push_back(c);
  return out;
}

Eigen::VectorXd BasisExpansion::design_row(std::span<const double> covariates) const {
  if (covariates.size() != d_z + shapes.size())
    throw InputError("covariate vector length does not match the model");
  Eigen::VectorXd row(static_cast<Eigen::Index>(parameter_count()));
  for (std::size_t c = 0; c < column_map.size(); ++c) {
    const ColumnLabel& label = column_map[c];
    const double x = covariates[label.covariate];
    if (label.is_linear()) {
      row[static_cast<Eigen::Index>(c)] = x;
    } else {
      const std::size_t i = label.covariate - d_z;
      row[static_cast<Eigen::Index>(c)] =
          basis_value(shapes[i], knot_sets[i].knots[static_cast<std::size_t>(label.knot)], x);
    }
  }
  return row;
}

DesignMatrix build_design(const SurvivalDataset& data, const BasisExpansion& expansion) {
  DesignMatrix design;
  design.labels = expansion.column_map;
  design.columns.resize(static_cast<Eigen::Index>(data.n()),
                        static_cast<Eigen::Index>(expansion.parameter_count()));
  for (std::size_t r = 0; r < data.n(); ++r)
    design.columns.row(static_cast<Eigen::Index>(r)) =
        expansion.design_row(data.subject(r).covariates).transpose();
  return design;
}

BasisExpansion assemble_expansion(std::size_t d_z, std::vector<ShapeType> shapes,
                                  std::vector<KnotSet> knot_sets) {
  if (shapes.size() != knot_sets.size())
    throw InputError("one knot set is required per shaped covariate");
  BasisExpansion ex;
  ex.d_z = d_z;
  ex.shapes = std::move(shapes);
  ex.knot_sets = std::move(knot_sets);
  ex.blocks.resize(ex.shapes.size());
  for (std::size_t k = 0; k < d_z; ++k) {
    ex.column_map.push_back({k, -1});
    ex.constraint_mask.push_back(false);
  }
  // Shape-l covariates join the linear block; shaped ones follow in
  // covariate-major, knot-minor order.
  for (std::size_t i = 0; i < ex.shapes.size(); ++i) {
    ex.knot_sets[i].covariate_index = d_z + i;
    if (ex.shapes[i] != ShapeType::l) continue;
    ex.knot_sets[i].knots.clear();
    ex.blocks[i] = {ex.column_map.size(), 1};
    ex.column_map.push_back({d_z + i, -1});
    ex.constraint_mask.push_back(false);
  }
  for (std::size_t i = 0; i < ex.shapes.size(); ++i) {
    const ShapeType shape = ex.shapes[i];
    if (shape == ShapeType::l) continue;
    const std::size_t k_i = ex.knot_sets[i].size();
    if (k_i == 0) throw InputError("a shaped covariate needs at least one knot");
    ex.blocks[i] = {ex.column_map.size(), k_i};
    for (std::size_t j = 0; j < k_i; ++j) {
      ex.column_map.push_back({d_z + i, static_cast<int>(j)});
      ex.constraint_mask.push_back(!(j == 0 && has_free_first_weight(shape)));
    }
  }
  return ex;
}

std::pair<DesignMatrix, BasisExpansion> expand_design(const SurvivalDataset& data,
                                                      const ModelSpec& spec) {
  if (spec.covariates.size() != data.d_x()) {
    std::ostringstream msg;
    msg << "model declares " << spec.covariates.size() << " shaped covariates but the dataset has "
        << data.d_x();
    throw InputError(msg.str());
  }
  const std::size_t d_z = data.d_z();
  std::vector<ShapeType> shapes;
  std::vector<KnotSet> knot_sets;
  for (std::size_t i = 0; i < data.d_x(); ++i) {
    const ShapeType shape = spec.covariates[i].shape;
    const std::vector<double> values = data.covariate(d_z + i);
    shapes.push_back(shape);
    if (shape == ShapeType::l) {
      KnotSet ks;
      const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
      ks.observed_min = *lo;
      ks.observed_max = *hi;
      knot_sets.push_back(std::move(ks));
    } else {
      knot_sets.push_back(select_knots(values, spec.covariates[i].knots, d_z + i));
    }
  }
  BasisExpansion ex = assemble_expansion(d_z, std::move(shapes), std::move(knot_sets));
  DesignMatrix design = build_design(data, ex);
  return {std::move(design), std::move(ex)};
}

double ComponentFunction::raw(double x) const {
  if (shape == ShapeType::l) return weights.empty() ? 0.0 : weights.front() * x;
  double sum = 0.0;
  for (std::size_t j = 0; j < knots.size(); ++j)
    if (weights[j] != 0.0) sum += weights[j] * basis_value(shape, knots[j], x);
  return sum;
}

std::vector<double> ComponentFunction::used_knots() const {
  std::vector<double> out;
  for (std::size_t j = 0; j < knots.size(); ++j)
    if (weights[j] > 0.0) out.push_back(knots[j]);
  return out;
}

ComponentFunction reconstruct_component(std::size_t i, const Eigen::VectorXd& beta,
                                        const BasisExpansion& expansion) {
  if (i >= expansion.shaped_count()) throw InputError("component index out of range");
  if (static_cast<std::size_t>(beta.size()) != expansion.parameter_count())
    throw InputError("coefficient length does not match the expansion");
  ComponentFunction f;
  f.covariate_index = expansion.d_z + i;
  f.shape = expansion.shapes[i];
  f.knots = expansion.knot_sets[i].knots;
  const ColumnBlock block = expansion.blocks[i];
  for (std::size_t c = block.start; c < block.start + block.size; ++c)
    f.weights.push_back(beta[static_cast<Eigen::Index>(c)]);
  return f;
}

ComponentFunction center_component(ComponentFunction component, std::span<const double> sample) {
  component.centering_constant = 0.0;
  if (sample.empty()) return component;
  double sum = 0.0;
  for (double x : sample) sum += component.raw(x);
  component.centering_constant = sum / static_cast<double>(sample.size());
  return component;
}

}  // namespace srcox
