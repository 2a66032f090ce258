#include "srcox/sim_lab.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <sstream>
#include <thread>

namespace srcox {

double evaluate_r(RFunction r, double x) {
  switch (r) {
    case RFunction::NegThreeLog:
      return -3.0 * std::log(x);
    case RFunction::NegSquare:
      return -x * x;
    case RFunction::NegAbs:
      return -std::abs(x);
    case RFunction::NegTwoX:
      return -2.0 * x;
  }
  return 0.0;
}

std::string_view r_function_name(RFunction r) {
  switch (r) {
    case RFunction::NegThreeLog:
      return "-3log(x)";
    case RFunction::NegSquare:
      return "-x^2";
    case RFunction::NegAbs:
      return "-|x|";
    case RFunction::NegTwoX:
      return "-2x";
  }
  return "?";
}

std::string_view x_distribution_name(XDistribution d) {
  return d == XDistribution::Exponential ? "Exp(1)" : "Norm(0,1)";
}

ExperimentConfig experiment_config(int id, std::size_t n, std::size_t replications,
                                   std::uint64_t seed) {
  ExperimentConfig c;
  c.id = id;
  c.n = n;
  c.replications = replications;
  c.seed = seed;
  switch (id) {
    case 1:
      c.x_distribution = XDistribution::Exponential;
      c.r_function = RFunction::NegThreeLog;
      c.shape = ShapeType::cvxde;
      break;
    case 2:
      c.x_distribution = XDistribution::Exponential;
      c.r_function = RFunction::NegThreeLog;
      c.shape = ShapeType::de;
      break;
    case 3:
      c.x_distribution = XDistribution::StandardNormal;
      c.r_function = RFunction::NegSquare;
      c.shape = ShapeType::ccv;
      break;
    case 4:
      c.x_distribution = XDistribution::StandardNormal;
      c.r_function = RFunction::NegSquare;
      c.shape = ShapeType::cvx;
      break;
    case 5:
      c.x_distribution = XDistribution::StandardNormal;
      c.r_function = RFunction::NegAbs;
      c.shape = ShapeType::ccv;
      break;
    case 6:
      c.x_distribution = XDistribution::StandardNormal;
      c.r_function = RFunction::NegTwoX;
      c.shape = ShapeType::ccv;
      break;
    case 7:
      c.x_distribution = XDistribution::StandardNormal;
      c.r_function = RFunction::NegTwoX;
      c.shape = ShapeType::de;
      break;
    default: {
      std::ostringstream msg;
      msg << "experiment id must be between 1 and 7 (got " << id << ")";
      throw InputError(msg.str());
    }
  }
  return c;
}

double weibull_failure_time(double u, double eta) {
  return std::sqrt(-std::log(u)) * std::exp(-0.5 * eta);
}

SurvivalDataset generate_dataset(const ExperimentConfig& config, std::uint64_t replication) {
  std::seed_seq seq{static_cast<std::uint32_t>(config.seed),
                    static_cast<std::uint32_t>(config.seed >> 32),
                    static_cast<std::uint32_t>(replication),
                    static_cast<std::uint32_t>(replication >> 32)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::exponential_distribution<double> exponential(1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto positive_uniform = [&] {
    double u = 0.0;
    while (!(u > 0.0)) u = unit(rng);
    return u;
  };

  std::vector<Subject> subjects;
  subjects.reserve(config.n);
  for (std::size_t i = 0; i < config.n; ++i) {
    const double z = normal(rng);
    double x = 0.0;
    if (config.x_distribution == XDistribution::Exponential) {
      while (!(x > 0.0)) x = exponential(rng);
    } else {
      x = normal(rng);
    }
    const double eta = 2.0 * z * config.beta_z + 2.0 * evaluate_r(config.r_function, x);
    const double failure = weibull_failure_time(positive_uniform(), eta);
    const double censor = config.censor_max * positive_uniform();
    Subject s;
    s.time = std::min(failure, censor);
    s.event = failure <= censor;
    s.covariates = {z, x};
    subjects.push_back(std::move(s));
  }
  return SurvivalDataset(std::move(subjects), 1, 1);
}

ReplicationOutcome run_replication(const ExperimentConfig& config, std::uint64_t replication) {
  ReplicationOutcome out;
  try {
    const SurvivalDataset data = generate_dataset(config, replication);
    out.censoring_fraction =
        1.0 - static_cast<double>(data.event_count()) / static_cast<double>(data.n());

    try {
      ModelSpec spec;
      spec.covariates.push_back({"x", config.shape, config.knots});
      const FitResult f = fit(data, spec, config.solver);
      out.sr_ok = f.converged;
      out.sr_coefficient = f.coefficients[0];
      if (!f.converged) out.error = "SR-Cox: active-set iteration limit reached";
    } catch (const std::exception& e) {
      out.error = std::string("SR-Cox: ") + e.what();
    }

    try {
      const DesignMatrix raw = raw_design(data);
      const std::vector<std::size_t> all{0, 1};
      const NewtonResult r = newton_fit(raw, data, all,
                                        Eigen::VectorXd::Zero(2), config.solver.newton);
      out.cox_ok = true;
      out.cox_coefficient = r.beta[0];
    } catch (const std::exception& e) {
      if (!out.error.empty()) out.error += "; ";
      out.error += std::string("Cox: ") + e.what();
    }
  } catch (const std::exception& e) {
    out.error = std::string("data generation: ") + e.what();
  }
  return out;
}

MethodSummary summarize(std::span<const double> values, std::size_t failures) {
  MethodSummary s;
  s.successes = values.size();
  s.failures = failures;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

ExperimentSummary run_experiment(const ExperimentConfig& config) {
  if (config.replications == 0) throw InputError("replications must be at least 1");
  ExperimentSummary summary;
  summary.config = config;
  summary.replications.resize(config.replications);

  unsigned threads = config.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(
      std::min<std::size_t>(threads, config.replications));

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t r = next++; r < config.replications; r = next++)
      summary.replications[r] = run_replication(config, r);
  };
  std::vector<std::jthread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  pool.clear();

  std::vector<double> sr, cox;
  double censoring = 0.0;
  for (const ReplicationOutcome& o : summary.replications) {
    if (o.sr_ok) sr.push_back(o.sr_coefficient);
    if (o.cox_ok) cox.push_back(o.cox_coefficient);
    censoring += o.censoring_fraction;
  }
  summary.sr_cox = summarize(sr, config.replications - sr.size());
  summary.cox = summarize(cox, config.replications - cox.size());
  summary.mean_censoring = censoring / static_cast<double>(config.replications);
  return summary;
}

std::vector<double> linspace(double lo, double hi, std::size_t points) {
  std::vector<double> out;
  if (points == 0) return out;
  if (points == 1) return {lo};
  out.reserve(points);
  for (std::size_t k = 0; k < points; ++k)
    out.push_back(lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(points - 1));
  return out;
}

std::vector<CurvePoint> export_component_curve(const FitResult& fit, std::size_t i,
                                               std::span<const double> grid) {
  if (i >= fit.components.size()) throw InputError("no fitted component with that index");
  const ComponentFunction& f = fit.components[i];
  const KnotSet& ks = fit.expansion.knot_sets[i];

  std::vector<double> xs(grid.begin(), grid.end());
  const std::vector<double> used = f.used_knots();
  if (!xs.empty()) {
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    const double gmin = *lo;
    const double gmax = *hi;
    for (double k : used)
      if (k >= gmin && k <= gmax) xs.push_back(k);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());

  std::vector<CurvePoint> out;
  out.reserve(xs.size());
  for (double x : xs) {
    CurvePoint pt;
    pt.x = x;
    pt.value = f.centered(x);
    pt.is_knot = std::binary_search(used.begin(), used.end(), x);
    pt.extrapolated = x < ks.observed_min || x > ks.observed_max;
    out.push_back(pt);
  }
  return out;
}

}  // namespace srcox
