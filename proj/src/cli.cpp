#include "srcox/cli.hpp"

#include "srcox/io.hpp"

#include "CLI11.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace srcox {

namespace {

constexpr int kOk = 0;
constexpr int kInputError = 1;
constexpr int kNotConverged = 2;

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> parse_times(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    double v = 0.0;
    const char* b = item.data();
    const char* e = item.data() + item.size();
    while (b < e && *b == ' ') ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc{} || ptr != e || !(v >= 0.0))
      throw InputError("invalid time '" + item + "' in --times");
    out.push_back(v);
  }
  if (out.empty()) throw InputError("--times needs at least one value");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << text;
  if (!f) throw InputError("failed writing '" + path + "'");
}

// Writes to `path`, or to `out` when path is empty or "-".
void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_text(path, text);
}

struct FitArgs {
  std::string data, spec, out;
  std::optional<double> tol;
  std::optional<int> max_iter;
  bool no_lr = false;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  ModelFile model = load_model_file(a.spec);
  if (a.tol) model.options.newton.tol = *a.tol;
  if (a.max_iter) model.options.newton.max_iter = *a.max_iter;
  if (!(model.options.newton.tol > 0.0) || model.options.newton.max_iter < 1)
    throw InputError("--tol must be positive and --max-iter at least 1");

  const CsvTable table = read_csv_file(a.data);
  const PreparedData prepared = prepare_data(table, model);

  FitResult result;
  try {
    result = fit(prepared.data, prepared.spec, model.options);
  } catch (const ActiveSetError& e) {
    out << "fit failed: " << e.what() << "\n";
    for (const NewtonStep& s : e.inner_trace())
      out << "  newton " << s.iteration << ": loglik " << format_double(s.loglik) << ", |score| "
          << s.score_norm << ", halvings " << s.halvings << (s.ridge ? ", ridge" : "") << "\n";
    return kNotConverged;
  }
  const FitReport report = make_report(prepared, std::move(result), !a.no_lr);
  write_text(a.out, report_to_json(report).dump(2) + "\n");

  out << "rows used " << report.n << " (dropped " << report.dropped_rows << "), events "
      << report.events << "\n";
  out << "log-likelihood " << format_double(report.fit.loglik)
      << (report.fit.converged ? "" : " (not converged)") << "\n";
  for (std::size_t c = 0; c < report.fit.expansion.parameter_count(); ++c)
    if (report.fit.expansion.column_map[c].is_linear())
      out << "  " << report.column_label(c) << " = " << report.fit.coefficients[static_cast<Eigen::Index>(c)]
          << "\n";
  return report.fit.converged ? kOk : kNotConverged;
}

struct SimulateArgs {
  int id = 0;
  std::size_t n = 0, reps = 0;
  std::uint64_t seed = 1;
  std::string out, knots;
  unsigned threads = 0;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  if (a.n < 2) throw InputError("n must be at least 2");
  ExperimentConfig config = experiment_config(a.id, a.n, a.reps, a.seed);
  if (!a.knots.empty()) config.knots = parse_knot_strategy(a.knots);
  config.threads = a.threads;
  const ExperimentSummary summary = run_experiment(config);
  const std::string table = experiment_table(summary);
  out << table;
  if (!a.out.empty()) {
    write_text(a.out, experiment_to_json(summary).dump(2) + "\n");
    std::filesystem::path txt(a.out);
    txt.replace_extension(".txt");
    if (txt.string() != a.out) write_text(txt.string(), table);
  }
  return kOk;
}

struct PredictArgs {
  std::string model, data, out, times;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const FitReport report = load_report(a.model);
  const std::vector<double> times = a.times.empty() ? std::vector<double>{} : parse_times(a.times);
  const CsvTable table = read_csv_file(a.data);
  const auto rows = covariate_rows(table, report.covariate_names());

  std::ostringstream os;
  os << "row,linear_predictor";
  for (double t : times) os << ",S(" << format_double(t) << ")";
  os << "\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const SurvivalCurve s = survival_curve(report.fit, rows[r]);
    os << r + 1 << "," << format_double(s.linear_predictor());
    for (double t : times) os << "," << format_double(s(t));
    os << "\n";
  }
  emit(a.out, os.str(), out);
  return kOk;
}

struct CurvesArgs {
  std::string model, covariate, out;
  std::optional<double> grid_min, grid_max;
  std::size_t grid_points = 101;
};

int cmd_curves(const CurvesArgs& a, std::ostream& out) {
  const FitReport report = load_report(a.model);
  std::optional<std::size_t> index;
  for (std::size_t i = 0; i < report.x_names.size(); ++i)
    if (report.x_names[i] == a.covariate) index = i;
  for (std::size_t k = 0; k < report.z_names.size(); ++k)
    if (report.z_names[k] == a.covariate)
      throw InputError("covariate '" + a.covariate +
                       "' enters linearly; its effect is the single coefficient in the report. "
                       "Curves are available for shaped covariates only");
  if (!index) throw InputError("the model has no covariate named '" + a.covariate + "'");
  if (report.fit.expansion.shapes[*index] == ShapeType::l)
    throw InputError("covariate '" + a.covariate + "' enters linearly; curves need a shaped covariate");
  if (a.grid_points < 2) throw InputError("--grid-points must be at least 2");

  const KnotSet& ks = report.fit.expansion.knot_sets[*index];
  const double lo = a.grid_min.value_or(ks.observed_min);
  const double hi = a.grid_max.value_or(ks.observed_max);
  if (!(lo < hi)) throw InputError("--grid-min must be below --grid-max");

  std::ostringstream os;
  os << "x\tvalue\tis_knot\textrapolated\n";
  for (const CurvePoint& p : export_component_curve(report.fit, *index, linspace(lo, hi, a.grid_points)))
    os << format_double(p.x) << "\t" << format_double(p.value) << "\t" << (p.is_knot ? 1 : 0) << "\t"
       << (p.extrapolated ? 1 : 0) << "\n";
  emit(a.out, os.str(), out);
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Shape-restricted Cox regression"};
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit_cmd = app.add_subcommand("fit", "Fit a model to CSV data and write a JSON report");
  fit_cmd->add_option("--data", fit_args.data, "CSV with time, event and covariate columns")->required();
  fit_cmd->add_option("--spec", fit_args.spec, "JSON model spec")->required();
  fit_cmd->add_option("--out", fit_args.out, "Report path")->required();
  fit_cmd->add_option("--tol", fit_args.tol, "Newton tolerance on the score sup-norm");
  fit_cmd->add_option("--max-iter", fit_args.max_iter, "Newton iteration limit");
  fit_cmd->add_flag("--no-lr", fit_args.no_lr, "Skip profile-likelihood intervals");

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "Run one of the Monte Carlo experiments 1-7");
  sim_cmd->add_option("id", sim_args.id, "Experiment id (1-7)")->required();
  sim_cmd->add_option("n", sim_args.n, "Sample size")->required();
  sim_cmd->add_option("reps", sim_args.reps, "Replications")->required();
  sim_cmd->add_option("seed,--seed", sim_args.seed, "Random seed");
  sim_cmd->add_option("--out", sim_args.out, "JSON summary path; the table goes next to it as .txt");
  sim_cmd->add_option("--threads", sim_args.threads, "Worker threads (0: all cores)");
  sim_cmd->add_option("--knots", sim_args.knots, "Knot strategy for the SR-Cox fit");

  PredictArgs pred_args;
  auto* pred_cmd = app.add_subcommand("predict", "Linear predictors and survival probabilities");
  pred_cmd->add_option("--model", pred_args.model, "Fit report")->required();
  pred_cmd->add_option("--data", pred_args.data, "CSV with the model's covariate columns")->required();
  pred_cmd->add_option("--out", pred_args.out, "Output CSV (default stdout)");
  pred_cmd->add_option("--times", pred_args.times, "Comma-separated times t1,t2,...");

  CurvesArgs curve_args;
  auto* curve_cmd = app.add_subcommand("curves", "Export a fitted component as TSV");
  curve_cmd->add_option("--model", curve_args.model, "Fit report")->required();
  curve_cmd->add_option("--covariate", curve_args.covariate, "Shaped covariate name")->required();
  curve_cmd->add_option("--grid-min", curve_args.grid_min, "Grid start (default observed minimum)");
  curve_cmd->add_option("--grid-max", curve_args.grid_max, "Grid end (default observed maximum)");
  curve_cmd->add_option("--grid-points", curve_args.grid_points, "Grid size");
  curve_cmd->add_option("--out", curve_args.out, "Output TSV (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kInputError;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit_args, out);
    if (sim_cmd->parsed()) return cmd_simulate(sim_args, out);
    if (pred_cmd->parsed()) return cmd_predict(pred_args, out);
    if (curve_cmd->parsed()) return cmd_curves(curve_args, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  } catch (const ConvergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kNotConverged;
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNotConverged;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

}  // namespace srcox
