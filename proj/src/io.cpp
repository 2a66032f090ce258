#include "srcox/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace srcox {

using nlohmann::json;

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

bool is_missing(std::string_view cell) { return cell.empty() || cell == "NA" || cell == "NaN"; }

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> number_or_null(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

TraceAction parse_trace_action(const std::string& name) {
  for (TraceAction a : {TraceAction::Subproblem, TraceAction::Restore, TraceAction::Add,
                        TraceAction::Terminate})
    if (trace_action_name(a) == name) return a;
  throw InputError("unknown trace action '" + name + "' in report");
}

ShapeType shape_from(const std::string& label) {
  const auto shape = parse_shape(label);
  if (!shape)
    throw InputError("unknown shape '" + label + "'; valid shapes are: " + valid_shape_labels());
  return *shape;
}

void check_option_keys(const json& options) {
  static const std::set<std::string> known{"tol", "max_iter", "max_halvings", "kkt_tol",
                                           "max_outer"};
  for (const auto& [key, value] : options.items())
    if (!known.contains(key)) throw InputError("unknown solver option '" + key + "'");
}

json options_to_json(const ActiveSetOptions& o) {
  return {{"tol", o.newton.tol},
          {"max_iter", o.newton.max_iter},
          {"max_halvings", o.newton.max_halvings},
          {"kkt_tol", o.kkt_tol},
          {"max_outer", o.max_outer}};
}

ActiveSetOptions options_from_json(const json& j, ActiveSetOptions o = {}) {
  if (!j.is_object()) throw InputError("\"options\" must be an object");
  check_option_keys(j);
  if (j.contains("tol")) o.newton.tol = j.at("tol").get<double>();
  if (j.contains("max_iter")) o.newton.max_iter = j.at("max_iter").get<int>();
  if (j.contains("max_halvings")) o.newton.max_halvings = j.at("max_halvings").get<int>();
  if (j.contains("kkt_tol")) o.kkt_tol = j.at("kkt_tol").get<double>();
  if (j.contains("max_outer")) o.max_outer = j.at("max_outer").get<int>();
  if (!(o.newton.tol > 0.0) || !(o.kkt_tol > 0.0))
    throw InputError("solver tolerances must be positive");
  if (o.newton.max_iter < 1 || o.newton.max_halvings < 0 || o.max_outer < 0)
    throw InputError("solver iteration limits must be positive");
  return o;
}

}  // namespace

std::optional<std::size_t> CsvTable::column(std::string_view name) const {
  for (std::size_t k = 0; k < names.size(); ++k)
    if (names[k] == name) return k;
  return std::nullopt;
}

CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (!have_header) {
      std::set<std::string> seen;
      for (auto c : cells) {
        if (c.empty()) throw InputError(at_line(line_no) + "empty column name in header");
        if (!seen.insert(std::string(c)).second)
          throw InputError(at_line(line_no) + "duplicate column '" + std::string(c) + "'");
        table.names.emplace_back(c);
      }
      have_header = true;
      continue;
    }
    if (cells.size() != table.names.size())
      throw InputError(at_line(line_no) + "expected " + std::to_string(table.names.size()) +
                       " fields, found " + std::to_string(cells.size()));
    std::vector<double> row(cells.size());
    for (std::size_t k = 0; k < cells.size(); ++k) {
      const std::string_view cell = cells[k];
      if (is_missing(cell)) {
        row[k] = kMissing;
        continue;
      }
      const char* first = cell.data();
      if (!cell.empty() && cell.front() == '+') ++first;
      auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), row[k]);
      if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(row[k]))
        throw InputError(at_line(line_no) + "column '" + table.names[k] + "' has non-numeric value '" +
                         std::string(cell) + "'");
    }
    table.rows.push_back(std::move(row));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw InputError("CSV input is empty");
  return table;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open data file '" + path.string() + "'");
  return read_csv(in);
}

ModelFile parse_model_file(const json& doc) {
  try {
    if (!doc.is_object()) throw InputError("model spec must be a JSON object");
    for (const auto& [key, value] : doc.items())
      if (key != "covariates" && key != "options")
        throw InputError("unknown model spec field '" + key + "'");
    const json& covs = doc.at("covariates");
    if (!covs.is_array() || covs.empty())
      throw InputError("model spec needs a non-empty \"covariates\" array");
    ModelFile model;
    std::set<std::string> seen;
    for (const json& c : covs) {
      if (!c.is_object()) throw InputError("each covariate entry must be an object");
      for (const auto& [key, value] : c.items())
        if (key != "name" && key != "shape" && key != "knots")
          throw InputError("unknown covariate field '" + key + "'");
      CovariateSpec spec;
      spec.name = c.at("name").get<std::string>();
      if (spec.name.empty()) throw InputError("covariate name must not be empty");
      if (!seen.insert(spec.name).second)
        throw InputError("covariate '" + spec.name + "' is declared twice");
      spec.shape = shape_from(c.at("shape").get<std::string>());
      if (c.contains("knots")) spec.knots = parse_knot_strategy(c.at("knots").get<std::string>());
      model.covariates.push_back(std::move(spec));
    }
    if (doc.contains("options")) model.options = options_from_json(doc.at("options"));
    return model;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed model spec: ") + e.what());
  }
}

ModelFile load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model spec '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("model spec is not valid JSON: " + std::string(e.what()));
  }
  return parse_model_file(doc);
}

PreparedData prepare_data(const CsvTable& table, const ModelFile& model) {
  const auto time_col = table.column("time");
  const auto event_col = table.column("event");
  if (!time_col) throw InputError("data has no 'time' column");
  if (!event_col) throw InputError("data has no 'event' column");

  std::vector<std::string> z_names, x_names;
  ModelSpec spec;
  for (const CovariateSpec& c : model.covariates) {
    if (!table.column(c.name))
      throw InputError("column '" + c.name + "' named in the model is not in the data header");
    if (c.shape == ShapeType::l) {
      z_names.push_back(c.name);
    } else {
      x_names.push_back(c.name);
      spec.covariates.push_back(c);
    }
  }
  std::vector<std::size_t> cols;
  for (const auto& name : z_names) cols.push_back(*table.column(name));
  for (const auto& name : x_names) cols.push_back(*table.column(name));

  std::vector<Subject> subjects;
  std::size_t dropped = 0;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const double t = row[*time_col];
    const double e = row[*event_col];
    bool missing = std::isnan(t) || std::isnan(e);
    for (std::size_t c : cols) missing = missing || std::isnan(row[c]);
    if (missing) {
      ++dropped;
      continue;
    }
    if (!(t > 0.0)) throw InputError(at_line(table.line_numbers[r]) + "time must be positive");
    if (e != 0.0 && e != 1.0) throw InputError(at_line(table.line_numbers[r]) + "event must be 0 or 1");
    Subject s;
    s.time = t;
    s.event = e == 1.0;
    for (std::size_t c : cols) s.covariates.push_back(row[c]);
    subjects.push_back(std::move(s));
  }
  if (subjects.empty()) throw InputError("no complete rows remain after removing missing values");
  SurvivalDataset data(std::move(subjects), z_names.size(), x_names.size());
  return {std::move(data), std::move(z_names), std::move(x_names), std::move(spec), dropped};
}

std::vector<std::vector<double>> covariate_rows(const CsvTable& table,
                                                const std::vector<std::string>& names) {
  std::vector<std::size_t> cols;
  for (const auto& name : names) {
    const auto c = table.column(name);
    if (!c) throw InputError("data has no column '" + name + "' required by the model");
    cols.push_back(*c);
  }
  std::vector<std::vector<double>> out;
  out.reserve(table.rows.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::vector<double> v;
    v.reserve(cols.size());
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const double x = table.rows[r][cols[k]];
      if (std::isnan(x))
        throw InputError(at_line(table.line_numbers[r]) + "missing value in column '" + names[k] + "'");
      v.push_back(x);
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<std::string> FitReport::covariate_names() const {
  std::vector<std::string> out = z_names;
  out.insert(out.end(), x_names.begin(), x_names.end());
  return out;
}

std::string FitReport::column_label(std::size_t column) const {
  const ColumnLabel& l = fit.expansion.column_map.at(column);
  const std::string name = covariate_names().at(l.covariate);
  return l.is_linear() ? name : name + "#" + std::to_string(l.knot);
}

FitReport make_report(const PreparedData& prepared, FitResult fit, bool with_lr_intervals,
                      const ProfileOptions& profile) {
  FitReport report;
  report.z_names = prepared.z_names;
  report.x_names = prepared.x_names;
  for (const auto& c : prepared.spec.covariates) report.knot_strategies.push_back(c.knots);
  report.n = prepared.data.n();
  report.events = prepared.data.event_count();
  report.dropped_rows = prepared.dropped_rows;
  report.fit = std::move(fit);

  for (const Subject& s : prepared.data.subjects())
    report.linear_predictors.push_back(linear_predictor(report.fit, s.covariates));

  if (with_lr_intervals) {
    for (std::size_t c = 0; c < report.fit.expansion.parameter_count(); ++c) {
      if (!report.fit.expansion.column_map[c].is_linear()) continue;
      LrEntry entry;
      entry.covariate = report.column_label(c);
      if (!report.fit.converged) {
        entry.error = "fit did not converge";
      } else {
        try {
          entry.interval = lr_standard_error(prepared.data, report.fit, c, profile);
        } catch (const std::exception& e) {
          entry.error = e.what();
        }
      }
      report.lr_intervals.push_back(std::move(entry));
    }
  }
  return report;
}

json report_to_json(const FitReport& report) {
  const FitResult& f = report.fit;
  const BasisExpansion& ex = f.expansion;
  const auto names = report.covariate_names();

  json covariates = json::array();
  for (const auto& name : report.z_names)
    covariates.push_back({{"name", name}, {"shape", "l"}, {"role", "linear"}});
  for (std::size_t i = 0; i < report.x_names.size(); ++i) {
    json c = {{"name", report.x_names[i]},
              {"shape", std::string(shape_label(ex.shapes[i]))},
              {"role", ex.shapes[i] == ShapeType::l ? "linear" : "shaped"}};
    if (i < report.knot_strategies.size())
      c["knot_strategy"] = format_knot_strategy(report.knot_strategies[i]);
    covariates.push_back(std::move(c));
  }

  json coefficients = json::array();
  for (std::size_t c = 0; c < ex.parameter_count(); ++c) {
    const ColumnLabel& l = ex.column_map[c];
    json knot_value = nullptr;
    if (!l.is_linear())
      knot_value = ex.knot_sets[l.covariate - ex.d_z].knots[static_cast<std::size_t>(l.knot)];
    coefficients.push_back(
        {{"label", report.column_label(c)},
         {"covariate", names[l.covariate]},
         {"knot", l.is_linear() ? json(nullptr) : json(l.knot)},
         {"knot_value", knot_value},
         {"constrained", static_cast<bool>(ex.constraint_mask[c])},
         {"in_working_set",
          std::binary_search(f.working_set.begin(), f.working_set.end(), c)},
         {"value", f.coefficients[static_cast<Eigen::Index>(c)]}});
  }

  json knots = json::array();
  for (std::size_t i = 0; i < ex.shaped_count(); ++i) {
    const KnotSet& ks = ex.knot_sets[i];
    json used = json::array();
    if (ex.shapes[i] != ShapeType::l)
      for (std::size_t j = 0; j < ks.size(); ++j)
        used.push_back(f.coefficients[static_cast<Eigen::Index>(ex.blocks[i].start + j)] > 0.0);
    knots.push_back({{"covariate", report.x_names[i]},
                     {"shape", std::string(shape_label(ex.shapes[i]))},
                     {"observed_min", ks.observed_min},
                     {"observed_max", ks.observed_max},
                     {"values", ks.knots},
                     {"used", used},
                     {"warning", ks.warning ? json(*ks.warning) : json(nullptr)}});
  }

  json lr = json::array();
  for (const LrEntry& e : report.lr_intervals) {
    json j = {{"covariate", e.covariate}};
    if (e.interval) {
      j["column"] = e.interval->coefficient;
      j["estimate"] = e.interval->estimate;
      j["lower"] = e.interval->lower;
      j["upper"] = e.interval->upper;
      j["se"] = e.interval->se;
    } else {
      j["error"] = e.error;
    }
    lr.push_back(std::move(j));
  }

  json records = json::array();
  for (const TraceRecord& r : f.trace)
    records.push_back({{"action", std::string(trace_action_name(r.action))},
                       {"working_set_size", r.working_set_size},
                       {"objective", r.objective},
                       {"step_ratio", optional_number(r.step_ratio)},
                       {"index", r.index ? json(*r.index) : json(nullptr)}});
  std::size_t adds = 0, restores = 0;
  for (const TraceRecord& r : f.trace) {
    adds += r.action == TraceAction::Add;
    restores += r.action == TraceAction::Restore;
  }

  json components = json::array();
  for (std::size_t i = 0; i < f.components.size(); ++i) {
    const ComponentFunction& comp = f.components[i];
    const KnotSet& ks = ex.knot_sets[i];
    json curve = json::array();
    for (const CurvePoint& p :
         export_component_curve(f, i, linspace(ks.observed_min, ks.observed_max, 101)))
      curve.push_back({{"x", p.x}, {"value", p.value}, {"is_knot", p.is_knot}});
    components.push_back({{"covariate", report.x_names[i]},
                          {"shape", std::string(shape_label(comp.shape))},
                          {"knots", comp.knots},
                          {"weights", comp.weights},
                          {"centering_constant", comp.centering_constant},
                          {"curve", std::move(curve)}});
  }

  return {{"format", "srcox-fit-report/1"},
          {"data", {{"n", report.n}, {"events", report.events}, {"dropped_rows", report.dropped_rows}}},
          {"covariates", std::move(covariates)},
          {"options", options_to_json(f.options)},
          {"converged", f.converged},
          {"loglik", f.loglik},
          {"coefficients", std::move(coefficients)},
          {"lr_intervals", std::move(lr)},
          {"knots", std::move(knots)},
          {"trace",
           {{"outer_steps", f.trace.size()},
            {"additions", adds},
            {"restorations", restores},
            {"final_working_set_size", f.working_set.size()},
            {"records", std::move(records)}}},
          {"baseline",
           {{"time", f.baseline.jump_times}, {"cumulative_hazard", f.baseline.cumulative_values}}},
          {"components", std::move(components)},
          {"linear_predictors", report.linear_predictors}};
}

FitReport report_from_json(const json& doc) {
  try {
    if (doc.value("format", std::string()) != "srcox-fit-report/1")
      throw InputError("not a fit report (missing or unknown \"format\")");
    FitReport report;
    const json& data = doc.at("data");
    report.n = data.at("n").get<std::size_t>();
    report.events = data.at("events").get<std::size_t>();
    report.dropped_rows = data.at("dropped_rows").get<std::size_t>();

    std::vector<ShapeType> shapes;
    for (const json& c : doc.at("covariates")) {
      const std::string name = c.at("name").get<std::string>();
      if (c.at("role").get<std::string>() == "linear" && !c.contains("knot_strategy")) {
        if (!report.x_names.empty())
          throw InputError("linear block must precede shaped covariates in a report");
        report.z_names.push_back(name);
        continue;
      }
      report.x_names.push_back(name);
      shapes.push_back(shape_from(c.at("shape").get<std::string>()));
      report.knot_strategies.push_back(parse_knot_strategy(c.at("knot_strategy").get<std::string>()));
    }

    std::vector<KnotSet> knot_sets;
    const json& knots = doc.at("knots");
    if (knots.size() != shapes.size()) throw InputError("knot table does not match covariates");
    for (const json& k : knots) {
      KnotSet ks;
      ks.knots = k.at("values").get<std::vector<double>>();
      ks.observed_min = k.at("observed_min").get<double>();
      ks.observed_max = k.at("observed_max").get<double>();
      if (!k.at("warning").is_null()) ks.warning = k.at("warning").get<std::string>();
      knot_sets.push_back(std::move(ks));
    }

    FitResult& f = report.fit;
    f.expansion = assemble_expansion(report.z_names.size(), std::move(shapes), std::move(knot_sets));
    const json& coefs = doc.at("coefficients");
    if (coefs.size() != f.expansion.parameter_count())
      throw InputError("coefficient table does not match the basis expansion");
    f.coefficients.resize(static_cast<Eigen::Index>(coefs.size()));
    for (std::size_t c = 0; c < coefs.size(); ++c) {
      f.coefficients[static_cast<Eigen::Index>(c)] = coefs[c].at("value").get<double>();
      if (coefs[c].at("in_working_set").get<bool>()) f.working_set.push_back(c);
    }

    f.options = options_from_json(doc.at("options"));
    f.converged = doc.at("converged").get<bool>();
    f.loglik = doc.at("loglik").get<double>();

    for (const json& r : doc.at("trace").at("records")) {
      TraceRecord rec;
      rec.action = parse_trace_action(r.at("action").get<std::string>());
      rec.working_set_size = r.at("working_set_size").get<std::size_t>();
      rec.objective = r.at("objective").get<double>();
      rec.step_ratio = number_or_null(r.at("step_ratio"));
      if (!r.at("index").is_null()) rec.index = r.at("index").get<std::size_t>();
      f.trace.push_back(rec);
    }

    f.baseline.jump_times = doc.at("baseline").at("time").get<std::vector<double>>();
    f.baseline.cumulative_values =
        doc.at("baseline").at("cumulative_hazard").get<std::vector<double>>();
    if (f.baseline.jump_times.size() != f.baseline.cumulative_values.size())
      throw InputError("baseline hazard table is ragged");

    const json& comps = doc.at("components");
    if (comps.size() != f.expansion.shaped_count())
      throw InputError("component table does not match covariates");
    for (std::size_t i = 0; i < comps.size(); ++i) {
      ComponentFunction comp;
      comp.covariate_index = f.expansion.d_z + i;
      comp.shape = f.expansion.shapes[i];
      comp.knots = comps[i].at("knots").get<std::vector<double>>();
      comp.weights = comps[i].at("weights").get<std::vector<double>>();
      comp.centering_constant = comps[i].at("centering_constant").get<double>();
      f.components.push_back(std::move(comp));
    }

    for (const json& e : doc.at("lr_intervals")) {
      LrEntry entry;
      entry.covariate = e.at("covariate").get<std::string>();
      if (e.contains("error")) {
        entry.error = e.at("error").get<std::string>();
      } else {
        LrInterval iv;
        iv.coefficient = e.at("column").get<std::size_t>();
        iv.estimate = e.at("estimate").get<double>();
        iv.lower = e.at("lower").get<double>();
        iv.upper = e.at("upper").get<double>();
        iv.se = e.at("se").get<double>();
        entry.interval = iv;
      }
      report.lr_intervals.push_back(std::move(entry));
    }
    report.linear_predictors = doc.at("linear_predictors").get<std::vector<double>>();
    return report;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed fit report: ") + e.what());
  }
}

FitReport load_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model report '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw InputError("model report is not valid JSON: " + std::string(e.what()));
  }
  return report_from_json(doc);
}

namespace {

json summary_json(const MethodSummary& s) {
  return {{"mean", s.mean}, {"std", s.std}, {"successes", s.successes}, {"failures", s.failures}};
}

}  // namespace

json experiment_to_json(const ExperimentSummary& summary) {
  const ExperimentConfig& c = summary.config;
  json reps = json::array();
  for (std::size_t r = 0; r < summary.replications.size(); ++r) {
    const ReplicationOutcome& o = summary.replications[r];
    json j = {{"replication", r},
              {"censoring_fraction", o.censoring_fraction},
              {"sr_cox", o.sr_ok ? json(o.sr_coefficient) : json(nullptr)},
              {"cox", o.cox_ok ? json(o.cox_coefficient) : json(nullptr)}};
    if (!o.error.empty()) j["error"] = o.error;
    reps.push_back(std::move(j));
  }
  return {{"experiment", c.id},
          {"x_distribution", std::string(x_distribution_name(c.x_distribution))},
          {"r", std::string(r_function_name(c.r_function))},
          {"shape", std::string(shape_label(c.shape))},
          {"knots", format_knot_strategy(c.knots)},
          {"n", c.n},
          {"replications", c.replications},
          {"seed", c.seed},
          {"beta_z", c.beta_z},
          {"true_coefficient", 2.0 * c.beta_z},
          {"mean_censoring", summary.mean_censoring},
          {"sr_cox", summary_json(summary.sr_cox)},
          {"cox", summary_json(summary.cox)},
          {"per_replication", std::move(reps)}};
}

std::string experiment_table(const ExperimentSummary& summary) {
  const ExperimentConfig& c = summary.config;
  std::ostringstream os;
  char buf[160];
  os << "Experiment " << c.id << ": x ~ " << x_distribution_name(c.x_distribution)
     << ", r(x) = " << r_function_name(c.r_function) << ", SR-Cox shape " << shape_label(c.shape)
     << ", knots " << format_knot_strategy(c.knots) << "\n";
  std::snprintf(buf, sizeof buf, "n = %zu, replications = %zu, seed = %llu, mean censoring = %.4f\n",
                c.n, c.replications, static_cast<unsigned long long>(c.seed),
                summary.mean_censoring);
  os << buf << "\n";
  std::snprintf(buf, sizeof buf, "%-8s %10s %10s %8s %9s\n", "Method", "Mean", "Std", "Fits",
                "Failures");
  os << buf;
  for (const auto& [name, s] : {std::pair<const char*, const MethodSummary&>{"SR-Cox", summary.sr_cox},
                                {"Cox", summary.cox}}) {
    std::snprintf(buf, sizeof buf, "%-8s %10.4f %10.4f %8zu %9zu\n", name, s.mean, s.std,
                  s.successes, s.failures);
    os << buf;
  }
  return os.str();
}

}  // namespace srcox
