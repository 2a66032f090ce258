#pragma once

// CSV survival data, JSON model specs and the self-contained fit report used
// by the command-line front end.

#include "srcox/inference.hpp"
#include "srcox/sim_lab.hpp"

#include "json.hpp"

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <vector>

namespace srcox {

// Header plus numeric cells; empty, "NA" and "NaN" cells are stored as NaN.
struct CsvTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;
  std::vector<std::size_t> line_numbers;  // 1-based source line of each row

  std::optional<std::size_t> column(std::string_view name) const;
};

CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::filesystem::path& path);

struct ModelFile {
  std::vector<CovariateSpec> covariates;  // file order
  ActiveSetOptions options;
};

// {"covariates": [{"name": ..., "shape": ..., "knots": ...}], "options": {...}}
ModelFile parse_model_file(const nlohmann::json& doc);
ModelFile load_model_file(const std::filesystem::path& path);

// Shape-l covariates form the linear block z (in file order); the others are
// the shaped block x.
struct PreparedData {
  SurvivalDataset data;
  std::vector<std::string> z_names;
  std::vector<std::string> x_names;
  ModelSpec spec;  // x block only
  std::size_t dropped_rows = 0;
};

// Listwise deletion over time, event and the covariates the model uses.
PreparedData prepare_data(const CsvTable& table, const ModelFile& model);

// Covariate vectors (z then x) for prediction; rows with a missing used value
// are rejected with their line number.
std::vector<std::vector<double>> covariate_rows(const CsvTable& table,
                                                const std::vector<std::string>& names);

struct LrEntry {
  std::string covariate;
  std::optional<LrInterval> interval;
  std::string error;
};

struct FitReport {
  std::vector<std::string> z_names;
  std::vector<std::string> x_names;
  std::vector<KnotStrategy> knot_strategies;  // per x covariate
  std::size_t n = 0;
  std::size_t events = 0;
  std::size_t dropped_rows = 0;
  FitResult fit;
  std::vector<LrEntry> lr_intervals;
  std::vector<double> linear_predictors;  // training rows, uncentered

  std::vector<std::string> covariate_names() const;  // z then x
  std::string column_label(std::size_t column) const;
};

FitReport make_report(const PreparedData& prepared, FitResult fit, bool with_lr_intervals,
                      const ProfileOptions& profile = {});

nlohmann::json report_to_json(const FitReport& report);
FitReport report_from_json(const nlohmann::json& doc);
FitReport load_report(const std::filesystem::path& path);

nlohmann::json experiment_to_json(const ExperimentSummary& summary);
std::string experiment_table(const ExperimentSummary& summary);

}  // namespace srcox
