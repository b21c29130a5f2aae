#pragma once

// CSV ingestion, run configuration/result types and their JSON and CSV
// serializations.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "ablate/ablation.hpp"
#include "ablate/core.hpp"
#include "ablate/error.hpp"
#include "ablate/estimator.hpp"
#include "ablate/format.hpp"
#include "ablate/model_spec.hpp"
#include "ablate/oracle.hpp"
#include "ablate/uncertainty.hpp"
#include "ablate/version.hpp"

namespace ablate {

// ---------------------------------------------------------------------------
// CSV ingestion

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

}  // namespace detail

/// Reads a comma-separated file with a header row. Selected feature columns
/// default to every column except the target; unselected columns are not
/// parsed. Every selected cell must be a finite decimal number.
inline Dataset read_csv(std::istream& in, const std::string& target_column,
                        const std::optional<std::vector<std::string>>& feature_columns = {},
                        const std::string& source = "<input>") {
  std::string line;
  if (!std::getline(in, line)) throw IngestionError(source + ": missing header row");
  const std::vector<std::string_view> header_views = detail::split_commas(line);
  std::vector<std::string> header(header_views.begin(), header_views.end());

  std::unordered_map<std::string, std::size_t> position;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c].empty()) {
      throw IngestionError(source + ": empty column name at header position " +
                           std::to_string(c + 1));
    }
    if (!position.emplace(header[c], c).second) {
      throw IngestionError(source + ": duplicate column name '" + header[c] + "'");
    }
  }
  auto locate = [&](const std::string& name) {
    const auto it = position.find(name);
    if (it == position.end()) throw IngestionError(source + ": no column named '" + name + "'");
    return it->second;
  };

  const std::size_t target_pos = locate(target_column);
  std::vector<std::string> names;
  std::vector<std::size_t> feature_pos;
  if (feature_columns) {
    for (const auto& name : *feature_columns) {
      if (name == target_column) {
        throw IngestionError(source + ": target column '" + name + "' listed as a feature");
      }
      feature_pos.push_back(locate(name));
      names.push_back(name);
    }
  } else {
    for (std::size_t c = 0; c < header.size(); ++c) {
      if (c == target_pos) continue;
      feature_pos.push_back(c);
      names.push_back(header[c]);
    }
  }
  if (names.empty()) throw IngestionError(source + ": no feature columns selected");

  std::vector<double> values;
  std::vector<double> target;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_commas(line);
    if (cells.size() != header.size()) {
      throw IngestionError(source + ": line " + std::to_string(line_no) + " has " +
                           std::to_string(cells.size()) + " fields, header has " +
                           std::to_string(header.size()));
    }
    auto cell = [&](std::size_t pos) {
      const auto v = parse_finite_double(cells[pos]);
      if (!v) {
        const std::string shown = cells[pos].empty() ? "<missing>" : std::string(cells[pos]);
        throw IngestionError(source + ": line " + std::to_string(line_no) + ", column '" +
                             header[pos] + "': cannot parse '" + shown +
                             "' as a finite number");
      }
      return *v;
    };
    for (const std::size_t pos : feature_pos) values.push_back(cell(pos));
    target.push_back(cell(target_pos));
  }
  if (target.size() < 2) {
    throw IngestionError(source + ": need at least 2 data rows, found " +
                         std::to_string(target.size()));
  }
  Matrix features(target.size(), names.size(), std::move(values));
  return Dataset(std::move(features), std::move(target), std::move(names));
}

inline Dataset load_csv(const std::filesystem::path& path, const std::string& target_column,
                        const std::optional<std::vector<std::string>>& feature_columns = {}) {
  std::ifstream in(path);
  if (!in) throw IngestionError("cannot open '" + path.string() + "'");
  return read_csv(in, target_column, feature_columns, path.string());
}

/// Writes features then target under a header, numbers as shortest
/// round-trip decimals.
inline void write_csv(std::ostream& out, const Dataset& data,
                      const std::string& target_column = "y") {
  for (const auto& name : data.feature_names()) out << name << ',';
  out << target_column << '\n';
  for (std::size_t j = 0; j < data.rows(); ++j) {
    for (const double v : data.row(j)) out << format_double(v) << ',';
    out << format_double(data.target(j)) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Run configuration and results

enum class FormulationChoice { rv, fd, both };

inline std::string_view to_string(FormulationChoice f) {
  switch (f) {
    case FormulationChoice::rv: return "rv";
    case FormulationChoice::fd: return "fd";
    case FormulationChoice::both: return "both";
  }
  return "unknown";
}

struct RunConfig {
  std::string data_path;
  std::string target_column;
  std::optional<std::vector<std::string>> feature_columns;
  ModelSpec model;
  LossSpec loss;
  std::size_t K = 30;
  AblationMode mode = AblationMode::resample;
  FormulationChoice formulation = FormulationChoice::both;
  double confidence_level = 0.95;
  CiMethod ci_method = CiMethod::student_t;
  std::uint64_t seed = 0;
  VarianceKind variance = VarianceKind::mle;

  void validate() const {
    if (mode != AblationMode::exact && K < 1) throw InvalidArgument("K must be >= 1");
    if (formulation != FormulationChoice::rv && mode != AblationMode::exact && K < 2) {
      throw InvalidArgument("the fd formulation needs K >= 2 (or --mode exact)");
    }
    if (!(confidence_level > 0.0 && confidence_level < 1.0)) {
      throw InvalidArgument("confidence level must lie in (0,1)");
    }
  }

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

struct RunResult {
  double baseline_risk = 0.0;
  std::vector<ImportanceEstimate> estimates;  // by feature_index, then rv before fd
  RunConfig config_echo;
  std::string library_version = kLibraryVersion;

  friend bool operator==(const RunResult&, const RunResult&) = default;
};

struct CoverageResult {
  struct Entry {
    std::size_t feature_index = 0;
    std::string feature_name;
    CoverageReport report;
  };
  std::vector<Entry> entries;
  RunConfig config_echo;
  std::string library_version = kLibraryVersion;
};

// ---------------------------------------------------------------------------
// JSON

namespace detail {

template <typename Enum, std::size_t N>
Enum enum_from_string(std::string_view text, const Enum (&all)[N], std::string_view what) {
  for (const Enum e : all) {
    if (to_string(e) == text) return e;
  }
  throw InvalidArgument("unknown " + std::string(what) + " '" + std::string(text) + "'");
}

inline constexpr LossKind kLossKinds[] = {LossKind::squared, LossKind::absolute,
                                          LossKind::zero_one, LossKind::log_loss};
inline constexpr AblationMode kModes[] = {AblationMode::resample, AblationMode::permute,
                                          AblationMode::exact};
inline constexpr FormulationChoice kFormulationChoices[] = {
    FormulationChoice::rv, FormulationChoice::fd, FormulationChoice::both};
inline constexpr Formulation kFormulations[] = {Formulation::rv, Formulation::fd};
inline constexpr CiMethod kCiMethods[] = {CiMethod::student_t, CiMethod::normal};
inline constexpr VarianceKind kVariances[] = {VarianceKind::mle, VarianceKind::unbiased};
inline constexpr ModelKind kModelKinds[] = {ModelKind::constant, ModelKind::ols, ModelKind::knn,
                                            ModelKind::exec};

}  // namespace detail

using Json = nlohmann::ordered_json;

inline Json to_json(const ModelSpec& spec) {
  Json j;
  j["kind"] = to_string(spec.kind);
  switch (spec.kind) {
    case ModelKind::constant:
      j["value"] = spec.constant_value ? Json(*spec.constant_value) : Json(nullptr);
      break;
    case ModelKind::ols:
      j["ridge_lambda"] = spec.ridge_lambda;
      break;
    case ModelKind::knn:
      j["k"] = spec.k;
      break;
    case ModelKind::exec:
      j["command"] = spec.command;
      j["serial"] = spec.serial;
      break;
  }
  return j;
}

inline ModelSpec model_spec_from_json(const Json& j) {
  ModelSpec spec;
  spec.kind = detail::enum_from_string(j.at("kind").get<std::string>(), detail::kModelKinds,
                                       "model kind");
  switch (spec.kind) {
    case ModelKind::constant:
      if (!j.at("value").is_null()) spec.constant_value = j.at("value").get<double>();
      break;
    case ModelKind::ols:
      spec.ridge_lambda = j.at("ridge_lambda").get<double>();
      break;
    case ModelKind::knn:
      spec.k = j.at("k").get<std::size_t>();
      break;
    case ModelKind::exec:
      spec.command = j.at("command").get<std::vector<std::string>>();
      spec.serial = j.at("serial").get<bool>();
      break;
  }
  return spec;
}

inline Json to_json(const RunConfig& c) {
  Json j;
  j["data_path"] = c.data_path;
  j["target_column"] = c.target_column;
  j["feature_columns"] = c.feature_columns ? Json(*c.feature_columns) : Json(nullptr);
  j["model"] = to_json(c.model);
  j["loss"] = {{"kind", to_string(c.loss.kind)},
               {"threshold", c.loss.threshold},
               {"epsilon", c.loss.epsilon}};
  j["K"] = c.K;
  j["mode"] = to_string(c.mode);
  j["formulation"] = to_string(c.formulation);
  j["confidence_level"] = c.confidence_level;
  j["ci_method"] = to_string(c.ci_method);
  j["seed"] = c.seed;
  j["variance"] = to_string(c.variance);
  return j;
}

inline RunConfig run_config_from_json(const Json& j) {
  RunConfig c;
  c.data_path = j.at("data_path").get<std::string>();
  c.target_column = j.at("target_column").get<std::string>();
  if (!j.at("feature_columns").is_null()) {
    c.feature_columns = j.at("feature_columns").get<std::vector<std::string>>();
  }
  c.model = model_spec_from_json(j.at("model"));
  const Json& loss = j.at("loss");
  c.loss.kind = detail::enum_from_string(loss.at("kind").get<std::string>(), detail::kLossKinds,
                                         "loss");
  c.loss.threshold = loss.at("threshold").get<double>();
  c.loss.epsilon = loss.at("epsilon").get<double>();
  c.K = j.at("K").get<std::size_t>();
  c.mode = detail::enum_from_string(j.at("mode").get<std::string>(), detail::kModes, "mode");
  c.formulation = detail::enum_from_string(j.at("formulation").get<std::string>(),
                                           detail::kFormulationChoices, "formulation");
  c.confidence_level = j.at("confidence_level").get<double>();
  c.ci_method = detail::enum_from_string(j.at("ci_method").get<std::string>(),
                                         detail::kCiMethods, "ci method");
  c.seed = j.at("seed").get<std::uint64_t>();
  c.variance = detail::enum_from_string(j.at("variance").get<std::string>(), detail::kVariances,
                                        "variance");
  return c;
}

inline Json to_json(const ImportanceEstimate& e) {
  Json j;
  j["feature_index"] = e.feature_index;
  j["feature_name"] = e.feature_name;
  j["point"] = e.point;
  j["sem"] = e.sem;
  j["ci_low"] = e.ci_low;
  j["ci_high"] = e.ci_high;
  j["confidence_level"] = e.confidence_level;
  j["formulation"] = to_string(e.formulation);
  j["n_samples"] = e.n_samples;
  j["K"] = e.K;
  j["mode"] = to_string(e.mode);
  j["seed"] = e.seed;
  j["table_seed"] = e.table_seed;
  j["ci_method"] = to_string(e.ci_method);
  j["variance"] = to_string(e.variance);
  j["cross_product_samples"] = e.cross_product_samples;
  return j;
}

inline ImportanceEstimate importance_from_json(const Json& j) {
  ImportanceEstimate e;
  e.feature_index = j.at("feature_index").get<std::size_t>();
  e.feature_name = j.at("feature_name").get<std::string>();
  e.point = j.at("point").get<double>();
  e.sem = j.at("sem").get<double>();
  e.ci_low = j.at("ci_low").get<double>();
  e.ci_high = j.at("ci_high").get<double>();
  e.confidence_level = j.at("confidence_level").get<double>();
  e.formulation = detail::enum_from_string(j.at("formulation").get<std::string>(),
                                           detail::kFormulations, "formulation");
  e.n_samples = j.at("n_samples").get<std::size_t>();
  e.K = j.at("K").get<std::size_t>();
  e.mode = detail::enum_from_string(j.at("mode").get<std::string>(), detail::kModes, "mode");
  e.seed = j.at("seed").get<std::uint64_t>();
  e.table_seed = j.at("table_seed").get<std::uint64_t>();
  e.ci_method = detail::enum_from_string(j.at("ci_method").get<std::string>(),
                                         detail::kCiMethods, "ci method");
  e.variance = detail::enum_from_string(j.at("variance").get<std::string>(), detail::kVariances,
                                        "variance");
  e.cross_product_samples = j.at("cross_product_samples").get<bool>();
  return e;
}

inline Json to_json(const RunResult& r) {
  Json j;
  j["baseline_risk"] = r.baseline_risk;
  j["estimates"] = Json::array();
  for (const auto& e : r.estimates) j["estimates"].push_back(to_json(e));
  j["config_echo"] = to_json(r.config_echo);
  j["library_version"] = r.library_version;
  return j;
}

inline RunResult run_result_from_json(const Json& j) {
  RunResult r;
  r.baseline_risk = j.at("baseline_risk").get<double>();
  for (const auto& e : j.at("estimates")) r.estimates.push_back(importance_from_json(e));
  r.config_echo = run_config_from_json(j.at("config_echo"));
  r.library_version = j.at("library_version").get<std::string>();
  return r;
}

inline RunResult parse_run_result(std::string_view text) {
  try {
    return run_result_from_json(Json::parse(text));
  } catch (const nlohmann::json::exception& ex) {
    throw IngestionError(std::string("malformed run result JSON: ") + ex.what());
  }
}

inline Json to_json(const CoverageResult& r) {
  Json j;
  j["coverage"] = Json::array();
  for (const auto& e : r.entries) {
    j["coverage"].push_back({{"feature_index", e.feature_index},
                             {"feature_name", e.feature_name},
                             {"formulation", to_string(e.report.formulation)},
                             {"replicates", e.report.replicates},
                             {"hits", e.report.hits},
                             {"coverage", e.report.coverage},
                             {"target_level", e.report.target_level},
                             {"truth", e.report.truth}});
  }
  j["config_echo"] = to_json(r.config_echo);
  j["library_version"] = r.library_version;
  return j;
}

// ---------------------------------------------------------------------------
// Result serialization

enum class OutputFormat { json, csv };

inline constexpr std::string_view kResultCsvHeader =
    "feature,formulation,importance,sem,ci_low,ci_high,level,n_samples,K,seed";
inline constexpr std::string_view kCoverageCsvHeader =
    "feature,formulation,replicates,hits,coverage,level,truth,K,seed";

inline void write_result(const RunResult& result, OutputFormat format, std::ostream& out) {
  if (format == OutputFormat::json) {
    out << to_json(result).dump(2) << '\n';
    return;
  }
  out << kResultCsvHeader << '\n';
  for (const auto& e : result.estimates) {
    out << e.feature_name << ',' << to_string(e.formulation) << ',' << format_double(e.point)
        << ',' << format_double(e.sem) << ',' << format_double(e.ci_low) << ','
        << format_double(e.ci_high) << ',' << format_double(e.confidence_level) << ','
        << e.n_samples << ',' << e.K << ',' << e.seed << '\n';
  }
}

inline void write_result(const CoverageResult& result, OutputFormat format, std::ostream& out) {
  if (format == OutputFormat::json) {
    out << to_json(result).dump(2) << '\n';
    return;
  }
  out << kCoverageCsvHeader << '\n';
  for (const auto& e : result.entries) {
    out << e.feature_name << ',' << to_string(e.report.formulation) << ',' << e.report.replicates
        << ',' << e.report.hits << ',' << format_double(e.report.coverage) << ','
        << format_double(e.report.target_level) << ',' << format_double(e.report.truth) << ','
        << result.config_echo.K << ',' << result.config_echo.seed << '\n';
  }
}

/// Writes `contents` to `path` through a sibling temporary file and a rename,
/// so a failed run never leaves a partial file behind.
inline void write_file_atomically(const std::filesystem::path& path, std::string_view contents) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("failed writing '" + path.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot write '" + path.string() + "': " + ec.message());
  }
}

template <typename Result>
void write_result(const Result& result, OutputFormat format, const std::filesystem::path& path) {
  std::ostringstream buffer;
  write_result(result, format, buffer);
  write_file_atomically(path, buffer.str());
}

}  // namespace ablate
