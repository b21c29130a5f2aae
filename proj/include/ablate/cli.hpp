#pragma once

// The ablate-ci command line: load -> fit or attach model -> estimate every
// feature -> report. Exit codes: 0 success, 1 user error, 2 model contract or
// protocol error.

#include <chrono>
#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <CLI11.hpp>

#include "ablate/error.hpp"
#include "ablate/format.hpp"
#include "ablate/io.hpp"
#include "ablate/model_spec.hpp"
#include "ablate/pipeline.hpp"
#include "ablate/version.hpp"

namespace ablate {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUserError = 1;
inline constexpr int kExitModelError = 2;

/// `squared`, `absolute`, `zero_one[:t=<x>]` or `log_loss[:eps=<x>]`.
inline LossSpec parse_loss_spec(std::string_view text) {
  const auto colon = text.find(':');
  const std::string_view name = text.substr(0, colon);
  const std::optional<std::string_view> option =
      colon == std::string_view::npos ? std::nullopt : std::optional(text.substr(colon + 1));
  LossSpec loss;
  auto numeric_option = [&](std::string_view key) {
    const auto eq = option->find('=');
    if (eq == std::string_view::npos || option->substr(0, eq) != key) {
      throw InvalidArgument("unknown option '" + std::string(*option) + "' for loss " +
                            std::string(name));
    }
    const auto v = parse_finite_double(option->substr(eq + 1));
    if (!v) throw InvalidArgument("bad numeric value in loss '" + std::string(text) + "'");
    return *v;
  };
  if (name == "squared" || name == "absolute") {
    loss.kind = name == "squared" ? LossKind::squared : LossKind::absolute;
    if (option) throw InvalidArgument("loss " + std::string(name) + " takes no options");
  } else if (name == "zero_one") {
    loss.kind = LossKind::zero_one;
    if (option) loss.threshold = numeric_option("t");
  } else if (name == "log_loss") {
    loss.kind = LossKind::log_loss;
    if (option) loss.epsilon = numeric_option("eps");
    if (!(loss.epsilon > 0.0 && loss.epsilon < 0.5)) {
      throw InvalidArgument("log_loss eps must lie in (0, 0.5)");
    }
  } else {
    throw InvalidArgument("unknown loss '" + std::string(text) + "'");
  }
  return loss;
}

namespace detail {

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    std::string item(trim(std::string_view(text).substr(start, comma - start)));
    if (item.empty()) throw InvalidArgument("empty name in --features list");
    out.push_back(std::move(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Runs the CLI. Results go to `out` unless --out is given; diagnostics go
/// to `err`.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Randomized-ablation feature importance with confidence intervals", "ablate-ci"};
  app.set_version_flag("--version", std::string(kLibraryVersion));

  std::string data_path, target, features, model_text = "builtin:ols", loss_text = "squared";
  std::string mode_text = "resample", formulation_text = "both", ci_text = "t";
  std::string variance_text = "mle", out_path, format_text = "csv";
  std::size_t K = 30;
  double level = 0.95;
  std::uint64_t seed = 0;
  std::optional<std::size_t> coverage;
  bool serial = false;
  double batch_timeout = 60.0;
  std::size_t threads = 1;

  app.add_option("--data", data_path, "CSV file with a header row")->required();
  app.add_option("--target", target, "Target column name")->required();
  app.add_option("--features", features, "Comma-separated feature columns (default: all others)");
  app.add_option("--model", model_text,
                 "builtin:constant[:v=<x>] | builtin:ols[:lambda=<x>] | builtin:knn[:k=<n>] | "
                 "exec:<command>")
      ->capture_default_str();
  app.add_option("--loss", loss_text, "squared | absolute | zero_one[:t=<x>] | log_loss")
      ->capture_default_str();
  app.add_option("--K", K, "Ablation replicates per row")->capture_default_str();
  app.add_option("--mode", mode_text, "resample | permute | exact")
      ->check(CLI::IsMember({"resample", "permute", "exact"}))
      ->capture_default_str();
  app.add_option("--formulation", formulation_text, "rv | fd | both")
      ->check(CLI::IsMember({"rv", "fd", "both"}))
      ->capture_default_str();
  app.add_option("--level", level, "Confidence level")->capture_default_str();
  app.add_option("--ci-method", ci_text, "t | normal")
      ->check(CLI::IsMember({"t", "normal"}))
      ->capture_default_str();
  app.add_option("--variance", variance_text, "mle | unbiased (mle is the default)")
      ->check(CLI::IsMember({"mle", "unbiased"}))
      ->capture_default_str();
  app.add_option("--seed", seed, "Master seed")->capture_default_str();
  app.add_option("--out", out_path, "Output file (default: stdout)");
  app.add_option("--format", format_text, "json | csv")
      ->check(CLI::IsMember({"json", "csv"}))
      ->capture_default_str();
  app.add_option("--coverage", coverage,
                 "Run a coverage simulation with this many replicates instead");
  app.add_flag("--serial", serial, "Never send concurrent batches to the model");
  app.add_option("--batch-timeout", batch_timeout, "Seconds to wait for an external model batch")
      ->capture_default_str();
  app.add_option("--threads", threads, "Worker threads (results do not depend on it)")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUserError;
  }

  try {
    RunConfig config;
    config.data_path = data_path;
    config.target_column = target;
    if (!features.empty()) config.feature_columns = detail::split_list(features);
    config.model = parse_model_spec(model_text);
    if (config.model.kind == ModelKind::exec) config.model.serial = true;
    config.loss = parse_loss_spec(loss_text);
    config.K = K;
    config.mode = detail::enum_from_string(mode_text, detail::kModes, "mode");
    config.formulation =
        detail::enum_from_string(formulation_text, detail::kFormulationChoices, "formulation");
    config.confidence_level = level;
    config.ci_method = ci_text == "t" ? CiMethod::student_t : CiMethod::normal;
    config.variance = variance_text == "mle" ? VarianceKind::mle : VarianceKind::unbiased;
    config.seed = seed;
    config.validate();
    if (!(batch_timeout > 0.0)) throw InvalidArgument("--batch-timeout must be positive");
    if (coverage && config.mode == AblationMode::exact) {
      throw InvalidArgument("--coverage needs --mode resample or permute");
    }
    const OutputFormat format = format_text == "json" ? OutputFormat::json : OutputFormat::csv;

    const Dataset data = load_csv(config.data_path, config.target_column, config.feature_columns);
    const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(batch_timeout * 1000));
    const std::unique_ptr<Model> model = make_model(config.model, data, timeout);
    const EngineOptions engine{serial ? 1 : std::max<std::size_t>(1, threads), 4096};

    std::ostringstream buffer;
    if (coverage) {
      write_result(estimate_coverage(*model, data, config, *coverage, engine), format, buffer);
    } else {
      write_result(estimate_importances(*model, data, config, engine), format, buffer);
    }
    if (auto* exec = dynamic_cast<ExecModel*>(model.get())) exec->shutdown();

    if (out_path.empty()) {
      out << buffer.str();
      out.flush();
    } else {
      write_file_atomically(out_path, buffer.str());
    }
    return kExitOk;
  } catch (const ModelContractError& e) {
    err << "ablate-ci: model error: " << e.what() << '\n';
    return kExitModelError;
  } catch (const IngestionError& e) {
    err << "ablate-ci: input error: " << e.what() << '\n';
    return kExitUserError;
  } catch (const SingularFit& e) {
    err << "ablate-ci: model fit error: " << e.what() << '\n';
    return kExitUserError;
  } catch (const Error& e) {
    err << "ablate-ci: error: " << e.what() << '\n';
    return kExitUserError;
  } catch (const std::exception& e) {
    err << "ablate-ci: internal error: " << e.what() << '\n';
    return kExitUserError;
  }
}

}  // namespace ablate
