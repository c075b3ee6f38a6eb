#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spanopt/baselines.hpp"
#include "spanopt/config.hpp"
#include "spanopt/datasets.hpp"
#include "spanopt/span_core.hpp"

namespace spanopt {

struct DatasetSpec {
  enum class Kind { Libsvm, SyntheticLogistic, SyntheticQuadratic };
  Kind kind = Kind::SyntheticQuadratic;

  std::filesystem::path path;  // libsvm
  double positive_label = 1.0;
  double negative_label = -1.0;
  bool normalize = true;
  std::size_t feature_subsample = 0;  // 0 keeps every column

  ClassificationSpec synthetic;  // synthetic_logistic
  std::vector<double> spectrum;  // synthetic_quadratic
};

struct MethodSpec {
  std::string name;  // label used for the CSV file and plot column
  bool is_span = true;
  SpanConfig span;
  BaselineConfig baseline;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  ObjectiveConfig objective;
  std::vector<MethodSpec> methods;
  std::size_t preiterate_svrg_epochs = 2;
  double preiterate_svrg_eta = 0.5;
  std::size_t preiterate_svrg_batch = 1;
  double init_value = 0.0;  // every coordinate of the raw initializer
  bool probe_hessian_error = false;
  std::filesystem::path output_dir = "bench_out";
  std::uint64_t seed = 0;

  /// Throws ConfigError on missing or malformed keys and on keys nobody reads.
  static ExperimentConfig from_config(const KeyValueConfig& kv);
  static ExperimentConfig load(const std::filesystem::path& path);
  void validate() const;
};

/// Objective over the configured data; the dataset is built once and shared.
Objective build_objective(const ExperimentConfig& cfg);

/// Start point shared by every method: the constant initializer (zeros by
/// default) followed by the configured SVRG warm-up epochs.
Vector initial_point(const ExperimentConfig& cfg, const Objective& objective);

struct MethodOutcome {
  std::string name;
  bool ok = false;
  std::string error;
  RunResult result;
};

struct ExperimentResult {
  Vector x0;
  std::vector<MethodOutcome> methods;
  bool all_ok() const;
};

/// Runs every method sequentially from the same x0, writes
/// <output_dir>/<name>.csv for each method that finished and summary.csv.
/// Method failures are recorded, not thrown.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

void write_summary_csv(std::ostream& out, const ExperimentResult& result);

enum class PlotMode { LossVsTime, LossVsIter, HessianErr };
PlotMode parse_plot_mode(std::string_view name);

struct NamedTrace {
  std::string name;
  std::vector<TraceRecord> trace;
};

/// One table with a shared abscissa and one column per trace. Loss-vs-time
/// rows are the union of time stamps, each column carrying its last value
/// forward (empty before its first record). In hessian_err mode traces without
/// any probed value are dropped and named in `warnings`; if none remain the
/// call throws IncompatibleTraces. `suboptimality` subtracts the best loss seen
/// in any trace.
void emit_plot_data(std::ostream& out, const std::vector<NamedTrace>& traces, PlotMode mode,
                    bool suboptimality, std::vector<std::string>* warnings = nullptr);

struct ScalingConfig {
  std::size_t m = 10;
  std::size_t l = 20;
  std::size_t q = 2;
  std::size_t steps = 20;
  std::size_t warmup = 2;
  std::size_t newsamp_cap = 400;
  double spectrum_lo = 1.0;
  double spectrum_hi = 100.0;
  std::uint64_t seed = 0;
  HvpMode hvp{HvpKind::FiniteDifference};

  static ScalingConfig from_config(const KeyValueConfig& kv);
};

struct ScalingRow {
  std::size_t d = 0;
  double span_step_s = 0.0;
  std::optional<double> newsamp_step_s;  // absent above newsamp_cap
};

/// Mean per-step seconds of SPAN and NewSamp on geometric-spectrum quadratics,
/// warm-up steps excluded.
std::vector<ScalingRow> per_iteration_scaling(const std::vector<std::size_t>& dims,
                                              const ScalingConfig& cfg);
void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows);

}  // namespace spanopt
