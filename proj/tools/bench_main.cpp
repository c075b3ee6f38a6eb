// bench: run SPAN and baseline experiments, emit plot tables, time scaling.
//
//   bench run <config>
//   bench plot <mode> <csv...> -o <file> [--suboptimality]
//   bench scale --dims 100,400,1600 <config>
//
// Exit codes: 0 ok, 1 config or input error, 2 a method failed.

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <iostream>

#include "spanopt/bench.hpp"
#include "spanopt/error.hpp"
#include "spanopt/parallel.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 1;
constexpr int kMethodFailure = 2;

void apply_thread_env() {
  const char* env = std::getenv("BENCH_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) {
    std::cerr << "bench: ignoring BENCH_THREADS='" << env << "'\n";
    return;
  }
  spanopt::set_max_threads(static_cast<unsigned>(n));
}

int cmd_run(const std::string& config_path) {
  const auto cfg = spanopt::ExperimentConfig::load(config_path);
  const auto result = spanopt::run_experiment(cfg);
  spanopt::write_summary_csv(std::cout, result);
  for (const auto& m : result.methods)
    if (!m.ok) std::cerr << "bench: method " << m.name << " failed: " << m.error << '\n';
  return result.all_ok() ? kOk : kMethodFailure;
}

int cmd_plot(const std::string& mode, const std::vector<std::string>& csvs, const std::string& out_path,
             bool suboptimality) {
  std::vector<spanopt::NamedTrace> traces;
  for (const auto& p : csvs) {
    const std::filesystem::path path(p);
    traces.push_back({path.stem().string(), spanopt::read_trace_csv(path)});
  }
  std::ofstream out(out_path);
  if (!out) throw spanopt::Error(spanopt::Errc::ConfigError, "cannot write " + out_path);
  std::vector<std::string> warnings;
  spanopt::emit_plot_data(out, traces, spanopt::parse_plot_mode(mode), suboptimality, &warnings);
  for (const auto& w : warnings) std::cerr << "bench: warning: " << w << '\n';
  return kOk;
}

int cmd_scale(const std::string& dims_text, const std::string& config_path) {
  std::vector<std::size_t> dims;
  std::stringstream ss(dims_text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      std::size_t pos = 0;
      dims.push_back(std::stoul(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw spanopt::Error(spanopt::Errc::ConfigError, "--dims: bad entry '" + item + "'");
    }
  }
  if (dims.empty()) throw spanopt::Error(spanopt::Errc::ConfigError, "--dims is empty");
  const auto cfg = spanopt::ScalingConfig::from_config(spanopt::KeyValueConfig::load(config_path));
  const auto rows = spanopt::per_iteration_scaling(dims, cfg);
  spanopt::write_scaling_csv(std::cout, rows);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SPAN optimizer benchmark runner"};
  app.require_subcommand(1);

  std::string run_config;
  auto* run = app.add_subcommand("run", "Run the methods listed in a config file");
  run->add_option("config", run_config, "Experiment config")->required();

  std::string plot_mode, plot_out;
  std::vector<std::string> plot_csvs;
  bool suboptimality = false;
  auto* plot = app.add_subcommand("plot", "Align trace CSVs into one plot table");
  plot->add_option("mode", plot_mode, "loss_vs_time, loss_vs_iter or hessian_err")->required();
  plot->add_option("csv", plot_csvs, "Trace CSV files")->required();
  plot->add_option("-o,--output", plot_out, "Output table")->required();
  plot->add_flag("--suboptimality", suboptimality, "Subtract the best loss across traces");

  std::string dims, scale_config;
  auto* scale = app.add_subcommand("scale", "Per-iteration time of SPAN and NewSamp versus d");
  scale->add_option("--dims", dims, "Comma-separated dimensions")->required();
  scale->add_option("config", scale_config, "Scaling config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfigError;
  }

  apply_thread_env();
  try {
    if (*run) return cmd_run(run_config);
    if (*plot) return cmd_plot(plot_mode, plot_csvs, plot_out, suboptimality);
    return cmd_scale(dims, scale_config);
  } catch (const spanopt::Error& e) {
    std::cerr << "bench: " << e.what() << '\n';
    const auto c = e.code();
    const bool input_error = c == spanopt::Errc::ConfigError || c == spanopt::Errc::ParseError ||
                             c == spanopt::Errc::IncompatibleTraces ||
                             c == spanopt::Errc::NoMatchingExamples || c == spanopt::Errc::InvalidArgument;
    return input_error ? kConfigError : kMethodFailure;
  } catch (const std::exception& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return kConfigError;
  }
}
