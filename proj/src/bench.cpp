#include "spanopt/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "spanopt/error.hpp"
#include "spanopt/random.hpp"

namespace spanopt {

namespace {

[[noreturn]] void config_error(const std::string& what) { throw Error(Errc::ConfigError, what); }

template <class T>
T require(const std::optional<T>& v, const std::string& key) {
  if (!v) config_error("missing key " + key);
  return *v;
}

DatasetSpec::Kind parse_dataset_kind(const std::string& s) {
  if (s == "libsvm") return DatasetSpec::Kind::Libsvm;
  if (s == "synthetic_logistic") return DatasetSpec::Kind::SyntheticLogistic;
  if (s == "synthetic_quadratic") return DatasetSpec::Kind::SyntheticQuadratic;
  config_error("dataset.kind must be libsvm, synthetic_logistic or synthetic_quadratic, got '" + s + "'");
}

StepSize parse_step_size(const KeyValueConfig& kv, const std::string& key) {
  const auto raw = kv.get_string(key);
  if (!raw) return StepSize::fixed(1.0);
  if (*raw == "auto") return StepSize::automatic();
  const auto list = kv.get_double_list(key);
  if (list->size() == 1) return StepSize::fixed(list->front());
  return StepSize::from_list(*list);
}

HvpMode parse_hvp(const KeyValueConfig& kv, const std::string& prefix, HvpKind fallback) {
  HvpMode mode;
  mode.kind = fallback;
  if (const auto k = kv.get_string(prefix + "hvp")) {
    if (*k == "fd" || *k == "finite_difference") {
      mode.kind = HvpKind::FiniteDifference;
    } else if (*k == "analytic") {
      mode.kind = HvpKind::Analytic;
    } else {
      config_error(prefix + "hvp must be fd or analytic");
    }
  }
  mode.fd_scale = kv.get_double(prefix + "fd_scale").value_or(mode.fd_scale);
  mode.central = kv.get_bool(prefix + "fd_central").value_or(mode.central);
  return mode;
}

MethodSpec parse_method(const KeyValueConfig& kv, const std::string& name, std::uint64_t seed) {
  const std::string p = name + ".";
  MethodSpec spec;
  spec.name = name;
  const std::string method = kv.get_string(p + "method").value_or(name);
  if (method == "span") {
    SpanConfig& c = spec.span;
    c.iterations = kv.get_size(p + "iterations").value_or(c.iterations);
    c.m = kv.get_size(p + "m").value_or(c.m);
    c.l = kv.get_size(p + "l").value_or(c.l);
    c.q = kv.get_size(p + "q").value_or(c.q);
    c.reorthonormalize = kv.get_bool(p + "reorthonormalize");
    c.batch_size = kv.get_size(p + "batch_size").value_or(0);
    c.eta = parse_step_size(kv, p + "eta");
    c.seed = kv.get_u64(p + "seed").value_or(seed);
    c.grad_tol = kv.get_double(p + "grad_tol").value_or(0.0);
    c.hvp = parse_hvp(kv, p, HvpKind::FiniteDifference);
    return spec;
  }
  spec.is_span = false;
  BaselineConfig& c = spec.baseline;
  try {
    c.method = parse_baseline_method(method);
  } catch (const Error&) {
    config_error(p + "method: unknown method '" + method + "'");
  }
  c.iterations = kv.get_size(p + "iterations").value_or(c.iterations);
  c.eta = kv.get_double(p + "eta").value_or(c.eta);
  c.batch_size = kv.get_size(p + "batch_size");
  c.rank_m = kv.get_size(p + "m").value_or(c.rank_m);
  c.inner_steps = kv.get_size(p + "inner_steps").value_or(c.inner_steps);
  c.repetitions = kv.get_size(p + "repetitions").value_or(c.repetitions);
  c.lissa_margin = kv.get_double(p + "margin").value_or(c.lissa_margin);
  c.seed = kv.get_u64(p + "seed").value_or(seed);
  c.grad_tol = kv.get_double(p + "grad_tol").value_or(0.0);
  c.hvp = parse_hvp(kv, p, HvpKind::Analytic);
  if (c.method == BaselineMethod::Lissa && c.inner_steps == 0) c.inner_steps = 20;
  return spec;
}

std::vector<double> parse_spectrum(const KeyValueConfig& kv) {
  if (auto list = kv.get_double_list("dataset.spectrum")) return *list;
  const std::string shape = kv.get_string("dataset.spectrum_kind").value_or("geometric");
  const std::size_t d = require(kv.get_size("dataset.d"), "dataset.d");
  const double lo = kv.get_double("dataset.spectrum_min").value_or(1.0);
  const double hi = kv.get_double("dataset.spectrum_max").value_or(100.0);
  if (!(lo > 0.0) || !(hi >= lo)) config_error("need 0 < dataset.spectrum_min <= dataset.spectrum_max");
  if (shape == "geometric") return geometric_spectrum(d, lo, hi);
  if (shape == "linear") return linear_spectrum(d, lo, hi);
  config_error("dataset.spectrum_kind must be geometric or linear");
}

double last_time(const std::vector<TraceRecord>& trace) {
  return trace.empty() ? 0.0 : trace.back().wall_clock_s;
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& kv) {
  ExperimentConfig cfg;
  cfg.seed = kv.get_u64("seed").value_or(0);
  cfg.output_dir = kv.get_string("output_dir").value_or("bench_out");
  cfg.probe_hessian_error = kv.get_bool("probe_hessian_error").value_or(false);
  cfg.preiterate_svrg_epochs = kv.get_size("preiterate.svrg_epochs").value_or(2);
  cfg.preiterate_svrg_eta = kv.get_double("preiterate.svrg_eta").value_or(0.5);
  cfg.preiterate_svrg_batch = kv.get_size("preiterate.svrg_batch").value_or(1);
  cfg.init_value = kv.get_double("init_value").value_or(0.0);

  DatasetSpec& ds = cfg.dataset;
  ds.kind = parse_dataset_kind(require(kv.get_string("dataset.kind"), "dataset.kind"));
  switch (ds.kind) {
    case DatasetSpec::Kind::Libsvm:
      ds.path = require(kv.get_string("dataset.path"), "dataset.path");
      ds.positive_label = kv.get_double("dataset.positive_label").value_or(1.0);
      ds.negative_label = kv.get_double("dataset.negative_label").value_or(-1.0);
      ds.normalize = kv.get_bool("dataset.normalize").value_or(true);
      ds.feature_subsample = kv.get_size("dataset.feature_subsample").value_or(0);
      break;
    case DatasetSpec::Kind::SyntheticLogistic: {
      ClassificationSpec& s = ds.synthetic;
      s.n = kv.get_size("dataset.n").value_or(s.n);
      s.d = kv.get_size("dataset.d").value_or(s.d);
      s.rank = kv.get_size("dataset.rank").value_or(s.rank);
      s.decay = kv.get_double("dataset.decay").value_or(s.decay);
      s.noise = kv.get_double("dataset.noise").value_or(s.noise);
      s.label_noise = kv.get_double("dataset.label_noise").value_or(s.label_noise);
      s.seed = kv.get_u64("dataset.seed").value_or(cfg.seed);
      break;
    }
    case DatasetSpec::Kind::SyntheticQuadratic:
      ds.spectrum = parse_spectrum(kv);
      break;
  }

  const bool quadratic = ds.kind == DatasetSpec::Kind::SyntheticQuadratic;
  const std::string loss = kv.get_string("objective.loss").value_or(quadratic ? "quadratic" : "logistic");
  cfg.objective.loss = parse_loss_kind(loss);
  if (quadratic != (cfg.objective.loss == LossKind::Quadratic)) {
    config_error("objective.loss = quadratic goes with dataset.kind = synthetic_quadratic only");
  }
  cfg.objective.reg_a = kv.get_double("objective.reg_a").value_or(0.0);
  if (quadratic) cfg.objective.quadratic_spectrum = ds.spectrum;

  const auto names = require(kv.get_list("methods"), "methods");
  std::set<std::string> seen;
  for (const auto& name : names) {
    if (!seen.insert(name).second) config_error("method '" + name + "' listed twice");
    cfg.methods.push_back(parse_method(kv, name, cfg.seed));
  }
  // Sections for methods not listed are still parsed, so a typo in them is caught.
  for (const auto& key : kv.unused_keys()) {
    const auto dot = key.find('.');
    if (dot == std::string::npos) continue;
    const std::string section = key.substr(0, dot);
    if (section == "dataset" || section == "objective" || section == "preiterate") continue;
    if (seen.insert(section).second) parse_method(kv, section, cfg.seed);
  }

  if (const auto unused = kv.unused_keys(); !unused.empty()) {
    std::string list;
    for (const auto& k : unused) list += (list.empty() ? "" : ", ") + k;
    config_error("unrecognized keys: " + list);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_config(KeyValueConfig::load(path));
}

void ExperimentConfig::validate() const {
  if (methods.empty()) config_error("at least one method is required");
  if (output_dir.empty()) config_error("output_dir is empty");
  if (preiterate_svrg_epochs > 0 && !(preiterate_svrg_eta > 0.0)) {
    config_error("preiterate.svrg_eta must be positive");
  }
  if (preiterate_svrg_batch == 0) config_error("preiterate.svrg_batch must be >= 1");
  if (!std::isfinite(init_value)) config_error("init_value must be finite");
  try {
    objective.validate();
  } catch (const Error& e) {
    config_error(e.what());
  }
}

// ---------------------------------------------------------------------------
// Experiment

Objective build_objective(const ExperimentConfig& cfg) {
  if (cfg.dataset.kind == DatasetSpec::Kind::SyntheticQuadratic) {
    return Objective(cfg.objective, nullptr);
  }
  Dataset ds;
  if (cfg.dataset.kind == DatasetSpec::Kind::SyntheticLogistic) {
    ds = synth_classification(cfg.dataset.synthetic);
  } else {
    ds = to_binary_dataset(load_libsvm(cfg.dataset.path), cfg.dataset.positive_label,
                           cfg.dataset.negative_label);
    if (cfg.dataset.feature_subsample > 0) {
      ds = subsample_features(ds, cfg.dataset.feature_subsample, derive_seed(cfg.seed, 0xfea7));
    }
    if (cfg.dataset.normalize) ds = normalize_rows(std::move(ds)).data;
  }
  return Objective(cfg.objective, std::make_shared<const Dataset>(std::move(ds)));
}

Vector initial_point(const ExperimentConfig& cfg, const Objective& objective) {
  const Vector start(objective.dim(), cfg.init_value);
  if (cfg.preiterate_svrg_epochs == 0) return start;
  BaselineConfig svrg;
  svrg.method = BaselineMethod::Svrg;
  svrg.eta = cfg.preiterate_svrg_eta;
  svrg.iterations = cfg.preiterate_svrg_epochs;
  svrg.batch_size = std::min(cfg.preiterate_svrg_batch, objective.num_terms());
  svrg.seed = derive_seed(cfg.seed, 0x5f5);
  return run_svrg(svrg, objective, start).x;
}

bool ExperimentResult::all_ok() const {
  return std::all_of(methods.begin(), methods.end(), [](const MethodOutcome& m) { return m.ok; });
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec) config_error("cannot create output_dir " + cfg.output_dir.string() + ": " + ec.message());

  const Objective objective = build_objective(cfg);
  ExperimentResult out;
  out.x0 = initial_point(cfg, objective);

  for (const MethodSpec& spec : cfg.methods) {
    MethodOutcome outcome;
    outcome.name = spec.name;
    const Vector x0 = out.x0;
    if (std::memcmp(x0.data(), out.x0.data(), x0.size() * sizeof(double)) != 0) {
      throw Error(Errc::InvalidArgument, "start point copy differs for " + spec.name);
    }
    try {
      if (spec.is_span) {
        SpanConfig c = spec.span;
        c.probe_hessian_error = c.probe_hessian_error || cfg.probe_hessian_error;
        outcome.result = run_span(c, objective, x0);
      } else {
        BaselineConfig c = spec.baseline;
        c.probe_hessian_error = c.probe_hessian_error || cfg.probe_hessian_error;
        outcome.result = run_baseline(c, objective, x0);
      }
      outcome.ok = true;
      write_trace_csv(cfg.output_dir / (spec.name + ".csv"), outcome.result.trace);
    } catch (const std::exception& e) {
      outcome.ok = false;
      outcome.error = e.what();
    }
    out.methods.push_back(std::move(outcome));
  }

  std::ofstream summary(cfg.output_dir / "summary.csv");
  if (!summary) config_error("cannot write summary to " + cfg.output_dir.string());
  write_summary_csv(summary, out);
  return out;
}

void write_summary_csv(std::ostream& out, const ExperimentResult& result) {
  out << "method,status,iterations,final_loss,final_grad_norm,total_seconds,error\n";
  for (const auto& m : result.methods) {
    out << m.name << ',' << (m.ok ? "ok" : "failed") << ',';
    const auto& tr = m.result.trace;
    if (m.ok) {
      out << tr.size() << ',';
      if (!tr.empty()) {
        out << format_double(tr.back().loss) << ',' << format_double(tr.back().grad_norm);
      } else {
        out << ',';
      }
      out << ',' << format_double(last_time(tr)) << ',';
    } else {
      std::string msg = m.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << ",,,," << msg;
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Plot data

PlotMode parse_plot_mode(std::string_view name) {
  if (name == "loss_vs_time") return PlotMode::LossVsTime;
  if (name == "loss_vs_iter") return PlotMode::LossVsIter;
  if (name == "hessian_err") return PlotMode::HessianErr;
  throw Error(Errc::ConfigError, "plot mode must be loss_vs_time, loss_vs_iter or hessian_err");
}

void emit_plot_data(std::ostream& out, const std::vector<NamedTrace>& traces, PlotMode mode,
                    bool suboptimality, std::vector<std::string>* warnings) {
  if (traces.empty()) throw Error(Errc::IncompatibleTraces, "no traces given");

  std::vector<const NamedTrace*> cols;
  for (const auto& t : traces) {
    if (mode == PlotMode::HessianErr) {
      const bool probed = std::any_of(t.trace.begin(), t.trace.end(),
                                      [](const TraceRecord& r) { return r.hessian_err.has_value(); });
      if (!probed) {
        if (warnings) warnings->push_back(t.name + ": no hessian_err values, column omitted");
        continue;
      }
    }
    cols.push_back(&t);
  }
  if (cols.empty()) throw Error(Errc::IncompatibleTraces, "no trace carries hessian_err values");

  double best = std::numeric_limits<double>::infinity();
  if (suboptimality && mode != PlotMode::HessianErr) {
    for (const auto* t : cols)
      for (const auto& r : t->trace) best = std::min(best, r.loss);
  }
  const double shift = std::isfinite(best) ? best : 0.0;

  out << (mode == PlotMode::LossVsTime ? "wall_clock_s" : "iteration");
  for (const auto* t : cols) out << ',' << t->name;
  out << '\n';

  if (mode == PlotMode::LossVsTime) {
    std::set<double> stamps;
    for (const auto* t : cols)
      for (const auto& r : t->trace) stamps.insert(r.wall_clock_s);
    std::vector<std::size_t> cursor(cols.size(), 0);
    for (double s : stamps) {
      out << format_double(s);
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const auto& tr = cols[c]->trace;
        while (cursor[c] < tr.size() && tr[cursor[c]].wall_clock_s <= s) ++cursor[c];
        out << ',';
        if (cursor[c] > 0) out << format_double(tr[cursor[c] - 1].loss - shift);
      }
      out << '\n';
    }
    return;
  }

  std::set<std::size_t> iters;
  std::vector<std::map<std::size_t, const TraceRecord*>> by_iter(cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (const auto& r : cols[c]->trace) {
      iters.insert(r.iteration);
      by_iter[c][r.iteration] = &r;
    }
  }
  for (std::size_t it : iters) {
    out << it;
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out << ',';
      const auto found = by_iter[c].find(it);
      if (found == by_iter[c].end()) continue;
      const TraceRecord& r = *found->second;
      if (mode == PlotMode::LossVsIter) {
        out << format_double(r.loss - shift);
      } else if (r.hessian_err) {
        out << format_double(*r.hessian_err);
      }
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Scaling report

ScalingConfig ScalingConfig::from_config(const KeyValueConfig& kv) {
  ScalingConfig c;
  c.m = kv.get_size("scale.m").value_or(c.m);
  c.l = kv.get_size("scale.l").value_or(c.l);
  c.q = kv.get_size("scale.q").value_or(c.q);
  c.steps = kv.get_size("scale.steps").value_or(c.steps);
  c.warmup = kv.get_size("scale.warmup").value_or(c.warmup);
  c.newsamp_cap = kv.get_size("scale.newsamp_cap").value_or(c.newsamp_cap);
  c.spectrum_lo = kv.get_double("scale.spectrum_min").value_or(c.spectrum_lo);
  c.spectrum_hi = kv.get_double("scale.spectrum_max").value_or(c.spectrum_hi);
  c.seed = kv.get_u64("seed").value_or(c.seed);
  c.hvp = parse_hvp(kv, "scale.", HvpKind::FiniteDifference);
  if (const auto unused = kv.unused_keys(); !unused.empty()) {
    config_error("unrecognized key for scale: " + unused.front());
  }
  if (c.steps < 20) config_error("scale.steps must be at least 20");
  return c;
}

namespace {

double mean_step_seconds(const std::vector<TraceRecord>& trace, std::size_t warmup) {
  if (trace.size() <= warmup) throw Error(Errc::NoConvergence, "scaling: run stopped before timing");
  const double start = warmup == 0 ? 0.0 : trace[warmup - 1].wall_clock_s;
  return (trace.back().wall_clock_s - start) / static_cast<double>(trace.size() - warmup);
}

}  // namespace

std::vector<ScalingRow> per_iteration_scaling(const std::vector<std::size_t>& dims,
                                              const ScalingConfig& cfg) {
  std::vector<ScalingRow> rows;
  for (std::size_t d : dims) {
    const Objective objective = Objective::quadratic(geometric_spectrum(d, cfg.spectrum_lo, cfg.spectrum_hi));
    const Vector x0(d, 1.0);
    ScalingRow row;
    row.d = d;

    SpanConfig span;
    span.iterations = cfg.warmup + cfg.steps;
    span.m = cfg.m;
    span.l = cfg.l;
    span.q = cfg.q;
    span.eta = StepSize::fixed(0.5);
    span.seed = cfg.seed;
    span.hvp = cfg.hvp;
    row.span_step_s = mean_step_seconds(run_span(span, objective, x0).trace, cfg.warmup);

    if (d <= cfg.newsamp_cap) {
      BaselineConfig ns;
      ns.method = BaselineMethod::NewSamp;
      ns.iterations = cfg.warmup + cfg.steps;
      ns.rank_m = cfg.m;
      ns.eta = 0.5;
      ns.seed = cfg.seed;
      row.newsamp_step_s = mean_step_seconds(run_newsamp(ns, objective, x0).trace, cfg.warmup);
    }
    rows.push_back(row);
  }
  return rows;
}

void write_scaling_csv(std::ostream& out, const std::vector<ScalingRow>& rows) {
  out << "d,span_step_s,newsamp_step_s\n";
  for (const auto& r : rows) {
    out << r.d << ',' << format_double(r.span_step_s) << ',';
    if (r.newsamp_step_s) out << format_double(*r.newsamp_step_s);
    out << '\n';
  }
}

}  // namespace spanopt
