#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <vector>

#include "spanopt/linalg.hpp"

namespace spanopt {

/// One row of an optimizer trace, recorded after each step.
struct TraceRecord {
  std::size_t iteration = 0;
  double wall_clock_s = 0.0;  // cumulative, optimizer work only
  double loss = 0.0;          // F(x_{t+1})
  double grad_norm = 0.0;     // ‖∇F(x_{t+1})‖
  std::optional<double> hessian_err;
  std::optional<double> lambda_used;
};

struct RunResult {
  Vector x;
  std::vector<TraceRecord> trace;
};

inline constexpr std::string_view kTraceHeader =
    "iteration,wall_clock_s,loss,grad_norm,hessian_err,lambda_used";

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);
void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& trace);

/// Throws IncompatibleTraces on a header or row that does not match the schema.
std::vector<TraceRecord> read_trace_csv(std::istream& in);
std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path);

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

}  // namespace spanopt
