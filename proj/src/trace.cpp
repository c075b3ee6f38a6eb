#include "spanopt/trace.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "spanopt/error.hpp"

namespace spanopt {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace) {
    out << r.iteration << ',' << format_double(r.wall_clock_s) << ',' << format_double(r.loss)
        << ',' << format_double(r.grad_norm) << ',';
    if (r.hessian_err) out << format_double(*r.hessian_err);
    out << ',';
    if (r.lambda_used) out << format_double(*r.lambda_used);
    out << '\n';
  }
}

void write_trace_csv(const std::filesystem::path& path, const std::vector<TraceRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::ConfigError, "cannot write " + path.string());
  write_trace_csv(out, trace);
}

namespace {

double parse_cell(const std::string& cell, std::size_t line_no) {
  double v = 0.0;
  const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
  if (res.ec != std::errc() || res.ptr != cell.data() + cell.size()) {
    throw Error(Errc::IncompatibleTraces,
                "trace line " + std::to_string(line_no) + ": bad number '" + cell + "'");
  }
  return v;
}

}  // namespace

std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::IncompatibleTraces, "trace: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw Error(Errc::IncompatibleTraces, "trace: unexpected header");

  std::vector<TraceRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    if (cells.size() != 6) {
      throw Error(Errc::IncompatibleTraces, "trace line " + std::to_string(line_no) + ": expected 6 cells");
    }
    TraceRecord r;
    r.iteration = static_cast<std::size_t>(parse_cell(cells[0], line_no));
    r.wall_clock_s = parse_cell(cells[1], line_no);
    r.loss = parse_cell(cells[2], line_no);
    r.grad_norm = parse_cell(cells[3], line_no);
    if (!cells[4].empty()) r.hessian_err = parse_cell(cells[4], line_no);
    if (!cells[5].empty()) r.lambda_used = parse_cell(cells[5], line_no);
    out.push_back(r);
  }
  return out;
}

std::vector<TraceRecord> read_trace_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IncompatibleTraces, "cannot read " + path.string());
  return read_trace_csv(in);
}

}  // namespace spanopt
