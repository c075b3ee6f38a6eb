#include "spanopt/datasets.hpp"

#include <zlib.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "spanopt/error.hpp"
#include "spanopt/random.hpp"
#include "spanopt/trace.hpp"

namespace spanopt {

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw Error(Errc::ParseError, "line " + std::to_string(line) + ": " + what);
}

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n'; }

double parse_number(std::string_view tok, std::size_t line) {
  double v = 0.0;
  // from_chars rejects a leading '+', which LIBSVM labels commonly carry.
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    parse_fail(line, "not a number: '" + std::string(tok) + "'");
  }
  return v;
}

std::size_t parse_index(std::string_view tok, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || v == 0) {
    parse_fail(line, "bad feature index '" + std::string(tok) + "'");
  }
  return v;
}

std::string read_gzip(const std::filesystem::path& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw Error(Errc::ParseError, "cannot open " + path.string());
  std::string out;
  char buf[1 << 16];
  int got;
  while ((got = gzread(f, buf, sizeof buf)) > 0) out.append(buf, static_cast<std::size_t>(got));
  const bool failed = got < 0;
  gzclose(f);
  if (failed) throw Error(Errc::ParseError, "gzip read failed: " + path.string());
  return out;
}

}  // namespace

RawDataset parse_libsvm(std::istream& in) {
  RawDataset out;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    std::string_view line(text);
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);

    std::vector<std::string_view> toks;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && is_space(line[i])) ++i;
      const std::size_t start = i;
      while (i < line.size() && !is_space(line[i])) ++i;
      if (i > start) toks.push_back(line.substr(start, i - start));
    }
    if (toks.empty()) continue;

    RawExample ex;
    ex.label = parse_number(toks[0], line_no);
    for (std::size_t k = 1; k < toks.size(); ++k) {
      const auto colon = toks[k].find(':');
      if (colon == std::string_view::npos) parse_fail(line_no, "expected idx:val, got '" + std::string(toks[k]) + "'");
      const std::size_t idx = parse_index(toks[k].substr(0, colon), line_no);
      const double val = parse_number(toks[k].substr(colon + 1), line_no);
      if (!ex.features.empty() && idx <= ex.features.back().first) {
        parse_fail(line_no, "indices must be strictly increasing");
      }
      ex.features.emplace_back(idx, val);
    }
    if (!ex.features.empty()) out.dim = std::max(out.dim, ex.features.back().first);
    out.examples.push_back(std::move(ex));
  }
  return out;
}

RawDataset load_libsvm(const std::filesystem::path& path) {
  if (path.extension() == ".gz") {
    std::istringstream in(read_gzip(path));
    return parse_libsvm(in);
  }
  std::ifstream in(path);
  if (!in) throw Error(Errc::ParseError, "cannot open " + path.string());
  return parse_libsvm(in);
}

void write_libsvm(std::ostream& out, const std::vector<RawExample>& examples) {
  for (const auto& ex : examples) {
    out << format_double(ex.label);
    for (const auto& [idx, val] : ex.features) out << ' ' << idx << ':' << format_double(val);
    out << '\n';
  }
}

Dataset to_binary_dataset(const RawDataset& raw, double positive, double negative, std::size_t dim) {
  if (positive == negative) throw Error(Errc::InvalidArgument, "label pair must differ");
  std::vector<const RawExample*> kept;
  for (const auto& ex : raw.examples)
    if (ex.label == positive || ex.label == negative) kept.push_back(&ex);
  if (kept.empty()) {
    throw Error(Errc::NoMatchingExamples, "no example carries label " + format_double(positive) +
                                              " or " + format_double(negative));
  }
  if (dim == 0) dim = raw.dim;
  Dataset ds;
  ds.features = DenseMatrix(kept.size(), dim);
  ds.labels.resize(kept.size());
  for (std::size_t r = 0; r < kept.size(); ++r) {
    ds.labels[r] = kept[r]->label == positive ? 1.0 : -1.0;
    for (const auto& [idx, val] : kept[r]->features) {
      if (idx > dim) continue;  // column outside a requested narrower width
      ds.features(r, idx - 1) = val;
    }
  }
  return ds;
}

NormalizedDataset normalize_rows(Dataset ds) {
  NormalizedDataset out;
  for (std::size_t i = 0; i < ds.n_samples(); ++i) {
    auto row = ds.features.row(i);
    const double n = norm2(row);
    if (n == 0.0) {
      ++out.zero_rows;
      continue;
    }
    for (double& v : row) v /= n;
  }
  ds.normalized = true;
  out.data = std::move(ds);
  return out;
}

SyntheticQuadratic synth_quadratic(std::vector<double> spectrum, std::uint64_t) {
  SyntheticQuadratic out;
  out.config.loss = LossKind::Quadratic;
  out.config.quadratic_spectrum = std::move(spectrum);
  out.config.validate();
  out.optimum.assign(out.config.quadratic_spectrum.size(), 0.0);
  return out;
}

std::vector<double> linear_spectrum(std::size_t d, double lo, double hi) {
  std::vector<double> s(d, hi);
  for (std::size_t i = 0; i < d && d > 1; ++i)
    s[i] = hi - (hi - lo) * static_cast<double>(i) / static_cast<double>(d - 1);
  return s;
}

std::vector<double> geometric_spectrum(std::size_t d, double lo, double hi) {
  std::vector<double> s(d, hi);
  if (d > 1) {
    const double r = std::pow(lo / hi, 1.0 / static_cast<double>(d - 1));
    for (std::size_t i = 1; i < d; ++i) s[i] = s[i - 1] * r;
    s.back() = lo;
  }
  return s;
}

Dataset subsample_features(const Dataset& ds, std::size_t k, std::uint64_t seed) {
  const std::size_t d = ds.dim();
  if (k == 0 || k > d) throw Error(Errc::InvalidArgument, "subsample_features: need 1 <= k <= d");
  Dataset out;
  for (std::size_t attempt = 0; attempt < 20; ++attempt) {
    Rng rng(derive_seed(seed, attempt));
    const BatchIndex cols = sample_batch(d, k, rng);
    out = Dataset{};
    out.features = DenseMatrix(ds.n_samples(), k);
    out.labels = ds.labels;
    std::size_t zero = 0;
    for (std::size_t r = 0; r < ds.n_samples(); ++r) {
      bool any = false;
      for (std::size_t c = 0; c < k; ++c) {
        out.features(r, c) = ds.features(r, cols.indices[c]);
        any = any || out.features(r, c) != 0.0;
      }
      zero += any ? 0 : 1;
    }
    if (2 * zero <= ds.n_samples()) break;
  }
  return out;
}

Dataset synth_classification(const ClassificationSpec& spec) {
  if (spec.n == 0 || spec.d == 0 || spec.rank == 0 || spec.rank > spec.d) {
    throw Error(Errc::InvalidArgument, "synth_classification: need n, d >= 1 and 1 <= rank <= d");
  }
  NormalSampler gauss(derive_seed(spec.seed, 1));
  const DenseMatrix factors = gaussian_matrix(spec.d, spec.rank, derive_seed(spec.seed, 2));
  Vector planted(spec.d);
  for (double& w : planted) w = gauss();

  Dataset ds;
  ds.features = DenseMatrix(spec.n, spec.d);
  ds.labels.resize(spec.n);
  Rng flip(derive_seed(spec.seed, 3));
  const double unit = 1.0 / std::sqrt(static_cast<double>(spec.d));
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto row = ds.features.row(i);
    double amp = 1.0;
    for (std::size_t f = 0; f < spec.rank; ++f, amp *= spec.decay) {
      const double z = amp * gauss();
      for (std::size_t j = 0; j < spec.d; ++j) row[j] += z * factors(j, f) * unit;
    }
    for (double& v : row) v += spec.noise * gauss();
    const double y = dot(row, planted) >= 0.0 ? 1.0 : -1.0;
    ds.labels[i] = uniform_open01(flip) < spec.label_noise ? -y : y;
  }
  return normalize_rows(std::move(ds)).data;
}

}  // namespace spanopt
