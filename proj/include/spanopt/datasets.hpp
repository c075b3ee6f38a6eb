#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <utility>
#include <vector>

#include "spanopt/objectives.hpp"

namespace spanopt {

/// One LIBSVM line. Indices are 1-based as on the wire and strictly increasing.
struct RawExample {
  double label = 0.0;
  std::vector<std::pair<std::size_t, double>> features;

  bool operator==(const RawExample&) const = default;
};

struct RawDataset {
  std::vector<RawExample> examples;
  std::size_t dim = 0;  // largest index seen
};

/// Throws ParseError naming the 1-based line number.
RawDataset parse_libsvm(std::istream& in);
/// Reads through zlib when the path ends in ".gz".
RawDataset load_libsvm(const std::filesystem::path& path);
void write_libsvm(std::ostream& out, const std::vector<RawExample>& examples);

/// Keeps examples labelled `positive` (mapped to +1) or `negative` (mapped to
/// −1) and densifies them to `dim` columns (0 = the largest index present).
/// Throws NoMatchingExamples when nothing is kept.
Dataset to_binary_dataset(const RawDataset& raw, double positive, double negative,
                          std::size_t dim = 0);

struct NormalizedDataset {
  Dataset data;
  std::size_t zero_rows = 0;
};

/// Scales every nonzero row to unit length; zero rows stay zero and are counted.
NormalizedDataset normalize_rows(Dataset ds);

struct SyntheticQuadratic {
  ObjectiveConfig config;
  Vector optimum;  // always 0
};

SyntheticQuadratic synth_quadratic(std::vector<double> spectrum, std::uint64_t seed = 0);

/// Spectrum shapes used by configs and the scaling report.
std::vector<double> linear_spectrum(std::size_t d, double lo, double hi);
std::vector<double> geometric_spectrum(std::size_t d, double lo, double hi);

/// Keeps k uniformly chosen columns. If more than half of the rows become zero
/// the columns are drawn again, at most 20 times; the last draw is returned.
Dataset subsample_features(const Dataset& ds, std::size_t k, std::uint64_t seed);

struct ClassificationSpec {
  std::size_t n = 2000;
  std::size_t d = 100;
  std::size_t rank = 10;      // latent factors
  double decay = 0.7;         // factor scale ratio between consecutive factors
  double noise = 0.05;        // isotropic noise relative to the first factor
  double label_noise = 0.05;  // probability of a flipped label
  std::uint64_t seed = 0;
};

/// Normalized binary dataset whose rows are a decaying low-rank mix plus
/// noise, labelled by a planted linear model. The sample covariance (and thus
/// the logistic Hessian) has a few dominant directions and a flat tail.
Dataset synth_classification(const ClassificationSpec& spec);

}  // namespace spanopt
