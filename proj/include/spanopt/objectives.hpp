#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "spanopt/linalg.hpp"
#include "spanopt/random.hpp"

namespace spanopt {

/// N labelled instances stored densely, one feature row per instance.
struct Dataset {
  DenseMatrix features;        // N x d
  std::vector<double> labels;  // each exactly -1 or +1
  bool normalized = false;

  std::size_t n_samples() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }

  /// Throws InvalidArgument if a label is not ±1, a feature is non-finite, or
  /// the normalized flag is set while a nonzero row is not unit length.
  void validate() const;
};

enum class LossKind { Logistic, HuberSvm, Quadratic };

LossKind parse_loss_kind(std::string_view name);
std::string_view loss_kind_name(LossKind kind) noexcept;

struct ObjectiveConfig {
  LossKind loss = LossKind::Logistic;
  double reg_a = 0.0;
  std::vector<double> quadratic_spectrum;  // diagonal Hessian, quadratic only

  void validate() const;
};

/// Sorted, duplicate-free sample indices.
struct BatchIndex {
  std::vector<std::size_t> indices;

  std::size_t size() const noexcept { return indices.size(); }
  static BatchIndex full(std::size_t n);
};

/// Uniform sample of b distinct indices from [0, n), returned in increasing
/// order. Throws BatchTooLarge when b > n.
BatchIndex sample_batch(std::size_t n, std::size_t b, Rng& rng);

/// Finite-sum objective F(x) = mean_i f_i(x) + (a/2)‖x‖².
///
/// The L2 term is added to every batch quantity, so f_B includes it once. The
/// quadratic kind carries no samples; batch arguments are ignored for it and it
/// reports a single term.
class Objective {
 public:
  Objective(ObjectiveConfig cfg, std::shared_ptr<const Dataset> data);
  static Objective quadratic(std::vector<double> spectrum);

  const ObjectiveConfig& config() const noexcept { return cfg_; }
  const Dataset* data() const noexcept { return data_.get(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_terms() const noexcept;
  BatchIndex full_batch() const { return BatchIndex::full(num_terms()); }

  double batch_loss(const BatchIndex& batch, std::span<const double> x) const;
  Vector batch_gradient(const BatchIndex& batch, std::span<const double> x) const;
  Vector exact_hvp(const BatchIndex& batch, std::span<const double> x,
                   std::span<const double> v) const;

  static constexpr std::size_t kDenseHessianCap = 512;
  DenseMatrix dense_hessian(const BatchIndex& batch, std::span<const double> x) const;

  double loss(std::span<const double> x) const { return batch_loss(full_batch(), x); }
  Vector gradient(std::span<const double> x) const { return batch_gradient(full_batch(), x); }

  /// Upper bound on max_i ‖∇²f_i(x)‖ over all x (regularizer included).
  double max_term_curvature() const;

 private:
  void check_inputs(const BatchIndex& batch, std::span<const double> x) const;

  ObjectiveConfig cfg_;
  std::shared_ptr<const Dataset> data_;
  std::size_t dim_ = 0;
};

// Per-sample scalar pieces, exposed for tests. `margin` is y·θᵀx.
double huber_loss(double margin) noexcept;
double huber_derivative(double margin) noexcept;
double huber_second_derivative(double margin) noexcept;
double logistic_loss(double margin) noexcept;
double sigmoid(double t) noexcept;

}  // namespace spanopt
