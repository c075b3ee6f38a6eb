#include "spanopt/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "spanopt/error.hpp"

namespace spanopt {

// ---------------------------------------------------------------------------
// Scalar pieces

double sigmoid(double t) noexcept {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double logistic_loss(double margin) noexcept {
  // log(1 + exp(-margin)) without overflow for large |margin|.
  if (margin > 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

// Smoothed hinge: 0 above 3/2, quadratic for |1 - m| <= 1/2, linear below 1/2.
// Boundaries go to the zero/quadratic side; value and slope agree there.
double huber_loss(double margin) noexcept {
  if (margin >= 1.5) return 0.0;
  if (std::abs(1.0 - margin) <= 0.5) {
    const double r = 1.5 - margin;
    return 0.5 * r * r;
  }
  return 1.0 - margin;
}

double huber_derivative(double margin) noexcept {
  if (margin >= 1.5) return 0.0;
  if (std::abs(1.0 - margin) <= 0.5) return margin - 1.5;
  return -1.0;
}

double huber_second_derivative(double margin) noexcept {
  if (margin >= 1.5) return 0.0;
  if (std::abs(1.0 - margin) <= 0.5) return 1.0;
  return 0.0;
}

// ---------------------------------------------------------------------------
// Dataset / config

void Dataset::validate() const {
  if (labels.size() != features.rows()) {
    throw Error(Errc::InvalidArgument, "dataset: label count differs from row count");
  }
  for (double y : labels) {
    if (y != 1.0 && y != -1.0) throw Error(Errc::InvalidArgument, "dataset: label not in {-1,+1}");
  }
  if (!features.all_finite()) throw Error(Errc::InvalidArgument, "dataset: non-finite feature");
  if (normalized) {
    for (std::size_t i = 0; i < n_samples(); ++i) {
      const double n = norm2(features.row(i));
      if (n != 0.0 && std::abs(n - 1.0) > 1e-10) {
        throw Error(Errc::InvalidArgument, "dataset: row " + std::to_string(i) + " not unit norm");
      }
    }
  }
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "logistic") return LossKind::Logistic;
  if (name == "huber_svm" || name == "huber") return LossKind::HuberSvm;
  if (name == "quadratic") return LossKind::Quadratic;
  throw Error(Errc::ConfigError, "unknown loss kind '" + std::string(name) + "'");
}

std::string_view loss_kind_name(LossKind kind) noexcept {
  switch (kind) {
    case LossKind::Logistic: return "logistic";
    case LossKind::HuberSvm: return "huber_svm";
    case LossKind::Quadratic: return "quadratic";
  }
  return "unknown";
}

void ObjectiveConfig::validate() const {
  if (!(reg_a >= 0.0) || !std::isfinite(reg_a)) {
    throw Error(Errc::InvalidArgument, "objective: reg_a must be finite and >= 0");
  }
  const bool is_quadratic = loss == LossKind::Quadratic;
  if (is_quadratic == quadratic_spectrum.empty()) {
    throw Error(Errc::InvalidArgument,
                "objective: quadratic_spectrum must be present exactly for the quadratic loss");
  }
  for (double s : quadratic_spectrum) {
    if (!(s > 0.0) || !std::isfinite(s)) {
      throw Error(Errc::InvalidArgument, "objective: spectrum entries must be positive");
    }
  }
}

BatchIndex BatchIndex::full(std::size_t n) {
  BatchIndex b;
  b.indices.resize(n);
  std::iota(b.indices.begin(), b.indices.end(), std::size_t{0});
  return b;
}

BatchIndex sample_batch(std::size_t n, std::size_t b, Rng& rng) {
  if (b == 0) throw Error(Errc::InvalidArgument, "sample_batch: b must be >= 1");
  if (b > n) {
    throw Error(Errc::BatchTooLarge,
                "sample_batch: b=" + std::to_string(b) + " > n=" + std::to_string(n));
  }
  if (b == n) return BatchIndex::full(n);
  // Selection sampling: visits indices in order, so the output is sorted.
  BatchIndex out;
  out.indices.reserve(b);
  std::size_t needed = b;
  for (std::size_t i = 0; i < n && needed > 0; ++i) {
    const std::size_t remaining = n - i;
    if (uniform_open01(rng) * static_cast<double>(remaining) < static_cast<double>(needed)) {
      out.indices.push_back(i);
      --needed;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Objective

Objective::Objective(ObjectiveConfig cfg, std::shared_ptr<const Dataset> data)
    : cfg_(std::move(cfg)), data_(std::move(data)) {
  cfg_.validate();
  if (cfg_.loss == LossKind::Quadratic) {
    dim_ = cfg_.quadratic_spectrum.size();
    data_.reset();
    return;
  }
  if (!data_ || data_->n_samples() == 0) {
    throw Error(Errc::InvalidArgument, "objective: sample-based loss needs a nonempty dataset");
  }
  data_->validate();
  dim_ = data_->dim();
}

Objective Objective::quadratic(std::vector<double> spectrum) {
  ObjectiveConfig cfg;
  cfg.loss = LossKind::Quadratic;
  cfg.quadratic_spectrum = std::move(spectrum);
  return Objective(std::move(cfg), nullptr);
}

std::size_t Objective::num_terms() const noexcept {
  return cfg_.loss == LossKind::Quadratic ? 1 : data_->n_samples();
}

void Objective::check_inputs(const BatchIndex& batch, std::span<const double> x) const {
  if (x.size() != dim_) {
    throw Error(Errc::DimensionMismatch,
                "x has length " + std::to_string(x.size()) + ", expected " + std::to_string(dim_));
  }
  if (cfg_.loss == LossKind::Quadratic) return;
  if (batch.indices.empty()) throw Error(Errc::InvalidArgument, "empty batch");
  if (batch.indices.back() >= data_->n_samples()) {
    throw Error(Errc::InvalidArgument, "batch index out of range");
  }
}

double Objective::batch_loss(const BatchIndex& batch, std::span<const double> x) const {
  check_inputs(batch, x);
  const double reg = 0.5 * cfg_.reg_a * dot(x, x);
  if (cfg_.loss == LossKind::Quadratic) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim_; ++i) s += cfg_.quadratic_spectrum[i] * x[i] * x[i];
    return 0.5 * s + reg;
  }
  double total = 0.0;
  for (std::size_t i : batch.indices) {
    const double margin = data_->labels[i] * dot(data_->features.row(i), x);
    total += cfg_.loss == LossKind::Logistic ? logistic_loss(margin) : huber_loss(margin);
  }
  return total / static_cast<double>(batch.size()) + reg;
}

Vector Objective::batch_gradient(const BatchIndex& batch, std::span<const double> x) const {
  check_inputs(batch, x);
  Vector g(dim_, 0.0);
  if (cfg_.loss == LossKind::Quadratic) {
    for (std::size_t i = 0; i < dim_; ++i) g[i] = cfg_.quadratic_spectrum[i] * x[i];
  } else {
    for (std::size_t i : batch.indices) {
      const auto theta = data_->features.row(i);
      const double y = data_->labels[i];
      const double margin = y * dot(theta, x);
      // d/dx loss(y θᵀx) = loss'(margin)·y·θ
      const double slope = cfg_.loss == LossKind::Logistic ? -sigmoid(-margin) : huber_derivative(margin);
      axpy(slope * y, theta, g);
    }
    scale(1.0 / static_cast<double>(batch.size()), g);
  }
  axpy(cfg_.reg_a, x, g);
  return g;
}

Vector Objective::exact_hvp(const BatchIndex& batch, std::span<const double> x,
                            std::span<const double> v) const {
  check_inputs(batch, x);
  if (v.size() != dim_) throw Error(Errc::DimensionMismatch, "exact_hvp: v length");
  Vector hv(dim_, 0.0);
  if (cfg_.loss == LossKind::Quadratic) {
    for (std::size_t i = 0; i < dim_; ++i) hv[i] = cfg_.quadratic_spectrum[i] * v[i];
  } else {
    for (std::size_t i : batch.indices) {
      const auto theta = data_->features.row(i);
      const double z = dot(theta, x);
      double w;
      if (cfg_.loss == LossKind::Logistic) {
        const double s = sigmoid(z);
        w = s * (1.0 - s);
      } else {
        w = huber_second_derivative(data_->labels[i] * z);
      }
      if (w == 0.0) continue;
      axpy(w * dot(theta, v), theta, hv);
    }
    scale(1.0 / static_cast<double>(batch.size()), hv);
  }
  axpy(cfg_.reg_a, v, hv);
  return hv;
}

DenseMatrix Objective::dense_hessian(const BatchIndex& batch, std::span<const double> x) const {
  check_inputs(batch, x);
  if (dim_ > kDenseHessianCap) {
    throw Error(Errc::DimensionTooLarge, "dense_hessian: d=" + std::to_string(dim_) + " > 512");
  }
  DenseMatrix h(dim_, dim_);
  if (cfg_.loss == LossKind::Quadratic) {
    for (std::size_t i = 0; i < dim_; ++i) h(i, i) = cfg_.quadratic_spectrum[i];
  } else {
    // Accumulate the upper triangle, then mirror: symmetric by construction.
    for (std::size_t s : batch.indices) {
      const auto theta = data_->features.row(s);
      const double z = dot(theta, x);
      double w;
      if (cfg_.loss == LossKind::Logistic) {
        const double sg = sigmoid(z);
        w = sg * (1.0 - sg);
      } else {
        w = huber_second_derivative(data_->labels[s] * z);
      }
      if (w == 0.0) continue;
      for (std::size_t i = 0; i < dim_; ++i) {
        const double wi = w * theta[i];
        if (wi == 0.0) continue;
        auto hi = h.row(i);
        for (std::size_t j = i; j < dim_; ++j) hi[j] += wi * theta[j];
      }
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < dim_; ++i) {
      for (std::size_t j = i; j < dim_; ++j) {
        h(i, j) *= inv_b;
        h(j, i) = h(i, j);
      }
    }
  }
  for (std::size_t i = 0; i < dim_; ++i) h(i, i) += cfg_.reg_a;
  return h;
}

double Objective::max_term_curvature() const {
  if (cfg_.loss == LossKind::Quadratic) {
    return *std::max_element(cfg_.quadratic_spectrum.begin(), cfg_.quadratic_spectrum.end()) +
           cfg_.reg_a;
  }
  double max_sq = 0.0;
  for (std::size_t i = 0; i < data_->n_samples(); ++i) {
    const auto row = data_->features.row(i);
    max_sq = std::max(max_sq, dot(row, row));
  }
  const double c = cfg_.loss == LossKind::Logistic ? 0.25 : 1.0;
  return c * max_sq + cfg_.reg_a;
}

}  // namespace spanopt
