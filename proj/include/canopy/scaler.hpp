#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace canopy {

// Streaming per-element standardization (Welford moments).
// apply: (x - mean) / sqrt(var + eps); unapply inverts it.
class RunningScaler {
 public:
  explicit RunningScaler(size_t dim = 1)
      : mean_(dim, 0.0), m2_(dim, 0.0), count_(0) {}

  size_t dim() const { return mean_.size(); }
  long long count() const { return count_; }

  void update(const double* x) {
    ++count_;
    for (size_t i = 0; i < mean_.size(); ++i) {
      double d = x[i] - mean_[i];
      mean_[i] += d / static_cast<double>(count_);
      m2_[i] += d * (x[i] - mean_[i]);
    }
  }

  void update_batch(const double* x, size_t n) {
    for (size_t s = 0; s < n; ++s) update(x + s * mean_.size());
  }

  double mean(size_t i) const { return mean_[i]; }
  double variance(size_t i) const {
    return count_ > 0 ? m2_[i] / static_cast<double>(count_) : 0.0;
  }

  double apply_one(double x, size_t i) const {
    return (x - mean_[i]) / std::sqrt(variance(i) + kEps);
  }
  double unapply_one(double y, size_t i) const {
    return y * std::sqrt(variance(i) + kEps) + mean_[i];
  }

  void apply(const double* x, double* out) const {
    for (size_t i = 0; i < mean_.size(); ++i) out[i] = apply_one(x[i], i);
  }

  // raw state access for checkpointing
  std::vector<double>& mean_state() { return mean_; }
  std::vector<double>& m2_state() { return m2_; }
  const std::vector<double>& mean_state() const { return mean_; }
  const std::vector<double>& m2_state() const { return m2_; }
  void set_count(long long c) { count_ = c; }

  static constexpr double kEps = 1e-8;

 private:
  std::vector<double> mean_;
  std::vector<double> m2_;
  long long count_;
};

}  // namespace canopy
