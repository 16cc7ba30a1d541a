#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace sslam {

/// First-order adaptive-moment optimizer over a flat parameter array.
/// Supports growing (appended parameters start with zero moments) and
/// compaction when entries are removed, so optimizer state can follow a
/// surfel map through densify/prune.
class Adam {
public:
  Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void resize(size_t n) {
    m_.resize(n, 0.0);
    v_.resize(n, 0.0);
  }
  size_t size() const { return m_.size(); }

  /// One update: params[i] -= lr * mhat / (sqrt(vhat) + eps).
  void step(double* params, const double* grads, size_t n, double lr) {
    if (m_.size() < n) resize(n);
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, t_);
    double bc2 = 1.0 - std::pow(beta2_, t_);
    for (size_t i = 0; i < n; ++i) {
      double g = grads[i];
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g * g;
      double mhat = m_[i] / bc1;
      double vhat = v_[i] / bc2;
      params[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
  }

  /// Keeps moments for entries where old_to_new[i] >= 0, moving them to
  /// their new index. old_to_new must be monotone on kept entries.
  void compact(const std::vector<int>& old_to_new, size_t stride) {
    for (size_t i = 0; i < old_to_new.size(); ++i) {
      int dst = old_to_new[i];
      if (dst < 0) continue;
      for (size_t k = 0; k < stride; ++k) {
        m_[dst * stride + k] = m_[i * stride + k];
        v_[dst * stride + k] = v_[i * stride + k];
      }
    }
    size_t kept = 0;
    for (int d : old_to_new) {
      if (d >= 0) ++kept;
    }
    m_.resize(kept * stride);
    v_.resize(kept * stride);
  }

  void reset() {
    std::fill(m_.begin(), m_.end(), 0.0);
    std::fill(v_.begin(), v_.end(), 0.0);
    t_ = 0;
  }

  long step_count() const { return t_; }

private:
  double beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<double> m_, v_;
};

}  // namespace sslam
