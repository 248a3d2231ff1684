#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace upd::nn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;
};

class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, AdamConfig cfg = {});

  void step(std::span<float> params, std::span<const float> grad, double lr);
  std::int64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<double> m_, v_;
  std::int64_t t_ = 0;
};

// Scales grad in place so its global L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_grad_norm(std::vector<float>& grad, double max_norm);

}  // namespace upd::nn
