#pragma once

// Test-only statistical oracles.

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace upd::testing {

// Upper tail of the chi-squared distribution.
inline double chi2_sf(double stat, int dof) {
  return boost::math::gamma_q(0.5 * dof, 0.5 * stat);
}

inline double chi2_uniform_pvalue(const std::vector<long>& counts) {
  double n = 0;
  for (long c : counts) n += static_cast<double>(c);
  const double expected = n / static_cast<double>(counts.size());
  double stat = 0;
  for (long c : counts) stat += (c - expected) * (c - expected) / expected;
  return chi2_sf(stat, static_cast<int>(counts.size()) - 1);
}

// One-sample Kolmogorov-Smirnov test against U(0,1), asymptotic p-value
// with Stephens' small-sample correction.
inline double ks_uniform_pvalue(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max({d, hi - xs[i], xs[i] - lo});
  }
  const double sn = std::sqrt(n);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? 1.0 : -1.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace upd::testing
