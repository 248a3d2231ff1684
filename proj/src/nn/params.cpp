#include "upd/nn/params.hpp"

#include <cmath>

#include <Eigen/QR>

#include "upd/common/random.hpp"

namespace upd::nn {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

double gain_for(const std::string& name) {
  if (name == "actor.out.w") return 0.01;
  if (name == "critic.out.w" || name == "moa.out.w") return 1.0;
  if (name.rfind("gru.", 0) == 0) return 1.0;
  return std::sqrt(2.0);
}

// Orthogonal rows (or columns, whichever is shorter) scaled by gain.
void orthogonal(Rng& rng, int rows, int cols, double gain, float* out) {
  const int big = std::max(rows, cols);
  const int small = std::min(rows, cols);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd a(big, small);
  for (int i = 0; i < big; ++i)
    for (int j = 0; j < small; ++j) a(i, j) = normal(rng.engine());
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
  Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(big, small);
  const Eigen::MatrixXd r = qr.matrixQR().topRows(small).triangularView<Eigen::Upper>();
  for (int j = 0; j < small; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      const double v = rows >= cols ? q(i, j) : q(j, i);
      out[static_cast<std::size_t>(i) * cols + j] = static_cast<float>(gain * v);
    }
  }
}

}  // namespace

PolicyParams init_params(std::uint64_t seed, const ArchConfig& arch, int obs_len,
                         int n_actions) {
  PolicyParams p(std::make_shared<const ParamLayout>(arch, obs_len, n_actions));
  std::uint64_t k = 0;
  for (const Segment& s : p.layout->segments()) {
    float* out = p.values.data() + s.offset;
    if (ends_with(s.name, ".ln_g")) {
      std::fill(out, out + s.size(), 1.0f);
    } else if (s.cols > 1) {
      Rng rng(stream_seed({seed, k}));
      if (s.name.rfind("gru.", 0) == 0) {
        // One orthogonal block per gate.
        const int g = s.rows / 3;
        for (int gate = 0; gate < 3; ++gate)
          orthogonal(rng, g, s.cols, gain_for(s.name),
                     out + static_cast<std::size_t>(gate) * g * s.cols);
      } else {
        orthogonal(rng, s.rows, s.cols, gain_for(s.name), out);
      }
    }
    ++k;
  }
  return p;
}

std::string segment_group(const std::string& name) {
  if (name.rfind("enc.", 0) == 0) return "encoder";
  if (name.rfind("gru.", 0) == 0) return "gru";
  if (name.rfind("moa.act.", 0) == 0) return "action_embed";
  if (name.rfind("moa.", 0) == 0) return "moa";
  if (name.rfind("actor.", 0) == 0) return "actor";
  if (name.rfind("critic.", 0) == 0) return "critic";
  throw ShapeError("unknown segment " + name);
}

}  // namespace upd::nn
