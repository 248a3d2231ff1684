#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "upd/nn/arch.hpp"

namespace upd::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

// Eigen picks its vectorised reduction order from the buffer address, so
// flat parameter and gradient storage is kept aligned: results then depend
// only on the values, not on where the heap put them.
template <typename S>
using ParamVector = std::vector<S, Eigen::aligned_allocator<S>>;

// Flat parameter store over a shared immutable layout.
template <typename S>
struct Params {
  std::shared_ptr<const ParamLayout> layout;
  ParamVector<S> values;
  std::uint64_t version = 0;

  Params() = default;
  explicit Params(std::shared_ptr<const ParamLayout> l)
      : layout(std::move(l)), values(layout->total(), S(0)) {}

  std::span<S> segment(const std::string& name) {
    const Segment& s = layout->segment(name);
    return {values.data() + s.offset, s.size()};
  }
  std::span<const S> segment(const std::string& name) const {
    const Segment& s = layout->segment(name);
    return {values.data() + s.offset, s.size()};
  }

  Eigen::Map<const Mat<S>> matrix(const std::string& name) const {
    const Segment& s = layout->segment(name);
    return {values.data() + s.offset, s.rows, s.cols};
  }
  Eigen::Map<const RowVec<S>> row(const std::string& name) const {
    const Segment& s = layout->segment(name);
    return {values.data() + s.offset, static_cast<Eigen::Index>(s.size())};
  }

  template <typename T>
  Params<T> cast() const {
    Params<T> out;
    out.layout = layout;
    out.version = version;
    out.values.assign(values.begin(), values.end());
    return out;
  }
};

using PolicyParams = Params<float>;

// Orthogonal weights (gain sqrt(2) in hidden layers, 0.01 on the policy
// logits, 1 on the value output), zero biases, unit layernorm gains.
PolicyParams init_params(std::uint64_t seed, const ArchConfig& arch, int obs_len,
                         int n_actions);

// Which functional block a segment belongs to: "encoder", "gru", "moa",
// "action_embed", "actor" or "critic".
std::string segment_group(const std::string& segment_name);

}  // namespace upd::nn
