#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace upd::nn {

enum class Activation : std::uint8_t { Tanh, Relu };

struct ArchConfig {
  int embed_layers = 2;    // fully connected layers after the input layer
  int hidden = 256;
  int actor_layers = 4;
  int critic_layers = 4;
  int gru_hidden = 256;
  Activation activation = Activation::Tanh;
  bool layernorm = true;   // encoder only
  int moa_layers = 4;
  int moa_hidden = 64;
  int history_len = 5;
  int action_embed = 256;

  void validate() const;
  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

// Desk-scale profile used for CI and the acceptance runs.
ArchConfig desk_arch();

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Segment {
  std::string name;
  std::size_t offset = 0;
  int rows = 0;
  int cols = 1;  // 1 for bias/gain vectors
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
};

// Flat parameter layout. Linear weights are stored row-major as
// [out x in] followed by their bias.
class ParamLayout {
 public:
  ParamLayout(const ArchConfig& arch, int obs_len, int n_actions);

  const ArchConfig& arch() const { return arch_; }
  int obs_len() const { return obs_len_; }
  int n_actions() const { return n_actions_; }
  std::size_t total() const { return total_; }
  const std::vector<Segment>& segments() const { return segments_; }
  const Segment& segment(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;

  // Width of the MOA input: one (observation embedding, action embedding)
  // pair per history slot.
  int moa_input() const {
    return arch_.history_len * (arch_.moa_hidden + arch_.action_embed);
  }

  friend bool operator==(const ParamLayout& a, const ParamLayout& b) {
    return a.arch_ == b.arch_ && a.obs_len_ == b.obs_len_ &&
           a.n_actions_ == b.n_actions_;
  }

 private:
  void add(std::string name, int rows, int cols);
  void add_linear(const std::string& prefix, int out, int in);

  ArchConfig arch_;
  int obs_len_;
  int n_actions_;
  std::size_t total_ = 0;
  std::vector<Segment> segments_;
};

}  // namespace upd::nn
