#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "upd/common/random.hpp"
#include "upd/env/grid_level.hpp"
#include "upd/partner/partner.hpp"

namespace upd::learnability {

struct LearnabilityEntry {
  double score = 0.0;
  partner::PartnerSpec partner;
  env::LevelPtr level;                     // set for joint level/partner curricula
  std::optional<std::uint64_t> level_seed;
  std::vector<double> returns;
  int created_at = 0;                      // training loop index

  double mean_return() const;
};

// Strict ordering used everywhere: higher score first, then lower id.
bool ranks_before(const LearnabilityEntry& a, const LearnabilityEntry& b);

class PartnerBuffer {
 public:
  PartnerBuffer(std::size_t capacity = 512, int refresh_period = 4, std::size_t top_k = 512);

  std::size_t capacity() const { return capacity_; }
  int refresh_period() const { return refresh_period_; }
  std::size_t top_k_size() const { return std::min(top_k_, entries_.size()); }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  // Loops are counted from 0; the buffer is rebuilt on loops 0, P, 2P, ...
  bool refresh_due(int loop) const { return loop % refresh_period_ == 0; }

  // Replaces the buffer with the capacity-best candidates.
  void refresh(std::vector<LearnabilityEntry> candidates, int loop);

  // Entries in rank order; the first top_k_size() are the sampling pool.
  const std::vector<LearnabilityEntry>& entries() const { return entries_; }
  std::vector<LearnabilityEntry> top_k() const;
  const LearnabilityEntry& sample(Rng& rng) const;

  int last_refresh() const { return last_refresh_; }
  int refresh_count() const { return refresh_count_; }

  // Text table: loop id epsilon mask score mean_return [level_seed]
  std::string dump(int loop) const;

 private:
  std::size_t capacity_;
  int refresh_period_;
  std::size_t top_k_;
  std::vector<LearnabilityEntry> entries_;
  int last_refresh_ = -1;
  int refresh_count_ = 0;
};

}  // namespace upd::learnability
