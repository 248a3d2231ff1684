#include "upd/learnability/buffer.hpp"

#include <algorithm>
#include <cstdio>

#include "upd/learnability/scores.hpp"

namespace upd::learnability {

double LearnabilityEntry::mean_return() const {
  if (returns.empty()) return 0.0;
  double s = 0.0;
  for (double r : returns) s += r;
  return s / static_cast<double>(returns.size());
}

bool ranks_before(const LearnabilityEntry& a, const LearnabilityEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.partner.id < b.partner.id;
}

PartnerBuffer::PartnerBuffer(std::size_t capacity, int refresh_period, std::size_t top_k)
    : capacity_(capacity), refresh_period_(refresh_period), top_k_(top_k) {
  if (capacity == 0 || refresh_period < 1 || top_k == 0)
    throw ScoreError("buffer capacity, refresh period and K must be positive");
}

void PartnerBuffer::refresh(std::vector<LearnabilityEntry> candidates, int loop) {
  if (candidates.empty()) throw ScoreError("buffer refresh with no candidates");
  const std::size_t keep = std::min(capacity_, candidates.size());
  std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                    candidates.end(), ranks_before);
  candidates.resize(keep);
  entries_ = std::move(candidates);
  last_refresh_ = loop;
  ++refresh_count_;
}

std::vector<LearnabilityEntry> PartnerBuffer::top_k() const {
  return {entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(top_k_size())};
}

const LearnabilityEntry& PartnerBuffer::sample(Rng& rng) const {
  if (entries_.empty()) throw ScoreError("sampling from an empty buffer");
  return entries_[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(top_k_size()) - 1))];
}

std::string PartnerBuffer::dump(int loop) const {
  std::string out = "loop\tid\tepsilon\tmask\tscore\tmean_return\tlevel_seed\n";
  char buf[64];
  for (const LearnabilityEntry& e : entries_) {
    out += std::to_string(loop) + '\t' + std::to_string(e.partner.id) + '\t';
    std::snprintf(buf, sizeof buf, "%.6f", e.partner.epsilon);
    out += buf;
    out += '\t';
    for (std::size_t i = 0; i < e.partner.mask.size(); ++i) {
      std::snprintf(buf, sizeof buf, i ? ",%.6f" : "%.6f", e.partner.mask[i]);
      out += buf;
    }
    std::snprintf(buf, sizeof buf, "\t%.6g\t%.6g\t", e.score, e.mean_return());
    out += buf;
    out += e.level_seed ? std::to_string(*e.level_seed) : std::string("-");
    out += '\n';
  }
  return out;
}

}  // namespace upd::learnability
