#include "upd/levelgen/level_gen.hpp"

#include <algorithm>
#include <string>

#include "upd/common/random.hpp"

namespace upd::levelgen {

using env::Cell;
using env::Tile;

void LevelGenConfig::validate() const {
  if (width < 4 || height < 4) {
    throw LevelGenError("level generator needs width and height >= 4");
  }
  const int interior = (width - 2) * (height - 2);
  if (min_wall_budget < 0 || max_wall_budget < min_wall_budget ||
      min_wall_budget > interior) {
    throw LevelGenError("wall budget range must lie within [0, " +
                        std::to_string(interior) + "]");
  }
  if (p_dividing_wall < 0 || p_dividing_wall > 1 || p_side_narrowing < 0 ||
      p_side_narrowing > 1) {
    throw LevelGenError("probabilities must lie in [0, 1]");
  }
  if (items_per_kind < 1 || max_retries < 1) {
    throw LevelGenError("items_per_kind and max_retries must be positive");
  }
  if (min_onions_per_soup < 1 || max_onions_per_soup < min_onions_per_soup) {
    throw LevelGenError("invalid onions_per_soup range");
  }
}

namespace {

class Canvas {
 public:
  Canvas(int w, int h) : w_(w), h_(h), tiles_(static_cast<std::size_t>(w * h), Tile::Floor) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        if (x == 0 || y == 0 || x == w - 1 || y == h - 1) set({x, y}, Tile::Counter);
      }
    }
  }

  Tile at(Cell c) const { return tiles_[static_cast<std::size_t>(c.y * w_ + c.x)]; }
  void set(Cell c, Tile t) { tiles_[static_cast<std::size_t>(c.y * w_ + c.x)] = t; }
  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < w_ && c.y < h_; }

  std::vector<Cell> floor_cells() const {
    std::vector<Cell> out;
    for (int y = 1; y < h_ - 1; ++y)
      for (int x = 1; x < w_ - 1; ++x)
        if (at({x, y}) == Tile::Floor) out.push_back({x, y});
    return out;
  }

  bool adjacent_to_floor(Cell c) const {
    for (int d = 0; d < env::kNumDirections; ++d) {
      const Cell n = env::neighbor(c, static_cast<env::Direction>(d));
      if (in_bounds(n) && at(n) == Tile::Floor) return true;
    }
    return false;
  }

  bool corner(Cell c) const {
    return (c.x == 0 || c.x == w_ - 1) && (c.y == 0 || c.y == h_ - 1);
  }

  std::vector<Tile> take() && { return std::move(tiles_); }

 private:
  int w_;
  int h_;
  std::vector<Tile> tiles_;
};

// Walls a line of interior cells while budget remains and at least two
// floor cells survive for the agents.
int wall_line(Canvas& canvas, const std::vector<Cell>& line, int& budget) {
  int placed = 0;
  for (const Cell& c : line) {
    if (budget <= 0) break;
    if (canvas.at(c) != Tile::Floor) continue;
    if (canvas.floor_cells().size() <= 2) break;
    canvas.set(c, Tile::Counter);
    --budget;
    ++placed;
  }
  return placed;
}

}  // namespace

GeneratedLevel generate_level_info(std::uint64_t seed, const LevelGenConfig& cfg) {
  cfg.validate();
  Rng rng(stream_seed({seed, 0x1e7e1ULL}));
  const int w = cfg.width;
  const int h = cfg.height;
  // Sampled once so that retries cannot skew the budget distribution.
  const int budget = rng.uniform_int(cfg.min_wall_budget, cfg.max_wall_budget);
  env::Recipe recipe = cfg.recipe;
  recipe.onions_per_soup =
      rng.uniform_int(cfg.min_onions_per_soup, cfg.max_onions_per_soup);

  for (int attempt = 1; attempt <= cfg.max_retries; ++attempt) {
    Canvas canvas(w, h);
    int remaining = budget;
    int interior_walls = 0;
    bool dividing = false;
    bool narrowing = false;

    if (rng.bernoulli(cfg.p_dividing_wall)) {
      dividing = true;
      std::vector<Cell> line;
      if (rng.bernoulli(0.5)) {
        for (int y = 1; y < h - 1; ++y) line.push_back({w / 2, y});
      } else {
        for (int x = 1; x < w - 1; ++x) line.push_back({x, h / 2});
      }
      interior_walls += wall_line(canvas, line, remaining);
    }
    if (rng.bernoulli(cfg.p_side_narrowing)) {
      narrowing = true;
      std::vector<Cell> line;
      switch (rng.uniform_int(0, 3)) {
        case 0: for (int x = 1; x < w - 1; ++x) line.push_back({x, 1}); break;
        case 1: for (int x = 1; x < w - 1; ++x) line.push_back({x, h - 2}); break;
        case 2: for (int y = 1; y < h - 1; ++y) line.push_back({1, y}); break;
        default: for (int y = 1; y < h - 1; ++y) line.push_back({w - 2, y}); break;
      }
      interior_walls += wall_line(canvas, line, remaining);
    }
    while (remaining > 0) {
      std::vector<Cell> free = canvas.floor_cells();
      if (free.size() <= 2) break;
      const Cell c = free[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(free.size()) - 1))];
      canvas.set(c, Tile::Counter);
      --remaining;
      ++interior_walls;
    }

    // Items replace walls that face at least one floor cell.
    std::vector<Cell> slots;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const Cell c{x, y};
        if (canvas.at(c) == Tile::Counter && !canvas.corner(c) &&
            canvas.adjacent_to_floor(c)) {
          slots.push_back(c);
        }
      }
    const std::size_t needed = static_cast<std::size_t>(4 * cfg.items_per_kind);
    if (slots.size() < needed) continue;
    std::shuffle(slots.begin(), slots.end(), rng.engine());
    std::size_t next = 0;
    for (Tile kind : {Tile::Pot, Tile::OnionPile, Tile::PlatePile, Tile::ServingWindow}) {
      for (int k = 0; k < cfg.items_per_kind; ++k) canvas.set(slots[next++], kind);
    }

    std::vector<Cell> free = canvas.floor_cells();
    if (free.size() < 2) continue;
    std::shuffle(free.begin(), free.end(), rng.engine());
    const std::array<Cell, 2> spawns{free[0], free[1]};

    return GeneratedLevel{
        env::GridLevel::create(w, h, std::move(canvas).take(), spawns, recipe),
        budget, interior_walls, dividing, narrowing, attempt};
  }
  throw LevelGenError("level generation exhausted " +
                      std::to_string(cfg.max_retries) + " retries for seed " +
                      std::to_string(seed));
}

env::GridLevel generate_level(std::uint64_t seed, const LevelGenConfig& cfg) {
  return generate_level_info(seed, cfg).level;
}

}  // namespace upd::levelgen
