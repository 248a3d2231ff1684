#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace upd::env {

enum class Tile : std::uint8_t {
  Floor,
  Wall,
  Counter,
  Pot,
  OnionPile,
  PlatePile,
  ServingWindow,
};
inline constexpr int kNumTileKinds = 7;

// Index order is fixed: bias masks and policy outputs use it.
enum class Action : std::uint8_t { Up, Down, Left, Right, Interact, Stay };
inline constexpr int kNumActions = 6;

enum class Direction : std::uint8_t { Up, Down, Left, Right };
inline constexpr int kNumDirections = 4;

enum class Item : std::uint8_t { Nothing, Onion, Plate, Soup };
inline constexpr int kNumItems = 4;

struct Cell {
  int x = 0;
  int y = 0;
  friend auto operator<=>(const Cell&, const Cell&) = default;
};

inline Cell neighbor(Cell c, Direction d) {
  switch (d) {
    case Direction::Up: return {c.x, c.y - 1};
    case Direction::Down: return {c.x, c.y + 1};
    case Direction::Left: return {c.x - 1, c.y};
    case Direction::Right: return {c.x + 1, c.y};
  }
  return c;
}

inline bool is_passable(Tile t) { return t == Tile::Floor; }

const char* tile_name(Tile t);
const char* action_name(Action a);
const char* item_name(Item i);

struct Recipe {
  int onions_per_soup = 3;
  int cook_time = 20;
  double delivery_reward = 20.0;
  friend bool operator==(const Recipe&, const Recipe&) = default;
};

class LevelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Immutable fully-specified level. Construct through `create`, which
// enforces every structural invariant.
class GridLevel {
 public:
  static GridLevel create(int width, int height, std::vector<Tile> tiles,
                          std::array<Cell, 2> spawns, Recipe recipe = {});

  int width() const { return width_; }
  int height() const { return height_; }
  const std::vector<Tile>& tiles() const { return tiles_; }
  const std::array<Cell, 2>& spawns() const { return spawns_; }
  const Recipe& recipe() const { return recipe_; }

  bool in_bounds(Cell c) const {
    return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_;
  }
  int index(Cell c) const { return c.y * width_ + c.x; }
  Cell cell(int index) const { return {index % width_, index / width_}; }
  Tile at(Cell c) const { return tiles_[static_cast<std::size_t>(index(c))]; }
  bool passable(Cell c) const { return in_bounds(c) && is_passable(at(c)); }

  // Pot cells in row-major order; EnvState::pots is indexed the same way.
  const std::vector<Cell>& pot_cells() const { return pots_; }
  // Index into pot_cells() for a cell, or -1.
  int pot_index(Cell c) const;

  friend bool operator==(const GridLevel& a, const GridLevel& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ &&
           a.tiles_ == b.tiles_ && a.spawns_ == b.spawns_ &&
           a.recipe_ == b.recipe_;
  }

 private:
  GridLevel() = default;

  int width_ = 0;
  int height_ = 0;
  std::vector<Tile> tiles_;
  std::array<Cell, 2> spawns_{};
  Recipe recipe_;
  std::vector<Cell> pots_;
};

using LevelPtr = std::shared_ptr<const GridLevel>;

// ASCII layout legend: W wall, X counter, P pot, O onion pile, D plate pile,
// S serving window, ' ' floor, 1/2 agent spawns on floor. One row per line.
GridLevel parse_layout(std::string_view text, Recipe recipe = {});
std::string serialize_layout(const GridLevel& level);

GridLevel load_layout_file(const std::string& path, Recipe recipe = {});
void save_layout_file(const GridLevel& level, const std::string& path);

}  // namespace upd::env
