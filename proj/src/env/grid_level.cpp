#include "upd/env/grid_level.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace upd::env {

const char* tile_name(Tile t) {
  switch (t) {
    case Tile::Floor: return "Floor";
    case Tile::Wall: return "Wall";
    case Tile::Counter: return "Counter";
    case Tile::Pot: return "Pot";
    case Tile::OnionPile: return "OnionPile";
    case Tile::PlatePile: return "PlatePile";
    case Tile::ServingWindow: return "ServingWindow";
  }
  return "?";
}

const char* action_name(Action a) {
  switch (a) {
    case Action::Up: return "Up";
    case Action::Down: return "Down";
    case Action::Left: return "Left";
    case Action::Right: return "Right";
    case Action::Interact: return "Interact";
    case Action::Stay: return "Stay";
  }
  return "?";
}

const char* item_name(Item i) {
  switch (i) {
    case Item::Nothing: return "nothing";
    case Item::Onion: return "onion";
    case Item::Plate: return "plate";
    case Item::Soup: return "soup";
  }
  return "?";
}

GridLevel GridLevel::create(int width, int height, std::vector<Tile> tiles,
                            std::array<Cell, 2> spawns, Recipe recipe) {
  if (width < 3 || height < 3) {
    throw LevelError("level must be at least 3x3");
  }
  if (tiles.size() != static_cast<std::size_t>(width * height)) {
    throw LevelError("tile count does not match dimensions");
  }
  if (recipe.onions_per_soup < 1 || recipe.cook_time < 1 ||
      recipe.delivery_reward < 0.0) {
    throw LevelError("invalid recipe");
  }
  GridLevel level;
  level.width_ = width;
  level.height_ = height;
  level.tiles_ = std::move(tiles);
  level.spawns_ = spawns;
  level.recipe_ = recipe;

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const bool border = x == 0 || y == 0 || x == width - 1 || y == height - 1;
      if (border && level.at({x, y}) == Tile::Floor) {
        throw LevelError("floor on border at (" + std::to_string(x) + "," +
                         std::to_string(y) + ")");
      }
      if (level.at({x, y}) == Tile::Pot) level.pots_.push_back({x, y});
    }
  }
  for (Tile required : {Tile::Pot, Tile::OnionPile, Tile::PlatePile,
                        Tile::ServingWindow}) {
    if (std::find(level.tiles_.begin(), level.tiles_.end(), required) ==
        level.tiles_.end()) {
      throw LevelError(std::string("MissingTile(") + tile_name(required) + ")");
    }
  }
  for (const Cell& s : spawns) {
    if (!level.in_bounds(s) || level.at(s) != Tile::Floor) {
      throw LevelError("spawn not on floor");
    }
  }
  if (spawns[0] == spawns[1]) throw LevelError("spawns must be distinct");
  return level;
}

int GridLevel::pot_index(Cell c) const {
  auto it = std::find(pots_.begin(), pots_.end(), c);
  return it == pots_.end() ? -1 : static_cast<int>(it - pots_.begin());
}

namespace {

Tile tile_from_char(char ch, int x, int y) {
  switch (ch) {
    case 'W': return Tile::Wall;
    case 'X': return Tile::Counter;
    case 'P': return Tile::Pot;
    case 'O': return Tile::OnionPile;
    case 'D': return Tile::PlatePile;
    case 'S': return Tile::ServingWindow;
    case ' ':
    case '1':
    case '2': return Tile::Floor;
    default:
      throw LevelError("unknown layout character '" + std::string(1, ch) +
                       "' at (" + std::to_string(x) + "," + std::to_string(y) +
                       ")");
  }
}

char char_from_tile(Tile t) {
  switch (t) {
    case Tile::Floor: return ' ';
    case Tile::Wall: return 'W';
    case Tile::Counter: return 'X';
    case Tile::Pot: return 'P';
    case Tile::OnionPile: return 'O';
    case Tile::PlatePile: return 'D';
    case Tile::ServingWindow: return 'S';
  }
  return '?';
}

}  // namespace

GridLevel parse_layout(std::string_view text, Recipe recipe) {
  std::vector<std::string_view> rows;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    rows.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  if (rows.empty()) throw LevelError("empty layout");

  const int width = static_cast<int>(rows.front().size());
  const int height = static_cast<int>(rows.size());
  std::vector<Tile> tiles;
  tiles.reserve(static_cast<std::size_t>(width * height));
  bool have_spawn[2] = {false, false};
  std::array<Cell, 2> spawns{};
  for (int y = 0; y < height; ++y) {
    if (static_cast<int>(rows[y].size()) != width) {
      throw LevelError("non-rectangular layout at row " + std::to_string(y));
    }
    for (int x = 0; x < width; ++x) {
      const char ch = rows[y][x];
      if (ch == '1' || ch == '2') {
        const int k = ch - '1';
        if (have_spawn[k]) {
          throw LevelError(std::string("duplicate spawn marker '") + ch + "'");
        }
        have_spawn[k] = true;
        spawns[k] = {x, y};
      }
      tiles.push_back(tile_from_char(ch, x, y));
    }
  }
  if (!have_spawn[0] || !have_spawn[1]) {
    throw LevelError("missing spawn marker");
  }
  return GridLevel::create(width, height, std::move(tiles), spawns, recipe);
}

std::string serialize_layout(const GridLevel& level) {
  std::string out;
  out.reserve(static_cast<std::size_t>((level.width() + 1) * level.height()));
  for (int y = 0; y < level.height(); ++y) {
    for (int x = 0; x < level.width(); ++x) {
      const Cell c{x, y};
      if (c == level.spawns()[0]) {
        out.push_back('1');
      } else if (c == level.spawns()[1]) {
        out.push_back('2');
      } else {
        out.push_back(char_from_tile(level.at(c)));
      }
    }
    out.push_back('\n');
  }
  return out;
}

GridLevel load_layout_file(const std::string& path, Recipe recipe) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LevelError("cannot open layout file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  // A single trailing LF terminates the last row.
  if (!text.empty() && text.back() == '\n') text.pop_back();
  return parse_layout(text, recipe);
}

void save_layout_file(const GridLevel& level, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LevelError("cannot write layout file " + path);
  out << serialize_layout(level);
}

}  // namespace upd::env
