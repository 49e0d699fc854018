#include "enav/grid.hpp"

#include <algorithm>
#include <deque>
#include <queue>

#include "enav/rng.hpp"
#include "json.hpp"

namespace enav {

Heading turn_left(Heading h) {
  return static_cast<Heading>((static_cast<int>(h) + 3) % 4);
}

Heading turn_right(Heading h) {
  return static_cast<Heading>((static_cast<int>(h) + 1) % 4);
}

void heading_delta(Heading h, int& dx, int& dy) {
  switch (h) {
    case Heading::N: dx = 0; dy = -1; return;
    case Heading::E: dx = 1; dy = 0; return;
    case Heading::S: dx = 0; dy = 1; return;
    case Heading::W: dx = -1; dy = 0; return;
  }
  dx = dy = 0;
}

void right_delta(Heading h, int& dx, int& dy) {
  heading_delta(turn_right(h), dx, dy);
}

const char* heading_name(Heading h) {
  switch (h) {
    case Heading::N: return "N";
    case Heading::E: return "E";
    case Heading::S: return "S";
    case Heading::W: return "W";
  }
  return "?";
}

const char* action_name(NavAction a) {
  switch (a) {
    case NavAction::MoveAhead: return "move_ahead";
    case NavAction::MoveBack: return "move_back";
    case NavAction::RotateLeft: return "rotate_left";
    case NavAction::RotateRight: return "rotate_right";
    case NavAction::End: return "end";
  }
  return "?";
}

std::vector<std::pair<int, int>> GridHouse::target_cells() const {
  std::vector<std::pair<int, int>> out;
  for (const auto& o : objects) {
    if (o.category == target_category) out.emplace_back(o.x, o.y);
  }
  return out;
}

namespace {

struct Region {
  int x0, y0, x1, y1;  // inclusive free-cell bounds
  int w() const { return x1 - x0 + 1; }
  int h() const { return y1 - y0 + 1; }
  int area() const { return w() * h(); }
};

// Recursive wall-and-door splits; every split leaves a one-cell door, so all
// free cells stay 4-connected.
void split_rooms(std::vector<CellKind>& cells, int width, Region region,
                 int splits_left, Rng& rng) {
  if (splits_left <= 0) return;
  const bool can_v = region.w() >= 5;
  const bool can_h = region.h() >= 5;
  if (!can_v && !can_h) return;

  bool vertical;
  if (can_v && can_h) {
    vertical = region.w() == region.h() ? rng.next_bool(0.5)
                                        : region.w() > region.h();
  } else {
    vertical = can_v;
  }

  auto at = [&](int x, int y) -> CellKind& {
    return cells[static_cast<size_t>(y) * width + x];
  };

  if (vertical) {
    const int wx = region.x0 + 2 + static_cast<int>(rng.next_below(region.w() - 4));
    const int door = region.y0 + static_cast<int>(rng.next_below(region.h()));
    for (int y = region.y0; y <= region.y1; ++y) {
      if (y != door) at(wx, y) = CellKind::Wall;
    }
    const int keep = splits_left - 1;
    const int left_share = keep / 2 + (keep % 2 ? static_cast<int>(rng.next_below(2)) : 0);
    split_rooms(cells, width, {region.x0, region.y0, wx - 1, region.y1}, left_share, rng);
    split_rooms(cells, width, {wx + 1, region.y0, region.x1, region.y1}, keep - left_share, rng);
  } else {
    const int wy = region.y0 + 2 + static_cast<int>(rng.next_below(region.h() - 4));
    const int door = region.x0 + static_cast<int>(rng.next_below(region.w()));
    for (int x = region.x0; x <= region.x1; ++x) {
      if (x != door) at(x, wy) = CellKind::Wall;
    }
    const int keep = splits_left - 1;
    const int top_share = keep / 2 + (keep % 2 ? static_cast<int>(rng.next_below(2)) : 0);
    split_rooms(cells, width, {region.x0, region.y0, region.x1, wy - 1}, top_share, rng);
    split_rooms(cells, width, {region.x0, wy + 1, region.x1, region.y1}, keep - top_share, rng);
  }
}

bool try_generate(uint64_t attempt_seed, const GenParams& p, GridHouse& out) {
  Rng rng(attempt_seed);
  GridHouse h;
  h.width = p.width;
  h.height = p.height;
  h.cells.assign(static_cast<size_t>(p.width) * p.height, CellKind::Free);
  for (int x = 0; x < p.width; ++x) {
    h.cells[x] = CellKind::Wall;
    h.cells[static_cast<size_t>(p.height - 1) * p.width + x] = CellKind::Wall;
  }
  for (int y = 0; y < p.height; ++y) {
    h.cells[static_cast<size_t>(y) * p.width] = CellKind::Wall;
    h.cells[static_cast<size_t>(y) * p.width + p.width - 1] = CellKind::Wall;
  }

  const int room_span = p.rooms_max - p.rooms_min;
  const int rooms = p.rooms_min +
      (room_span > 0 ? static_cast<int>(rng.next_below(room_span + 1)) : 0);
  split_rooms(h.cells, p.width, {1, 1, p.width - 2, p.height - 2}, rooms - 1, rng);

  std::vector<std::pair<int, int>> free_cells;
  for (int y = 0; y < p.height; ++y) {
    for (int x = 0; x < p.width; ++x) {
      if (h.is_free(x, y)) free_cells.emplace_back(x, y);
    }
  }
  if (free_cells.empty()) return false;

  const int n_obj = static_cast<int>(p.object_density * free_cells.size() + 0.5);
  if (n_obj <= 0) return false;

  std::vector<std::pair<int, int>> pool = free_cells;
  for (int i = 0; i < n_obj && !pool.empty(); ++i) {
    const size_t k = rng.next_below(static_cast<uint32_t>(pool.size()));
    const auto [x, y] = pool[k];
    pool.erase(pool.begin() + static_cast<long>(k));
    ObjectSpot spot;
    spot.x = x;
    spot.y = y;
    spot.category = static_cast<int>(rng.next_below(static_cast<uint32_t>(p.categories)));
    spot.landmark = rng.next_bool(p.landmark_fraction);
    h.objects.push_back(spot);
  }
  if (h.objects.empty()) return false;

  h.target_category =
      h.objects[rng.next_below(static_cast<uint32_t>(h.objects.size()))].category;

  // Start on a free cell without an object.
  if (pool.empty()) return false;
  const auto [sx, sy] = pool[rng.next_below(static_cast<uint32_t>(pool.size()))];
  h.start_pose = {sx, sy, static_cast<Heading>(rng.next_below(4))};

  // Validate: every free cell reachable from start, and a target instance exists.
  std::vector<uint8_t> seen(h.cells.size(), 0);
  std::deque<std::pair<int, int>> q;
  q.emplace_back(sx, sy);
  seen[static_cast<size_t>(sy) * p.width + sx] = 1;
  size_t reached = 0;
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop_front();
    ++reached;
    static const int dx[4] = {1, -1, 0, 0};
    static const int dy[4] = {0, 0, 1, -1};
    for (int d = 0; d < 4; ++d) {
      const int nx = x + dx[d], ny = y + dy[d];
      if (!h.is_free(nx, ny)) continue;
      auto& s = seen[static_cast<size_t>(ny) * p.width + nx];
      if (!s) {
        s = 1;
        q.emplace_back(nx, ny);
      }
    }
  }
  if (reached != free_cells.size()) return false;
  if (h.target_cells().empty()) return false;

  out = std::move(h);
  return true;
}

}  // namespace

GridHouse generate_house(uint64_t seed, const GenParams& params) {
  if (params.width < 5 || params.height < 5 || params.categories < 1) {
    throw HouseGenerationError("generate_house: degenerate params");
  }
  for (int attempt = 0; attempt < params.max_retries; ++attempt) {
    GridHouse h;
    if (try_generate(mix_seed(seed, static_cast<uint64_t>(attempt)), params, h)) {
      h.seed = seed;
      h.params = params;
      return h;
    }
  }
  throw HouseGenerationError("generate_house: no valid house after " +
                             std::to_string(params.max_retries) + " attempts");
}

std::vector<int> distance_field(const GridHouse& house,
                                std::span<const std::pair<int, int>> to_set) {
  if (to_set.empty()) throw std::invalid_argument("distance_field: empty target set");
  std::vector<int> dist(house.cells.size(), kInfDistance);
  std::deque<std::pair<int, int>> q;
  for (const auto& [x, y] : to_set) {
    if (!house.in_bounds(x, y)) continue;
    auto& d = dist[static_cast<size_t>(y) * house.width + x];
    if (d != 0) {
      d = 0;
      q.emplace_back(x, y);
    }
  }
  while (!q.empty()) {
    auto [x, y] = q.front();
    q.pop_front();
    const int d = dist[static_cast<size_t>(y) * house.width + x];
    static const int dxs[4] = {1, -1, 0, 0};
    static const int dys[4] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dxs[k], ny = y + dys[k];
      if (!house.is_free(nx, ny)) continue;
      auto& nd = dist[static_cast<size_t>(ny) * house.width + nx];
      if (nd > d + 1) {
        nd = d + 1;
        q.emplace_back(nx, ny);
      }
    }
  }
  return dist;
}

int geodesic_distance(const GridHouse& house, std::pair<int, int> from,
                      std::span<const std::pair<int, int>> to_set) {
  if (to_set.empty()) throw std::invalid_argument("geodesic_distance: empty target set");
  if (!house.is_free(from.first, from.second)) {
    throw std::invalid_argument("geodesic_distance: origin is not a Free cell");
  }
  const auto dist = distance_field(house, to_set);
  return dist[static_cast<size_t>(from.second) * house.width + from.first];
}

std::string house_to_json(const GridHouse& h) {
  nlohmann::json j;
  j["seed"] = h.seed;
  j["params"] = {{"width", h.params.width},
                 {"height", h.params.height},
                 {"rooms_min", h.params.rooms_min},
                 {"rooms_max", h.params.rooms_max},
                 {"object_density", h.params.object_density},
                 {"categories", h.params.categories},
                 {"landmark_fraction", h.params.landmark_fraction},
                 {"max_retries", h.params.max_retries}};
  std::vector<std::string> rows;
  for (int y = 0; y < h.height; ++y) {
    std::string row(static_cast<size_t>(h.width), '.');
    for (int x = 0; x < h.width; ++x) {
      if (h.cell(x, y) == CellKind::Wall) row[static_cast<size_t>(x)] = '#';
    }
    rows.push_back(row);
  }
  j["rows"] = rows;
  auto objs = nlohmann::json::array();
  for (const auto& o : h.objects) {
    objs.push_back({{"x", o.x}, {"y", o.y}, {"cat", o.category}, {"landmark", o.landmark}});
  }
  j["objects"] = objs;
  j["target_category"] = h.target_category;
  j["start"] = {{"x", h.start_pose.x},
                {"y", h.start_pose.y},
                {"heading", static_cast<int>(h.start_pose.heading)}};
  return j.dump();
}

GridHouse house_from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  GridHouse h;
  h.seed = j.at("seed").get<uint64_t>();
  const auto& p = j.at("params");
  h.params.width = p.at("width").get<int>();
  h.params.height = p.at("height").get<int>();
  h.params.rooms_min = p.at("rooms_min").get<int>();
  h.params.rooms_max = p.at("rooms_max").get<int>();
  h.params.object_density = p.at("object_density").get<double>();
  h.params.categories = p.at("categories").get<int>();
  h.params.landmark_fraction = p.at("landmark_fraction").get<double>();
  h.params.max_retries = p.at("max_retries").get<int>();
  const auto rows = j.at("rows").get<std::vector<std::string>>();
  h.height = static_cast<int>(rows.size());
  h.width = h.height > 0 ? static_cast<int>(rows[0].size()) : 0;
  h.cells.assign(static_cast<size_t>(h.width) * h.height, CellKind::Free);
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      if (rows[static_cast<size_t>(y)][static_cast<size_t>(x)] == '#') {
        h.cells[static_cast<size_t>(y) * h.width + x] = CellKind::Wall;
      }
    }
  }
  for (const auto& o : j.at("objects")) {
    h.objects.push_back({o.at("x").get<int>(), o.at("y").get<int>(),
                         o.at("cat").get<int>(), o.at("landmark").get<bool>()});
  }
  h.target_category = j.at("target_category").get<int>();
  const auto& s = j.at("start");
  h.start_pose = {s.at("x").get<int>(), s.at("y").get<int>(),
                  static_cast<Heading>(s.at("heading").get<int>())};
  return h;
}

}  // namespace enav
