#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace enav {

enum class CellKind : uint8_t { Wall = 0, Free = 1 };

// Compass headings; rotate_left steps N->W->S->E, rotate_right the reverse.
enum class Heading : uint8_t { N = 0, E = 1, S = 2, W = 3 };

Heading turn_left(Heading h);
Heading turn_right(Heading h);
// Unit vectors in grid coordinates (x grows east, y grows south).
void heading_delta(Heading h, int& dx, int& dy);
// Right-hand unit vector for a heading.
void right_delta(Heading h, int& dx, int& dy);
const char* heading_name(Heading h);

struct AgentPose {
  int x = 0;
  int y = 0;
  Heading heading = Heading::N;

  bool operator==(const AgentPose&) const = default;
};

enum class NavAction : uint8_t {
  MoveAhead = 0,
  MoveBack = 1,
  RotateLeft = 2,
  RotateRight = 3,
  End = 4,
};
inline constexpr int kNumNavActions = 5;
const char* action_name(NavAction a);

struct ObjectSpot {
  int x = 0;
  int y = 0;
  int category = 0;
  bool landmark = false;

  bool operator==(const ObjectSpot&) const = default;
};

struct GenParams {
  int width = 16;
  int height = 16;
  int rooms_min = 3;
  int rooms_max = 6;
  double object_density = 0.06;  // objects per free cell
  int categories = 12;
  double landmark_fraction = 0.5;
  int max_retries = 64;

  bool operator==(const GenParams&) const = default;
};

// Immutable once generated; shareable across episode workers.
struct GridHouse {
  int width = 0;
  int height = 0;
  std::vector<CellKind> cells;  // row-major, y * width + x
  std::vector<ObjectSpot> objects;
  int target_category = 0;
  AgentPose start_pose;
  uint64_t seed = 0;
  GenParams params;

  bool in_bounds(int x, int y) const {
    return x >= 0 && x < width && y >= 0 && y < height;
  }
  CellKind cell(int x, int y) const {
    if (!in_bounds(x, y)) return CellKind::Wall;
    return cells[static_cast<size_t>(y) * width + x];
  }
  bool is_free(int x, int y) const { return cell(x, y) == CellKind::Free; }
  std::vector<std::pair<int, int>> target_cells() const;

  bool operator==(const GridHouse&) const = default;
};

struct HouseGenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Deterministic in (seed, params); throws HouseGenerationError when params
// cannot yield a valid house within params.max_retries attempts.
GridHouse generate_house(uint64_t seed, const GenParams& params = {});

// BFS step count over Free cells from `from` to the nearest cell in
// `to_set`; kInfDistance when unreachable. Throws on an empty to_set or a
// non-Free origin.
inline constexpr int kInfDistance = 1 << 28;
int geodesic_distance(const GridHouse& house, std::pair<int, int> from,
                      std::span<const std::pair<int, int>> to_set);

// Multi-source BFS field from to_set over Free cells (kInfDistance where
// unreachable); used by the reward shaping and the oracles.
std::vector<int> distance_field(const GridHouse& house,
                                std::span<const std::pair<int, int>> to_set);

// One line-delimited JSON record per house: {seed, params, rows, objects,
// start, target_category}.
std::string house_to_json(const GridHouse& house);
GridHouse house_from_json(const std::string& line);

}  // namespace enav
