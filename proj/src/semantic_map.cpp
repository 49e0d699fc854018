#include "enav/semantic_map.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "enav/rng.hpp"
#include "json.hpp"

namespace enav {

AnnotatedMap make_map(int width, int height, int target_category) {
  AnnotatedMap m;
  m.width = width;
  m.height = height;
  m.target_category = target_category;
  m.explored.assign(static_cast<size_t>(width) * height, 0);
  m.occupancy.assign(static_cast<size_t>(width) * height, Occ::Unknown);
  return m;
}

void update_map(AnnotatedMap& map, const AgentPose& pose, const Observation& obs) {
  if (pose.x < 0 || pose.x >= map.width || pose.y < 0 || pose.y >= map.height) {
    throw std::invalid_argument("update_map: pose outside map bounds");
  }
  int fx, fy, rx, ry;
  heading_delta(pose.heading, fx, fy);
  right_delta(pose.heading, rx, ry);
  const int half = obs.wide / 2;

  for (int r = 0; r < obs.deep; ++r) {
    for (int c = 0; c < obs.wide; ++c) {
      const ObsCell& cell = obs.at(r, c);
      if (cell.kind == ObsCell::Unknown) continue;
      const int depth = r + 1;
      const int lat = c - half;
      const int x = pose.x + depth * fx + lat * rx;
      const int y = pose.y + depth * fy + lat * ry;
      if (x < 0 || x >= map.width || y < 0 || y >= map.height) {
        throw std::invalid_argument("update_map: observation projects outside map");
      }
      const size_t idx = static_cast<size_t>(y) * map.width + x;
      map.explored[idx] = 1;
      map.occupancy[idx] = cell.kind == ObsCell::Wall ? Occ::Wall : Occ::Free;
      const bool annotate =
          cell.kind == ObsCell::Object &&
          (cell.landmark || cell.category == map.target_category);
      if (annotate) {
        const Landmark lm{x, y, cell.category};
        if (std::find(map.landmarks.begin(), map.landmarks.end(), lm) ==
            map.landmarks.end()) {
          map.landmarks.push_back(lm);
        }
      }
    }
  }

  if (map.trajectory.empty() || !(map.trajectory.back() == pose)) {
    map.trajectory.push_back(pose);
  }
  map.current_pose = pose;
}

std::vector<double> map_features(const AnnotatedMap& map, const FeatureConfig& cfg) {
  std::vector<double> out(static_cast<size_t>(cfg.feature_length()), 0.0);

  const AgentPose& pose = map.current_pose;
  int fx, fy, rx, ry;
  heading_delta(pose.heading, fx, fy);
  right_delta(pose.heading, rx, ry);

  const int grid = cfg.pool_grid;
  const int span = cfg.pool_span;
  const int block = span / grid;
  const double center = span / 2.0 - 0.5;  // half-integer offsets, closed under 90-degree turns
  const int n_bins = grid * grid;

  for (int bi = 0; bi < grid; ++bi) {
    for (int bj = 0; bj < grid; ++bj) {
      double explored = 0, wall = 0, free = 0;
      for (int u = 0; u < block; ++u) {
        for (int v = 0; v < block; ++v) {
          const double pf = (bi * block + u) - center;  // forward offset
          const double pr = (bj * block + v) - center;  // rightward offset
          const double dx = pf * fx + pr * rx;
          const double dy = pf * fy + pr * ry;
          const int x = pose.x + static_cast<int>(std::floor(dx));
          const int y = pose.y + static_cast<int>(std::floor(dy));
          if (x < 0 || x >= map.width || y < 0 || y >= map.height) continue;
          const size_t idx = static_cast<size_t>(y) * map.width + x;
          explored += map.explored[idx] ? 1.0 : 0.0;
          wall += map.occupancy[idx] == Occ::Wall ? 1.0 : 0.0;
          free += map.occupancy[idx] == Occ::Free ? 1.0 : 0.0;
        }
      }
      const double denom = block * block;
      const size_t bin = static_cast<size_t>(bi) * grid + bj;
      out[bin] = explored / denom;
      out[n_bins + bin] = wall / denom;
      out[2 * n_bins + bin] = free / denom;
    }
  }

  // Nearest landmarks, deterministic order: (distance, x, y, category).
  struct Near {
    double dist;
    Landmark lm;
  };
  std::vector<Near> near;
  near.reserve(map.landmarks.size());
  for (const auto& lm : map.landmarks) {
    const double dx = lm.x - pose.x;
    const double dy = lm.y - pose.y;
    near.push_back({std::sqrt(dx * dx + dy * dy), lm});
  }
  std::sort(near.begin(), near.end(), [](const Near& a, const Near& b) {
    if (a.dist != b.dist) return a.dist < b.dist;
    if (a.lm.x != b.lm.x) return a.lm.x < b.lm.x;
    if (a.lm.y != b.lm.y) return a.lm.y < b.lm.y;
    return a.lm.category < b.lm.category;
  });

  const size_t lm_base = static_cast<size_t>(3 * n_bins);
  bool target_seen = false;
  for (const auto& lm : map.landmarks) {
    if (lm.category == map.target_category) target_seen = true;
  }
  for (int s = 0; s < cfg.max_landmarks && s < static_cast<int>(near.size()); ++s) {
    const auto& n = near[static_cast<size_t>(s)];
    const double dx = n.lm.x - pose.x;
    const double dy = n.lm.y - pose.y;
    const double f = dx * fx + dy * fy;
    const double r = dx * rx + dy * ry;
    const double norm = std::max(n.dist, 1.0);
    const size_t base = lm_base + static_cast<size_t>(s) * 4;
    out[base + 0] = f / norm;
    out[base + 1] = r / norm;
    out[base + 2] = 1.0 / (1.0 + n.dist);
    out[base + 3] = n.lm.category == map.target_category ? 1.0 : 0.0;
  }
  out[static_cast<size_t>(cfg.feature_length()) - 1] = target_seen ? 1.0 : 0.0;
  return out;
}

namespace {

constexpr int kCellPx = 8;

struct Color {
  uint8_t r, g, b;
};

constexpr Color kUnexplored{16, 16, 16};
constexpr Color kFree{220, 220, 220};
constexpr Color kWall{70, 70, 70};
constexpr Color kLandmark{60, 90, 220};
constexpr Color kTargetLandmark{40, 180, 90};
constexpr Color kTrajectory{120, 120, 120};
constexpr Color kAgent{255, 255, 255};

Color heat(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return {static_cast<uint8_t>(std::lround(255.0 * v)), 0,
          static_cast<uint8_t>(std::lround(255.0 * (1.0 - v)))};
}

void put(Image& img, int px, int py, Color c) {
  if (px < 0 || px >= img.width || py < 0 || py >= img.height) return;
  const size_t i = (static_cast<size_t>(py) * img.width + px) * 3;
  img.rgb[i] = c.r;
  img.rgb[i + 1] = c.g;
  img.rgb[i + 2] = c.b;
}

void fill_cell(Image& img, int cx, int cy, Color c, int inset = 0) {
  for (int y = cy * kCellPx + inset; y < (cy + 1) * kCellPx - inset; ++y) {
    for (int x = cx * kCellPx + inset; x < (cx + 1) * kCellPx - inset; ++x) {
      put(img, x, y, c);
    }
  }
}

void draw_line(Image& img, int x0, int y0, int x1, int y1, Color c) {
  const int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
  const int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  while (true) {
    put(img, x0, y0, c);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

}  // namespace

std::string Image::to_ppm() const {
  std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(rgb.data()), rgb.size());
  return out;
}

void Image::save_ppm(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("save_ppm: cannot open " + path);
  const std::string bytes = to_ppm();
  f.write(bytes.data(), static_cast<long>(bytes.size()));
}

Image render_map(const AnnotatedMap& map, const std::vector<double>* overlay) {
  if (overlay && map.trajectory.size() >= 1 &&
      overlay->size() != map.trajectory.size() - 1) {
    throw std::invalid_argument("render_map: overlay length must be trajectory length - 1");
  }
  if (overlay && map.trajectory.empty() && !overlay->empty()) {
    throw std::invalid_argument("render_map: overlay without trajectory");
  }

  Image img;
  img.width = map.width * kCellPx;
  img.height = map.height * kCellPx;
  img.rgb.assign(static_cast<size_t>(img.width) * img.height * 3, 0);

  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const size_t idx = static_cast<size_t>(y) * map.width + x;
      Color c = kUnexplored;
      if (map.explored[idx]) {
        c = map.occupancy[idx] == Occ::Wall ? kWall : kFree;
      }
      fill_cell(img, x, y, c);
    }
  }
  for (const auto& lm : map.landmarks) {
    fill_cell(img, lm.x, lm.y, lm.category == map.target_category ? kTargetLandmark : kLandmark, 1);
  }
  auto cpx = [](int cell) { return cell * kCellPx + kCellPx / 2; };
  for (size_t i = 1; i < map.trajectory.size(); ++i) {
    draw_line(img, cpx(map.trajectory[i - 1].x), cpx(map.trajectory[i - 1].y),
              cpx(map.trajectory[i].x), cpx(map.trajectory[i].y), kTrajectory);
  }
  for (size_t i = 0; i + 1 < map.trajectory.size(); ++i) {
    const Color c = overlay ? heat((*overlay)[i]) : kTrajectory;
    const int x = cpx(map.trajectory[i].x), y = cpx(map.trajectory[i].y);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) put(img, x + dx, y + dy, c);
    }
  }
  if (!map.trajectory.empty()) {
    const int x = cpx(map.trajectory.back().x), y = cpx(map.trajectory.back().y);
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) put(img, x + dx, y + dy, kAgent);
    }
  }
  return img;
}

AnnotatedMap corrupt_map(const AnnotatedMap& map, double p_drop,
                         double p_mislabel, uint64_t seed) {
  if (p_drop < 0 || p_drop > 1 || p_mislabel < 0 || p_mislabel > 1) {
    throw std::invalid_argument("corrupt_map: probabilities must lie in [0,1]");
  }
  AnnotatedMap out = map;
  Rng rng(seed);

  out.landmarks.clear();
  int max_cat = map.target_category;
  for (const auto& lm : map.landmarks) max_cat = std::max(max_cat, lm.category);
  for (const auto& lm : map.landmarks) {
    if (rng.next_bool(p_drop)) continue;
    Landmark kept = lm;
    if (rng.next_bool(p_mislabel)) {
      kept.category = static_cast<int>(rng.next_below(static_cast<uint32_t>(max_cat + 1)));
    }
    out.landmarks.push_back(kept);
  }

  for (size_t i = 0; i < out.occupancy.size(); ++i) {
    if (!out.explored[i]) continue;
    if (rng.next_bool(p_mislabel / 2.0)) {
      out.occupancy[i] = out.occupancy[i] == Occ::Wall ? Occ::Free : Occ::Wall;
    }
  }
  return out;
}

std::string map_to_json(const AnnotatedMap& m) {
  nlohmann::json j;
  j["width"] = m.width;
  j["height"] = m.height;
  j["target_category"] = m.target_category;
  std::string explored(m.explored.size(), '0');
  std::string occ(m.occupancy.size(), 'u');
  for (size_t i = 0; i < m.explored.size(); ++i) {
    if (m.explored[i]) explored[i] = '1';
    if (m.occupancy[i] == Occ::Wall) occ[i] = '#';
    else if (m.occupancy[i] == Occ::Free) occ[i] = '.';
  }
  j["explored"] = explored;
  j["occupancy"] = occ;
  auto traj = nlohmann::json::array();
  for (const auto& p : m.trajectory) {
    traj.push_back({p.x, p.y, static_cast<int>(p.heading)});
  }
  j["trajectory"] = traj;
  auto lms = nlohmann::json::array();
  for (const auto& lm : m.landmarks) lms.push_back({lm.x, lm.y, lm.category});
  j["landmarks"] = lms;
  j["pose"] = {m.current_pose.x, m.current_pose.y, static_cast<int>(m.current_pose.heading)};
  return j.dump();
}

AnnotatedMap map_from_json(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  AnnotatedMap m = make_map(j.at("width").get<int>(), j.at("height").get<int>(),
                            j.at("target_category").get<int>());
  const auto explored = j.at("explored").get<std::string>();
  const auto occ = j.at("occupancy").get<std::string>();
  for (size_t i = 0; i < m.explored.size() && i < explored.size(); ++i) {
    m.explored[i] = explored[i] == '1' ? 1 : 0;
    m.occupancy[i] = occ[i] == '#' ? Occ::Wall : (occ[i] == '.' ? Occ::Free : Occ::Unknown);
  }
  for (const auto& p : j.at("trajectory")) {
    m.trajectory.push_back({p[0].get<int>(), p[1].get<int>(),
                            static_cast<Heading>(p[2].get<int>())});
  }
  for (const auto& lm : j.at("landmarks")) {
    m.landmarks.push_back({lm[0].get<int>(), lm[1].get<int>(), lm[2].get<int>()});
  }
  const auto& p = j.at("pose");
  m.current_pose = {p[0].get<int>(), p[1].get<int>(), static_cast<Heading>(p[2].get<int>())};
  return m;
}

}  // namespace enav
