#pragma once

#include <optional>
#include <string>
#include <vector>

#include "enav/navsim.hpp"

namespace enav {

enum class Occ : uint8_t { Unknown = 0, Wall = 1, Free = 2 };

struct Landmark {
  int x = 0;
  int y = 0;
  int category = 0;

  bool operator==(const Landmark&) const = default;
};

// Long-term memory: explored area, occupancy, trajectory, landmark
// annotations. Only landmark-flagged objects and target-category objects are
// annotated. Consecutive duplicate poses (collision steps) collapse in the
// trajectory so repeated updates are idempotent.
struct AnnotatedMap {
  int width = 0;
  int height = 0;
  int target_category = -1;
  std::vector<uint8_t> explored;  // 0/1, row-major
  std::vector<Occ> occupancy;
  std::vector<AgentPose> trajectory;
  std::vector<Landmark> landmarks;
  AgentPose current_pose;

  bool operator==(const AnnotatedMap&) const = default;
};

AnnotatedMap make_map(int width, int height, int target_category);

void update_map(AnnotatedMap& map, const AgentPose& pose, const Observation& obs);

struct FeatureConfig {
  int pool_grid = 8;   // pooled channels are pool_grid x pool_grid
  int pool_span = 16;  // cells covered per side, centered on the agent
  int max_landmarks = 4;

  int feature_length() const {
    return 3 * pool_grid * pool_grid + 4 * max_landmarks + 1;
  }
  bool operator==(const FeatureConfig&) const = default;
};

// Fixed-length featurization: explored/wall/free channels pooled in the
// agent frame (ahead = up, pooled bins rotate with the agent exactly),
// 4 floats per nearest landmark (unit direction in the agent frame,
// 1/(1+distance), target-category flag), then a target-seen flag.
std::vector<double> map_features(const AnnotatedMap& map,
                                 const FeatureConfig& cfg = {});

struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // 3 bytes per pixel, row-major

  std::string to_ppm() const;  // binary P6
  void save_ppm(const std::string& path) const;
};

// Deterministic raster. Overlay, when present, must have one scalar per
// trajectory waypoint except the last (the decision made at that waypoint);
// values are clamped to [0,1] and colored blue (0) to red (1).
Image render_map(const AnnotatedMap& map,
                 const std::vector<double>* overlay = nullptr);

// Synthetic perception-noise model: each landmark independently dropped with
// p_drop, otherwise its category resampled with p_mislabel; explored
// occupancy cells flip Wall<->Free with probability p_mislabel/2.
AnnotatedMap corrupt_map(const AnnotatedMap& map, double p_drop,
                         double p_mislabel, uint64_t seed);

std::string map_to_json(const AnnotatedMap& map);
AnnotatedMap map_from_json(const std::string& line);

}  // namespace enav
