#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "enav/semantic_map.hpp"

using namespace enav;

namespace {

GridHouse tiny_house() {
  GridHouse h;
  const std::vector<std::string> rows = {"#######",
                                         "#.....#",
                                         "#.###.#",
                                         "#..T..#",
                                         "#.o...#",
                                         "#.....#",
                                         "#######"};
  h.height = static_cast<int>(rows.size());
  h.width = static_cast<int>(rows[0].size());
  h.cells.assign(static_cast<size_t>(h.width) * h.height, CellKind::Free);
  for (int y = 0; y < h.height; ++y) {
    for (int x = 0; x < h.width; ++x) {
      const char c = rows[static_cast<size_t>(y)][static_cast<size_t>(x)];
      if (c == '#') h.cells[static_cast<size_t>(y) * h.width + x] = CellKind::Wall;
      if (c == 'T') h.objects.push_back({x, y, 0, true});
      if (c == 'o') h.objects.push_back({x, y, 3, false});  // not a landmark
    }
  }
  h.target_category = 0;
  h.start_pose = {3, 5, Heading::N};
  h.params.categories = 12;
  return h;
}

int non_unknown_cells(const Observation& obs) {
  int n = 0;
  for (const auto& c : obs.cells) {
    if (c.kind != ObsCell::Unknown) ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("first update explores exactly the visible cells") {
  const GridHouse h = tiny_house();
  AnnotatedMap map = make_map(h.width, h.height, h.target_category);
  const Observation obs = observe(h, h.start_pose, {});
  update_map(map, h.start_pose, obs);

  int explored = 0;
  for (const auto e : map.explored) explored += e;
  CHECK(explored == non_unknown_cells(obs));
  CHECK(map.trajectory.size() == 1);
}

TEST_CASE("update_map is idempotent for a repeated (pose, obs) pair") {
  const GridHouse h = tiny_house();
  AnnotatedMap map = make_map(h.width, h.height, h.target_category);
  const Observation obs = observe(h, h.start_pose, {});
  update_map(map, h.start_pose, obs);
  const AnnotatedMap snapshot = map;
  update_map(map, h.start_pose, obs);
  CHECK(map == snapshot);
}

TEST_CASE("landmark and target objects are annotated, distractors are not") {
  const GridHouse h = tiny_house();
  AnnotatedMap map = make_map(h.width, h.height, h.target_category);
  // Stand south of the target looking north: sees T at (3,3) and o at (2,4).
  const AgentPose pose{3, 5, Heading::N};
  update_map(map, pose, observe(h, pose, {}));

  const bool has_target =
      std::find(map.landmarks.begin(), map.landmarks.end(), Landmark{3, 3, 0}) !=
      map.landmarks.end();
  CHECK(has_target);
  for (const auto& lm : map.landmarks) {
    CHECK(lm.category != 3);  // non-landmark distractor never annotated
  }
}

TEST_CASE("explored set never shrinks and trajectory tracks distinct poses") {
  const GridHouse h = tiny_house();
  auto [state, obs] = reset(h);
  AnnotatedMap map = make_map(h.width, h.height, h.target_category);
  update_map(map, state.pose, obs);

  int last_explored = 0;
  const NavAction script[] = {NavAction::RotateLeft, NavAction::MoveAhead,
                              NavAction::RotateRight, NavAction::MoveAhead,
                              NavAction::RotateRight, NavAction::MoveAhead};
  int applied = 0;
  for (const NavAction a : script) {
    const StepOutcome out = step(state, a);
    update_map(map, state.pose, out.observation);
    int explored = 0;
    for (const auto e : map.explored) explored += e;
    CHECK(explored >= last_explored);
    last_explored = explored;
    ++applied;
  }
  // No collisions in the script, so every step added a pose.
  CHECK(map.trajectory.size() == static_cast<size_t>(applied) + 1);
}

TEST_CASE("map_features length is fixed and empty maps featurize to zero") {
  const FeatureConfig cfg;
  AnnotatedMap small = make_map(7, 7, 0);
  AnnotatedMap big = make_map(31, 23, 0);
  const auto fs = map_features(small, cfg);
  const auto fb = map_features(big, cfg);
  CHECK(fs.size() == static_cast<size_t>(cfg.feature_length()));
  CHECK(fb.size() == fs.size());
  for (const double v : fs) CHECK(v == 0.0);
  CHECK(fs.back() == 0.0);  // target-seen flag
}

TEST_CASE("target landmark sets the target-seen flag") {
  AnnotatedMap map = make_map(9, 9, 2);
  map.current_pose = {4, 4, Heading::N};
  map.landmarks.push_back({1, 1, 2});
  const auto f = map_features(map);
  CHECK(f.back() == 1.0);
}

TEST_CASE("rotating the agent rotates the pooled channels exactly") {
  AnnotatedMap map = make_map(24, 24, 0);
  // Scatter deterministic structure around the probe cell.
  for (int y = 0; y < 24; ++y) {
    for (int x = 0; x < 24; ++x) {
      const size_t i = static_cast<size_t>(y) * 24 + x;
      if ((x * 7 + y * 3) % 5 == 0) {
        map.explored[i] = 1;
        map.occupancy[i] = (x + y) % 3 == 0 ? Occ::Wall : Occ::Free;
      }
    }
  }
  const FeatureConfig cfg;
  map.current_pose = {12, 12, Heading::N};
  const auto f_n = map_features(map, cfg);
  map.current_pose = {12, 12, Heading::W};
  const auto f_w = map_features(map, cfg);

  // Turning left (N -> W) maps channel cell (bi, bj) to (g-1-bj, bi): what
  // was ahead is now to the right. Derivation: sampling offsets obey
  // pf' = -pr, pr' = pf, and the half-integer lattice makes this exact.
  const int g = cfg.pool_grid;
  for (int ch = 0; ch < 3; ++ch) {
    for (int bi = 0; bi < g; ++bi) {
      for (int bj = 0; bj < g; ++bj) {
        const double from_n = f_n[static_cast<size_t>(ch * g * g + bi * g + bj)];
        const double from_w =
            f_w[static_cast<size_t>(ch * g * g + (g - 1 - bj) * g + bi)];
        CHECK(from_w == doctest::Approx(from_n).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("render_map overlay contract") {
  const GridHouse h = tiny_house();
  auto [state, obs] = reset(h);
  AnnotatedMap map = make_map(h.width, h.height, h.target_category);
  update_map(map, state.pose, obs);
  step(state, NavAction::MoveAhead);  // distinct cell, so markers do not overlap
  update_map(map, state.pose, observe(h, state.pose, {}));

  SUBCASE("length mismatch raises") {
    const std::vector<double> wrong(5, 0.0);
    CHECK_THROWS_AS(render_map(map, &wrong), std::invalid_argument);
  }

  SUBCASE("all-zero overlay paints waypoints in the scale minimum (blue)") {
    const std::vector<double> zeros(map.trajectory.size() - 1, 0.0);
    const Image img = render_map(map, &zeros);
    const int cx = map.trajectory[0].x * 8 + 4;
    const int cy = map.trajectory[0].y * 8 + 4;
    const size_t px = (static_cast<size_t>(cy) * img.width + cx) * 3;
    CHECK(img.rgb[px] == 0);        // red channel
    CHECK(img.rgb[px + 2] == 255);  // blue channel
  }
}

TEST_CASE("render_map matches the pinned golden image") {
  const GridHouse h = tiny_house();
  auto [state, obs] = reset(h);
  AnnotatedMap map = make_map(h.width, h.height, h.target_category);
  update_map(map, state.pose, obs);
  const NavAction script[] = {NavAction::RotateLeft, NavAction::MoveAhead,
                              NavAction::RotateRight, NavAction::MoveAhead};
  std::vector<double> overlay;
  for (const NavAction a : script) {
    const StepOutcome out = step(state, a);
    update_map(map, state.pose, out.observation);
    overlay.push_back(0.25 * static_cast<double>(overlay.size()));
  }
  const Image img = render_map(map, &overlay);
  const std::string bytes = img.to_ppm();

  const std::string golden_path = std::string(ENAV_SOURCE_DIR) + "/tests/golden/fixture_map.ppm";
  if (!std::filesystem::exists(golden_path)) {
    img.save_ppm(golden_path);
    FAIL("golden image was missing; created " << golden_path << ", rerun");
  }
  std::ifstream f(golden_path, std::ios::binary);
  const std::string golden((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  CHECK(bytes == golden);
}

TEST_CASE("corrupt_map trivia and binomial drop count") {
  AnnotatedMap map = make_map(40, 40, 1);
  map.current_pose = {20, 20, Heading::N};
  for (int i = 0; i < 1000; ++i) {
    map.landmarks.push_back({i % 40, i / 40 % 40, i % 5});
  }
  for (size_t i = 0; i < map.explored.size(); ++i) {
    map.explored[i] = 1;
    map.occupancy[i] = i % 4 == 0 ? Occ::Wall : Occ::Free;
  }

  SUBCASE("zero probabilities preserve the map") {
    CHECK(corrupt_map(map, 0.0, 0.0, 9) == map);
  }
  SUBCASE("p_drop = 1 clears all landmarks") {
    CHECK(corrupt_map(map, 1.0, 0.0, 9).landmarks.empty());
  }
  SUBCASE("p_drop = 0.5 drops a binomially plausible count") {
    const auto noisy = corrupt_map(map, 0.5, 0.0, 1234);
    const double dropped = 1000.0 - static_cast<double>(noisy.landmarks.size());
    const double sigma = std::sqrt(1000.0 * 0.25);
    CHECK(std::abs(dropped - 500.0) <= 3.0 * sigma);
  }
  SUBCASE("deterministic in the seed") {
    CHECK(corrupt_map(map, 0.3, 0.2, 77) == corrupt_map(map, 0.3, 0.2, 77));
  }
}

TEST_CASE("map snapshots serialize through line-delimited json") {
  const GridHouse h = tiny_house();
  auto [state, obs] = reset(h);
  AnnotatedMap map = make_map(h.width, h.height, h.target_category);
  update_map(map, state.pose, obs);
  const AnnotatedMap back = map_from_json(map_to_json(map));
  CHECK(back == map);
}
