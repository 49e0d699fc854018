#include "enav/vocab.hpp"

namespace enav::tok {

const char* token_name(int t) {
  switch (t) {
    case kMoveAhead: return "move_ahead";
    case kMoveBack: return "move_back";
    case kRotateLeft: return "rotate_left";
    case kRotateRight: return "rotate_right";
    case kEnd: return "end";
    case kTgtVisible: return "TGT_VISIBLE";
    case kTgtHidden: return "TGT_HIDDEN";
    case kDirAhead: return "DIR_AHEAD";
    case kDirLeft: return "DIR_LEFT";
    case kDirRight: return "DIR_RIGHT";
    case kDirBehind: return "DIR_BEHIND";
    case kDist0: return "DIST_0";
    case kDist1: return "DIST_1";
    case kDist2: return "DIST_2";
    case kDist3: return "DIST_3";
    case kFrontierAhead: return "FRONTIER_AHEAD";
    case kFrontierLeft: return "FRONTIER_LEFT";
    case kFrontierRight: return "FRONTIER_RIGHT";
    case kFrontierNone: return "FRONTIER_NONE";
    case kEot: return "EOT";
  }
  return "?";
}

int dist_bucket(int geodesic) {
  if (geodesic <= 1) return kDist0;
  if (geodesic <= 4) return kDist1;
  if (geodesic <= 9) return kDist2;
  return kDist3;
}

std::pair<int, int> family_of(int t) {
  if (t == kTgtVisible || t == kTgtHidden) return {kTgtVisible, 2};
  if (t >= kDirAhead && t <= kDirBehind) return {kDirAhead, 4};
  if (t >= kDist0 && t <= kDist3) return {kDist0, 4};
  if (t >= kFrontierAhead && t <= kFrontierNone) return {kFrontierAhead, 4};
  return {-1, 0};
}

int implied_action(std::span<const int> trace) {
  bool visible = false, dist0 = false;
  int dir = -1;
  for (int t : trace) {
    if (t == kTgtVisible) visible = true;
    if (t == kDist0) dist0 = true;
    if (dir < 0 && t >= kDirAhead && t <= kDirBehind) dir = t;
  }
  if (visible && dist0) return kEnd;
  switch (dir) {
    case kDirAhead: return kMoveAhead;
    case kDirLeft: return kRotateLeft;
    case kDirRight: return kRotateRight;
    case kDirBehind: return kRotateLeft;
  }
  return kMoveAhead;
}

}  // namespace enav::tok
