#pragma once

#include <span>

namespace enav::tok {

// Action tokens mirror NavAction ids and form a contiguous prefix.
inline constexpr int kMoveAhead = 0;
inline constexpr int kMoveBack = 1;
inline constexpr int kRotateLeft = 2;
inline constexpr int kRotateRight = 3;
inline constexpr int kEnd = 4;

inline constexpr int kTgtVisible = 5;
inline constexpr int kTgtHidden = 6;

inline constexpr int kDirAhead = 7;
inline constexpr int kDirLeft = 8;
inline constexpr int kDirRight = 9;
inline constexpr int kDirBehind = 10;

// Geodesic buckets 0-1, 2-4, 5-9, >=10.
inline constexpr int kDist0 = 11;
inline constexpr int kDist1 = 12;
inline constexpr int kDist2 = 13;
inline constexpr int kDist3 = 14;

inline constexpr int kFrontierAhead = 15;
inline constexpr int kFrontierLeft = 16;
inline constexpr int kFrontierRight = 17;
inline constexpr int kFrontierNone = 18;

inline constexpr int kEot = 19;

inline constexpr int kNumActions = 5;
inline constexpr int kVocabSize = 20;

inline constexpr bool is_action(int t) { return t >= 0 && t < kNumActions; }
inline constexpr bool is_reasoning(int t) { return t >= kTgtVisible && t < kEot; }

const char* token_name(int t);

int dist_bucket(int geodesic);

// Token family (visibility / direction / distance / frontier) bounds for the
// annotator's same-family noise. Returns {first, count}; {-1, 0} for tokens
// outside the four families.
std::pair<int, int> family_of(int t);

// The documented trace-to-action rule: TGT_VISIBLE together with DIST_0
// implies `end`; otherwise the first direction token decides (AHEAD ->
// move_ahead, LEFT -> rotate_left, RIGHT -> rotate_right, BEHIND ->
// rotate_left). Traces without a direction token fall back to move_ahead.
int implied_action(std::span<const int> trace);

}  // namespace enav::tok
