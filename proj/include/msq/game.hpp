#pragma once

#include <cstdint>
#include <vector>

namespace msq::game {

/// Questions of the n-round parallel game: Alice rows and Bob columns,
/// entries in {0,1,2}, one per round.
struct Question {
  std::vector<int> rows;  // Alice
  std::vector<int> cols;  // Bob
};

/// Player answers: two bit vectors per side.  The derived rows
/// a2 = a0 xor a1 and b2 = 1 xor b0 xor b1 are computed on demand.
struct Answer {
  std::vector<int> a0, a1;  // Alice
  std::vector<int> b0, b1;  // Bob
  int a2(size_t k) const { return a0.at(k) ^ a1.at(k); }
  int b2(size_t k) const { return 1 ^ b0.at(k) ^ b1.at(k); }
};

/// Single-round win predicate: a_c == b_r with a2/b2 derived by parity.
bool win_single(int r, int c, int a0, int a1, int b0, int b1);

/// Parallel win predicate: win_single must hold in every round.
bool win_parallel(const Question& q, const Answer& ans);

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
};

struct ClassicalValueResult {
  Rational value;                // max wins / 9, unreduced (e.g. 8/9)
  std::int64_t optimal_pairs;    // deterministic strategy pairs attaining it
  std::int64_t total_pairs;      // 4096
};

/// Exhaustive enumeration of all 4^3 x 4^3 deterministic strategy pairs
/// for the single-round game.  Exact integer counting throughout.
ClassicalValueResult classical_value_single();

}  // namespace msq::game
