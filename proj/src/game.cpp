#include "msq/game.hpp"

#include <array>

#include "msq/tensor_core.hpp"

namespace msq::game {

bool win_single(int r, int c, int a0, int a1, int b0, int b1) {
  if (r < 0 || r > 2 || c < 0 || c > 2) throw ContractError("win_single: question out of range");
  if ((a0 | a1 | b0 | b1) & ~1) throw ContractError("win_single: answer bits out of range");
  const std::array<int, 3> a = {a0, a1, a0 ^ a1};
  const std::array<int, 3> b = {b0, b1, 1 ^ b0 ^ b1};
  return a[c] == b[r];
}

bool win_parallel(const Question& q, const Answer& ans) {
  const size_t n = q.rows.size();
  if (q.cols.size() != n || ans.a0.size() != n || ans.a1.size() != n || ans.b0.size() != n ||
      ans.b1.size() != n) {
    throw ContractError("win_parallel: inconsistent vector lengths");
  }
  for (size_t k = 0; k < n; ++k) {
    if (!win_single(q.rows[k], q.cols[k], ans.a0[k], ans.a1[k], ans.b0[k], ans.b1[k])) return false;
  }
  return true;
}

ClassicalValueResult classical_value_single() {
  // A deterministic strategy per player is a map {0,1,2} -> {0,1}^2,
  // i.e. one of 4^3 = 64 answer functions.  Encode as two bits per input.
  int best = 0;
  std::int64_t best_count = 0;
  for (int fa = 0; fa < 64; ++fa) {
    for (int fb = 0; fb < 64; ++fb) {
      int wins = 0;
      for (int r = 0; r < 3; ++r) {
        const int a0 = (fa >> (2 * r)) & 1;
        const int a1 = (fa >> (2 * r + 1)) & 1;
        for (int c = 0; c < 3; ++c) {
          const int b0 = (fb >> (2 * c)) & 1;
          const int b1 = (fb >> (2 * c + 1)) & 1;
          if (win_single(r, c, a0, a1, b0, b1)) ++wins;
        }
      }
      if (wins == 9) throw ContractError("classical enumeration found a perfect strategy");
      if (wins > best) {
        best = wins;
        best_count = 1;
      } else if (wins == best) {
        ++best_count;
      }
    }
  }
  return ClassicalValueResult{Rational{best, 9}, best_count, 64 * 64};
}

}  // namespace msq::game
