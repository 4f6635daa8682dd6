#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "msq/game.hpp"
#include "msq/tensor_core.hpp"

using namespace msq;
using namespace msq::game;

TEST_CASE("single-round win predicate") {
  CHECK(win_single(0, 0, 0, 0, 0, 0));        // a0 = b0 = 0
  CHECK_FALSE(win_single(2, 2, 0, 0, 0, 0));  // a2 = 0, b2 = 1
  CHECK_FALSE(win_single(1, 2, 0, 1, 1, 0));  // a_c = a2 = 1, b_r = b1 = 0
  CHECK_THROWS_AS(win_single(3, 0, 0, 0, 0, 0), ContractError);
  CHECK_THROWS_AS(win_single(0, 0, 2, 0, 0, 0), ContractError);
}

TEST_CASE("parity rows are derived on demand") {
  Answer ans;
  ans.a0 = {1};
  ans.a1 = {1};
  ans.b0 = {0};
  ans.b1 = {1};
  CHECK(ans.a2(0) == 0);
  CHECK(ans.b2(0) == 0);
}

TEST_CASE("parallel predicate reduces to the single-round one at n = 1") {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      for (int bits = 0; bits < 16; ++bits) {
        const int a0 = bits & 1, a1 = (bits >> 1) & 1, b0 = (bits >> 2) & 1, b1 = (bits >> 3) & 1;
        Question q{{r}, {c}};
        Answer ans{{a0}, {a1}, {b0}, {b1}};
        CHECK(win_parallel(q, ans) == win_single(r, c, a0, a1, b0, b1));
      }
}

TEST_CASE("parallel predicate is a conjunction over rounds") {
  // round 1 wins, round 2 loses
  Question q{{0, 2}, {0, 2}};
  Answer ans{{0, 0}, {0, 0}, {0, 0}, {0, 0}};
  CHECK_FALSE(win_parallel(q, ans));
  Question q2{{0, 0}, {0, 0}};
  CHECK(win_parallel(q2, ans));
  Answer bad{{0}, {0}, {0}, {0}};
  CHECK_THROWS_AS(win_parallel(q, bad), ContractError);
}

TEST_CASE("winning tuple count matches a direct enumeration oracle") {
  long via_predicate = 0;
  long via_oracle = 0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      for (int a0 = 0; a0 < 2; ++a0)
        for (int a1 = 0; a1 < 2; ++a1)
          for (int b0 = 0; b0 < 2; ++b0)
            for (int b1 = 0; b1 < 2; ++b1) {
              if (win_single(r, c, a0, a1, b0, b1)) ++via_predicate;
              // independent restatement of the rules
              const int arow[3] = {a0, a1, a0 ^ a1};
              const int brow[3] = {b0, b1, 1 ^ b0 ^ b1};
              if (arow[c] == brow[r]) ++via_oracle;
            }
  CHECK(via_predicate == via_oracle);
  // 16 answer combinations per question, exactly half of them winning
  CHECK(via_predicate == 9 * 8);
}

TEST_CASE("classical value is exactly 8/9") {
  const auto res = classical_value_single();
  CHECK(res.value.num == 8);
  CHECK(res.value.den == 9);
  CHECK(res.total_pairs == 4096);
  CHECK(res.optimal_pairs > 0);
}

TEST_CASE("the all-zeros strategy pair wins 6 of 9 questions") {
  // both players answer (0,0) everywhere; hand evaluation: a_c = 0 always,
  // b_r = 0 for r in {0,1} and 1 for r = 2, so exactly rows 0 and 1 win
  int wins = 0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (win_single(r, c, 0, 0, 0, 0)) ++wins;
  CHECK(wins == 6);
}
