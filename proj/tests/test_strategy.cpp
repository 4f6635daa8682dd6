#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "msq/game.hpp"
#include "msq/random_gen.hpp"
#include "msq/strategy.hpp"

using namespace msq;

namespace {

bool mats_identical(const Mat& a, const Mat& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
  for (long j = 0; j < a.cols(); ++j)
    for (long i = 0; i < a.rows(); ++i)
      if (a(i, j) != b(i, j)) return false;
  return true;
}

bool strategies_identical(const PureStrategy& a, const PureStrategy& b) {
  if (a.n != b.n) return false;
  for (long i = 0; i < a.psi.amps.size(); ++i)
    if (a.psi.amps[i] != b.psi.amps[i]) return false;
  if (a.is_product() != b.is_product()) return false;
  if (a.is_product()) {
    for (int k = 0; k < a.n; ++k)
      for (int q = 0; q < 3; ++q)
        for (int x = 0; x < 4; ++x) {
          if (!mats_identical(a.rounds_a[k].proj[q][x], b.rounds_a[k].proj[q][x])) return false;
          if (!mats_identical(a.rounds_b[k].proj[q][x], b.rounds_b[k].proj[q][x])) return false;
        }
  }
  return true;
}

// best deterministic strategy pair found by the game-module enumeration
std::pair<int, int> best_classical_pair() {
  for (int fa = 0; fa < 64; ++fa)
    for (int fb = 0; fb < 64; ++fb) {
      int wins = 0;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          if (game::win_single(r, c, (fa >> (2 * r)) & 1, (fa >> (2 * r + 1)) & 1,
                               (fb >> (2 * c)) & 1, (fb >> (2 * c + 1)) & 1))
            ++wins;
      if (wins == 8) return {fa, fb};
    }
  return {-1, -1};
}

}  // namespace

TEST_CASE("ideal single round wins with certainty") {
  const PureStrategy s = ideal_single_round();
  s.validate();
  CHECK(win_probability(s) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ideal projector ranks: row-0 family is rank 4 on the joint space") {
  const PureStrategy s = ideal_single_round();
  for (int a = 0; a < 4; ++a) {
    const Mat p = s.projector(Side::alice, 0, a);
    const Mat joint = kron_dense(p, identity_mat(4));
    const auto eig = hermitian_eig(joint);
    int rank = 0;
    for (long i = 0; i < eig.values.size(); ++i)
      if (eig.values[i] > 0.5) ++rank;
    CHECK(rank == 4);  // rank-1 on Alice times the full Bob dimension
  }
}

TEST_CASE("ZZ row-0/column-2 cell consistency on the ideal state") {
  const PureStrategy s = ideal_single_round();
  // parity-selector observables for the (0,2) cell on both sides
  const Mat za = s.block_observable(Side::alice, {0}, {2}, {1});
  const Mat zb = s.block_observable(Side::bob, {2}, {0}, {1});
  const Mat psi = s.psi_matrix();
  const cdouble v = (psi.conjugate().cwiseProduct(za * psi * zb.transpose())).sum();
  CHECK(v.real() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ideal_parallel(1) coincides with the single-round strategy") {
  CHECK(strategies_identical(ideal_parallel(1), ideal_single_round()));
}

TEST_CASE("ideal_parallel wins for n = 2 and has joint dimension 4096 at n = 3") {
  CHECK(win_probability(ideal_parallel(2)) == doctest::Approx(1.0).epsilon(1e-12));
  const PureStrategy s3 = ideal_parallel(3);
  CHECK(s3.psi.amps.size() == 4096);
  CHECK_THROWS_AS(ideal_parallel(4), FeasibilityError);
}

TEST_CASE("product and general win probabilities agree") {
  const PureStrategy prod = perturb(ideal_parallel(2), 2e-3, 5, PerturbKind::both);
  const PureStrategy gen = to_general(prod);
  CHECK_FALSE(gen.is_product());
  CHECK(win_probability(prod) == doctest::Approx(win_probability(gen)).epsilon(1e-12));
}

TEST_CASE("classical embedding of the best deterministic strategy scores 8/9") {
  const auto [fa, fb] = best_classical_pair();
  REQUIRE(fa >= 0);
  const PureStrategy s = classical_embedding(fa, fb);
  s.validate();
  CHECK(win_probability(s) == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
}

TEST_CASE("ideal transcripts always satisfy the referee") {
  // sample measurement outcomes per question with the Born rule and feed
  // the transcript to the parallel referee
  const PureStrategy s = ideal_single_round();
  const Mat psi = s.psi_matrix();
  RandomGen rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int r = static_cast<int>(rng.below(3));
    const int c = static_cast<int>(rng.below(3));
    double x = rng.uniform();
    int picked_a = -1, picked_b = -1;
    for (int a = 0; a < 4 && picked_a < 0; ++a) {
      for (int b = 0; b < 4; ++b) {
        const Mat pa = s.projector(Side::alice, r, a);
        const Mat qb = s.projector(Side::bob, c, b);
        const double pr =
            std::real((psi.conjugate().cwiseProduct(pa * psi * qb.transpose())).sum());
        x -= pr;
        if (x <= 0) {
          picked_a = a;
          picked_b = b;
          break;
        }
      }
    }
    if (picked_a < 0) continue;  // numerical tail
    game::Question q{{r}, {c}};
    game::Answer ans{{picked_a & 1}, {picked_a >> 1}, {picked_b & 1}, {picked_b >> 1}};
    CHECK(game::win_parallel(q, ans));
  }
}

TEST_CASE("output observable with empty parity is the identity") {
  const PureStrategy s = ideal_parallel(2);
  const auto obs = output_observable(s, Side::alice, {0, 1}, {0, 0}, {2, 2});
  CHECK(max_abs(obs.op.densify() - Mat::Identity(256, 256)) < 1e-12);
}

TEST_CASE("output observable for the (0,0) cell is Z on the first Alice qubit") {
  const PureStrategy s = ideal_single_round();
  const Mat a = s.block_observable(Side::alice, {0}, {0}, {1});
  CHECK(max_abs(a - kron_dense(pauli_z(), identity_mat(2))) < 1e-12);
}

TEST_CASE("output observables are Hermitian unitary involutions") {
  const PureStrategy s = perturb(ideal_parallel(2), 1e-3, 3, PerturbKind::measurement_rotate);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      const auto obs = output_observable(s, Side::alice, {r, (r + 1) % 3}, {1, 1}, {c, c});
      const Mat block = s.block_observable(Side::alice, {r, (r + 1) % 3}, {c, c}, {1, 1});
      CHECK(is_hermitian(block));
      CHECK(max_abs(block * block - Mat::Identity(16, 16)) <= 1e-10);
      (void)obs;
    }
}

TEST_CASE("single-round observables ignore the other side's tag on unused rounds") {
  const PureStrategy s = perturb(ideal_parallel(2), 1e-3, 11, PerturbKind::measurement_rotate);
  // parity e_0: changing c_1 must not change the operator at all
  const Mat a1 = s.block_observable(Side::alice, {1, 2}, {0, 0}, {1, 0});
  const Mat a2 = s.block_observable(Side::alice, {1, 2}, {0, 2}, {1, 0});
  CHECK(mats_identical(a1, a2));
  // product strategies depend only on (r_k, c_k): vary r on the other round
  const Mat a3 = s.block_observable(Side::alice, {1, 0}, {0, 1}, {1, 0});
  const Mat a4 = s.block_observable(Side::alice, {1, 2}, {0, 1}, {1, 0});
  CHECK(mats_identical(a3, a4));
}

TEST_CASE("correlation is 1 for the ideal strategy and exactly 1 at p = 0") {
  const PureStrategy s = ideal_parallel(2);
  CHECK(correlation(s, {0, 2}, {1, 0}, {1, 1}) == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(correlation(s, {1, 1}, {2, 2}, {1, 0}) == doctest::Approx(1.0).epsilon(1e-10));
  const PureStrategy p = perturb(s, 1e-2, 4, PerturbKind::both);
  CHECK(correlation(p, {0, 1}, {2, 0}, {0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("question-averaged correlation obeys the sharp win-probability identity") {
  // at n = 1 the p = 1 correlation averages to exactly 1 - 2 eps
  const PureStrategy s = perturb(ideal_single_round(), 5e-3, 21, PerturbKind::measurement_rotate);
  const double eps = 1.0 - win_probability(s);
  double mean = 0.0;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) mean += correlation(s, {r}, {c}, {1});
  mean /= 9.0;
  CHECK(mean == doctest::Approx(1.0 - 2.0 * eps).epsilon(1e-9));
}

TEST_CASE("perturb with target zero returns the strategy unchanged") {
  const PureStrategy s = ideal_parallel(2);
  CHECK(strategies_identical(perturb(s, 0.0, 77, PerturbKind::both), s));
}

TEST_CASE("perturb calibrates the win probability to the target") {
  for (auto kind : {PerturbKind::state_mix, PerturbKind::measurement_rotate, PerturbKind::both}) {
    const PureStrategy s = perturb(ideal_single_round(), 1e-3, 42, kind);
    const double wp = win_probability(s);
    CHECK(wp <= 1.0 - 1e-3 + 1e-4);
    CHECK(wp >= 1.0 - 1e-3 - 1e-4);
    s.validate();  // projector invariants survive the perturbation
  }
  CHECK_THROWS_AS(perturb(ideal_single_round(), 0.5, 1, PerturbKind::both), ContractError);
}

TEST_CASE("perturb is deterministic given the seed") {
  const PureStrategy a = perturb(ideal_parallel(2), 1e-3, 1234, PerturbKind::both);
  const PureStrategy b = perturb(ideal_parallel(2), 1e-3, 1234, PerturbKind::both);
  CHECK(strategies_identical(a, b));
  const PureStrategy c = perturb(ideal_parallel(2), 1e-3, 1235, PerturbKind::both);
  CHECK_FALSE(strategies_identical(a, c));
}

TEST_CASE("strategy serialization round-trips bit-exactly") {
  const PureStrategy s = perturb(ideal_parallel(2), 1e-3, 8, PerturbKind::both);
  const std::string text = save_strategy(s);
  const PureStrategy back = load_strategy(text);
  CHECK(strategies_identical(s, back));
  CHECK(save_strategy(back) == text);

  const PureStrategy gen = to_general(s);
  const PureStrategy gen_back = load_strategy(save_strategy(gen));
  CHECK_FALSE(gen_back.is_product());
  CHECK(win_probability(gen_back) == doctest::Approx(win_probability(s)).epsilon(1e-14));
}
