#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include "msq/lemma_lab.hpp"
#include "msq/random_gen.hpp"

using namespace msq;

TEST_CASE("triangle inequality: degenerate and random instances") {
  // A = B = C: both slacks collapse to zero
  RegisterLayout lay({{"H", 4}});
  RandomGen rng(1);
  const Mat a = rng.hermitian(4);
  const LinearOperator opa = LinearOperator::dense(lay, a);
  const StateVector psi = StateVector::make(lay, rng.unit_vector(4));
  CHECK(state_dep_distance(opa, opa, psi) == 0.0);

  // D = 0 reduces the second inequality to 0 <= 0
  const LinearOperator zero = LinearOperator::dense(lay, Mat::Zero(4, 4));
  CHECK(state_dep_distance(zero, zero, psi) == 0.0);
  CHECK(operator_norm(Mat::Zero(4, 4)) == 0.0);

  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    const auto res = check_triangle(seed);
    CHECK(res.pass);
  }
}

TEST_CASE("coherent average: N = 1 and equal-operator edge cases") {
  // N = 1: both sides are the same number by construction
  const auto single = check_coherent_average(3, 4, 1);
  CHECK(single.pass);
  CHECK(single.defect <= 1e-13);

  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    const auto res = check_coherent_average(seed);
    CHECK(res.pass);
    CHECK(res.defect <= 1e-12);
  }
}

TEST_CASE("coherent average with identical operator sets gives zero on both sides") {
  RandomGen rng(12);
  const long dim = 4;
  RegisterLayout lay({{"H", dim}, {"idx", 2}});
  std::vector<Mat> ops = {rng.complex_matrix(dim, dim), rng.complex_matrix(dim, dim)};
  std::vector<KronTerm> terms;
  for (int i = 0; i < 2; ++i) {
    Mat sel = Mat::Zero(2, 2);
    sel(i, i) = 1.0;
    KronTerm t;
    t.factors.push_back(KronFactor{{0}, ops[i]});
    t.factors.push_back(KronFactor{{1}, sel});
    terms.push_back(std::move(t));
  }
  const LinearOperator ext = LinearOperator::structured(lay, terms);
  const Vec base = rng.unit_vector(dim);
  Vec amps = Vec::Zero(dim * 2);
  for (long x = 0; x < dim; ++x)
    for (int i = 0; i < 2; ++i) amps[x * 2 + i] = base[x] / std::sqrt(2.0);
  const StateVector psi = StateVector::make(lay, amps);
  CHECK(state_dep_distance(ext, ext, psi) == 0.0);
}

TEST_CASE("save-eps lemma: edge and random instances") {
  // T = T' = S: delta = 0 and <TT'> = 1
  RandomGen rng(4);
  const Mat t = rng.hermitian_unitary(8);
  const Vec sigma = rng.unit_vector(8);
  const double tt = std::real(sigma.dot(t * (t * sigma)));
  CHECK(tt == doctest::Approx(1.0).epsilon(1e-12));

  // T' = -T, S = T: one hypothesis saturates at delta = 2, the bound 1 - 8
  // is vacuous and <TT'> = -1 satisfies it
  const double delta = std::max({1.0 - 1.0, 1.0 - (-1.0), 0.0});
  CHECK(delta == 2.0);
  CHECK(-1.0 >= 1.0 - 4.0 * delta);

  for (std::uint64_t seed = 1; seed <= 1000; ++seed) {
    const auto res = check_save_eps(seed);
    CHECK(res.pass);
  }
}

TEST_CASE("switch lemmas hold on mirrored, noisy, and random instances") {
  for (std::uint64_t seed = 1; seed <= 500; ++seed) {
    const auto res = check_switch_lemmas(seed);
    CHECK(res.pass);
  }
}

TEST_CASE("switch3 with exact pauli words: zero distance, nonnegative bound") {
  // A_1 = X(x)I, A_2 = I(x)X, A_3 = Z(x)Z on Alice, exact mirrors on Bob;
  // the minimizing alpha signs reproduce the exact (anti)commutation
  const long dim = 4;
  const Mat psi = Mat::Identity(dim, dim) / 2.0;
  std::vector<Mat> a = {kron_dense(pauli_x(), identity_mat(2)),
                        kron_dense(identity_mat(2), pauli_x()), kron_dense(pauli_z(), pauli_z())};
  double eps2 = 0.0;
  std::vector<double> alpha(2);
  for (int i = 0; i < 2; ++i) {
    const Mat lhs = a[i] * a[2] * psi;
    const Mat plus = a[2] * a[i] * psi;
    alpha[i] = (lhs - plus).norm() <= (lhs + plus).norm() ? 1.0 : -1.0;
    eps2 = std::max(eps2, std::min((lhs - plus).norm(), (lhs + plus).norm()));
  }
  CHECK(alpha[0] == -1.0);  // XI vs ZZ anticommute
  CHECK(alpha[1] == -1.0);  // IX vs ZZ anticommute
  CHECK(eps2 <= 1e-14);
  const Mat lhs_word = a[0] * a[1] * a[2] * psi;
  const Mat rhs_word = alpha[0] * alpha[1] * (a[2] * a[0] * a[1] * psi);
  CHECK((lhs_word - rhs_word).norm() <= 1e-14);
}

TEST_CASE("lemma driver aggregates failures and slack deterministically") {
  const auto a = run_lemma("save_eps", 50);
  const auto b = run_lemma("save_eps", 50);
  CHECK(a.failures == 0);
  CHECK(a.min_slack == b.min_slack);
  CHECK_THROWS_AS(run_lemma("nope", 1), ContractError);

  const auto all = run_all_lemmas(20);
  CHECK(all.size() == 4);
  const auto j = nlohmann::json::parse(lemma_outcomes_json(all));
  CHECK(j.size() == 4);
  CHECK(j[0].at("schema") == "msq.lemma-summary/1");
  CHECK(j[0].contains("lemma"));
  CHECK(j[0].contains("trials"));
  CHECK(j[0].contains("failures"));
  CHECK(j[0].contains("min_slack"));
}
