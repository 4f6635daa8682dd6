#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "msq/tensor_core.hpp"

namespace msq {

enum class Side { alice, bob };

/// One player's projective measurement families for a single round:
/// for each question symbol in {0,1,2}, four projectors indexed by the
/// answer pair a0 + 2*a1 (b0 + 2*b1 on Bob's side).
struct RoundFamily {
  long dim = 4;
  std::array<std::array<Mat, 4>, 3> proj;
};

/// A pure projective strategy for the n-round parallel game.  The joint
/// layout is A1..An then B1..Bn (Alice block first).  Measurements are
/// held either in round-product form or as general per-question families
/// on the full local block; product form is required for n = 3 where
/// general families are infeasible to store.
struct PureStrategy {
  int n = 1;
  std::vector<long> dims_a, dims_b;  // per-round local dims
  StateVector psi;

  // product form (size n each when present)
  std::vector<RoundFamily> rounds_a, rounds_b;
  // general form: [question (base-3, round 0 least significant)]
  //               [answer (base-4, round 0 least significant)]
  std::vector<std::vector<Mat>> general_a, general_b;

  bool is_product() const { return !rounds_a.empty(); }
  long dim_a() const;
  long dim_b() const;

  long num_questions() const;  // 3^n
  long num_answers() const;    // 4^n

  /// Full-block projector for one question/answer (assembled on demand
  /// in product form).
  Mat projector(Side side, long question, long answer) const;

  /// Output observable on the player's local block:
  /// sum over answers of (-1)^{a_sel . parity} P, where the selected
  /// answer row per round is the other side's symbol (column c_k for
  /// Alice, row r_k for Bob).
  Mat block_observable(Side side, const std::vector<int>& own,
                       const std::vector<int>& other,
                       const std::vector<int>& parity) const;

  /// Single-round observable (product form only): the (r, c) magic square
  /// cell operator on round k's local space.
  Mat round_observable(Side side, int k, int r, int c) const;

  /// Checks projector family invariants (orthogonality, idempotence,
  /// completeness) at the 1e-10 tolerance; throws ContractError.
  void validate() const;

  /// State reshaped as a dim_a x dim_b matrix (row = Alice index).
  Mat psi_matrix() const;
};

/// The exact two-EPR-pair strategy with the standard magic square
/// observables; row 2 and column 2 are joint eigenprojectors of the
/// commuting pairs (-ZX, -XZ) and (ZZ, XX).
PureStrategy ideal_single_round();

/// n-fold tensor power of the ideal strategy, Alice registers first.
PureStrategy ideal_parallel(int n);

/// A deterministic classical strategy embedded as diagonal rank-1
/// projector families on the computational basis (n = 1).  Answer
/// functions are encoded with two bits per question symbol.
PureStrategy classical_embedding(int alice_fn, int bob_fn);

/// Exact win probability: the average over all 9^n question pairs of the
/// winning-outcome probability mass.  No sampling.
double win_probability(const PureStrategy& s);

struct OutputObservable {
  LinearOperator op;  // on the joint layout, acting on one local block
  Side side;
  std::vector<int> input;   // own question vector
  std::vector<int> other;   // other side's tag vector
  std::vector<int> parity;
};

OutputObservable output_observable(const PureStrategy& s, Side side,
                                   const std::vector<int>& input,
                                   const std::vector<int>& parity,
                                   const std::vector<int>& other);

/// <psi| A^{c}_{r,p} B^{r}_{c,p} |psi>, real part; imaginary part must be
/// below 1e-10 (ContractError otherwise).
double correlation(const PureStrategy& s, const std::vector<int>& rvec,
                   const std::vector<int>& cvec, const std::vector<int>& pvec);

enum class PerturbKind { state_mix, measurement_rotate, both };

/// Calibrated perturbation: seeded local rotations of the measurement
/// families (per side, round and question symbol) and/or mixing of the
/// state with a random orthogonal direction, with a single global angle
/// found by bisection so the win probability hits 1 - target_eps.
PureStrategy perturb(const PureStrategy& s, double target_eps, std::uint64_t seed,
                     PerturbKind kind);

/// Materializes general per-question families from product form (n <= 2).
PureStrategy to_general(const PureStrategy& s);

const char* perturb_kind_name(PerturbKind k);
PerturbKind perturb_kind_from_name(const std::string& name);

/// Versioned JSON container with base64 little-endian float64 arrays;
/// round-trips bit-exactly.
std::string save_strategy(const PureStrategy& s);
PureStrategy load_strategy(const std::string& text);

}  // namespace msq
