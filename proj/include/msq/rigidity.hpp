#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "msq/strategy.hpp"

namespace msq {

/// Ancilla dilation of a strategy (one ancilla register of dimension
/// 3^(n-1) per player per round, in the uniform superposition).  For
/// round-product measurement families the ancillas are provably inert and
/// every dilated observable collapses to its single-round tensor factor;
/// all computations then run on the base space.  General families use the
/// dense dilated space (n <= 2).
class Dilation {
 public:
  PureStrategy base;
  bool inert = true;
  long anc_dim = 1;     // 3^(n-1)
  long eff_dim_a = 0;   // side dims used by the residual engine
  long eff_dim_b = 0;
  Mat psi_eff;          // eff_dim_a x eff_dim_b
  double eps = 0.0;     // 1 - win_probability(base)

  int rounds() const { return base.n; }

  /// Dilated observables as dense blocks on the effective side spaces.
  Mat alice_obs(int r, int c, int k) const;  // ~A^c_{r,k}
  Mat bob_obs(int r, int c, int k) const;    // ~B^r_{c,k}

  /// Base-space output observables lifted to the effective side space
  /// (tensor identity on the ancillas).
  Mat alice_parity_obs(const std::vector<int>& rvec, const std::vector<int>& cvec,
                       const std::vector<int>& pvec) const;
  Mat bob_parity_obs(const std::vector<int>& cvec, const std::vector<int>& rvec,
                     const std::vector<int>& pvec) const;

  /// The full dilated layout A1..An, ancA1..ancAn, B1..Bn, ancB1..ancBn.
  RegisterLayout dilated_layout() const;

  /// Structured dilated observables on the full layout.
  LinearOperator dilated_alice_observable(int r, int c, int k) const;
  LinearOperator dilated_bob_observable(int r, int c, int k) const;

  /// psi' = psi tensor uniform ancillas (feasibility-guarded).
  StateVector psi_prime() const;
};

enum class DilationPath { automatic, force_dense };

Dilation dilate(const PureStrategy& s, DilationPath path = DilationPath::automatic);

struct RelationEntry {
  std::string id;
  std::vector<int> indices;
  double residual = 0.0;
  std::string bound_kind;   // symbolic: "O(sqrt(eps))", "36*eps", ...
  double bound_value = std::numeric_limits<double>::quiet_NaN();
};

/// Phase and commutation residuals of the dilated observables: same-round
/// pairs against the sign (-1)^{f(r,r',c,c')}, f = 1 iff r != r' and
/// c != c', and cross-round commutators, for both players.
std::vector<RelationEntry> relation_residuals(const Dilation& d);

/// Consistency residuals: d(~A, ~B) per (k, r, c); averaged squared
/// distance between parallel output observables and products of dilated
/// single-round observables; and the input-switching quantity with its
/// explicit 36*eps bound.
std::vector<RelationEntry> consistency_residuals(const Dilation& d);

/// Approximate Pauli operators extracted from the dilated observables.
/// Frame index i runs over [1, 2n]; round k supplies indices 2k-1, 2k.
struct PauliFrame {
  int n = 1;
  std::vector<Mat> x_a, z_a, x_b, z_b;  // size 2n, dense on the effective side spaces
  std::vector<RelationEntry> relations;  // the five single-round relation families
};

PauliFrame pauli_frame(const Dilation& d);

struct PauliWord {
  Side side = Side::alice;
  std::uint32_t x_bits = 0;  // bit i-1 <-> frame index i
  std::uint32_t z_bits = 0;
};

/// X^a Z^b in the side's evaluation order (Alice ascending, Bob
/// descending); unitary, not necessarily Hermitian.
LinearOperator word_to_observable(const Dilation& d, const PauliFrame& f, const PauliWord& w);

/// Closed-form evaluator for expectations of Pauli words on the swap
/// isometry output, with memoized word banks.
class SwapEngine {
 public:
  SwapEngine(const Dilation& d, const PauliFrame& f);

  struct Expectation {
    cdouble iso;       // <phi| sigma_X^A(s) sigma_Z^A(t) sigma_X^B(u) sigma_Z^B(v) |phi>
    cdouble direct;    // <psi'| W^A_{s,t} W^B_{u,v} |psi'>
    double discrepancy;
  };
  Expectation full(std::uint32_t s, std::uint32_t t, std::uint32_t u, std::uint32_t v);

  struct Sampled {
    cdouble estimate;
    double std_error;
    long samples;
  };
  Sampled sampled(std::uint32_t s, std::uint32_t t, std::uint32_t u, std::uint32_t v,
                  long budget, std::uint64_t seed);

  Mat word_matrix(Side side, std::uint32_t x_bits, std::uint32_t z_bits);

  int qubits() const { return 2 * n_; }

 private:
  Mat x_word(Side side, std::uint32_t bits);
  Mat z_word(Side side, std::uint32_t bits);
  const Mat& f_x(Side side, std::uint32_t s);
  const Mat& g_op(Side side, std::uint32_t s, std::uint32_t t);

  int n_;
  Mat psi_;
  std::vector<Mat> xa_, za_, xb_, zb_;
  std::map<std::uint32_t, Mat> x_bank_[2], z_bank_[2];
  std::map<std::uint32_t, Mat> fx_bank_[2];
  std::map<std::uint64_t, Mat> g_bank_[2];
};

SwapEngine::Expectation swap_isometry_expectation(const Dilation& d, const PauliFrame& f,
                                                  std::uint32_t s, std::uint32_t t,
                                                  std::uint32_t u, std::uint32_t v);

/// One term of the per-round decomposition of M_1 into sigma_X/sigma_Z
/// labels (two bits per side; both sides carry the same pattern).
struct MagicTerm {
  std::uint32_t s = 0, t = 0;
  double weight = 0.0;
};
const std::array<MagicTerm, 10>& magic_round_terms();

struct FidelityResult {
  double m_expectation = 0.0;   // <phi| M_n |phi>, real part
  double fidelity_bound = 0.0;  // 1 - (9/4)(1 - m), clamped to [0, 1]
  bool sampled = false;
  double std_error = 0.0;
  long labels_used = 0;
};

/// M_n expectation on the isometry output and the derived EPR fidelity
/// lower bound.  Full label sum for n <= 2; n = 3 requires a sampling
/// budget (per-round labels drawn with probability equal to their weight).
FidelityResult epr_fidelity(SwapEngine& engine, std::optional<long> sample_budget = std::nullopt,
                            std::uint64_t seed = 0);
FidelityResult epr_fidelity(const Dilation& d, const PauliFrame& f,
                            std::optional<long> sample_budget = std::nullopt,
                            std::uint64_t seed = 0);

/// The 4n-qubit certificate operator, qubit order (A1, A2, B1, B2) per
/// round with EPR pairing (A1,B1), (A2,B2).
LinearOperator magic_operator(int n);

/// The maximally entangled top eigenvector of M_n in the same qubit order.
Vec magic_top_state(int n);

struct MagicSpectrumReport {
  int n = 1;
  double top_eigenvalue = 0.0;
  int top_multiplicity = 0;       // eigenvalues within 1e-10 of the top
  double epr_overlap = 0.0;       // |<EPR^2n | v_top>|^2
  double second_largest_abs = 0.0;
  double dominance_min_eig = 0.0; // min eig of Pi + 5/9(I - Pi) - M_n
};
MagicSpectrumReport magic_spectrum(int n);

struct ImplicationAudit {
  int trials = 0;
  int failures = 0;
  double min_slack = 0.0;  // min over trials of F - (1 - 9/4 delta)
};

/// Spectral-gap implication on seeded Ginibre density matrices:
/// Tr[M_1 rho] >= 1 - delta  =>  EPR fidelity >= 1 - (9/4) delta.
ImplicationAudit magic_implication_audit(int trials, std::uint64_t seed);

struct AppendixBReport {
  double eps = 0.0;
  struct Item {
    std::string id;
    double expectation = 0.0;
    double bound = 0.0;  // 1 - 9 eps
    bool pass = false;
  };
  std::array<Item, 9> wins;
  std::vector<double> chain_steps;
  double chain_total = 0.0;
  double direct_residual = 0.0;  // d(X1 Z1, -Z1 X1)
  bool chain_dominates = false;  // direct <= chain total + 1e-9
};

/// Evaluates the nine single-round win-condition expectations and replays
/// the anticommutation derivation chain step by step.
AppendixBReport appendix_b_audit(const PureStrategy& s);

struct RigidityReport {
  int n = 1;
  double eps = 0.0;
  std::uint64_t seed = 0;
  std::string kind = "none";
  std::string convention = "qubit order (A1,A2,B1,B2) per round; EPR pairs (A1,B1),(A2,B2)";
  std::vector<RelationEntry> relations;
  double m_expectation = 0.0;
  double fidelity_bound = 0.0;
  struct PauliEntry {
    std::uint32_t s = 0, t = 0, u = 0, v = 0;
    cdouble iso_value;
    cdouble direct_value;
    double discrepancy = 0.0;
  };
  std::vector<PauliEntry> pauli_table;

  std::string to_json_string() const;  // versioned schema
};

}  // namespace msq
