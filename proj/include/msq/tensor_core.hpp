#pragma once

#include <complex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace msq {

using cdouble = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// Error taxonomy shared by the whole library.  The CLI maps
// FeasibilityError / CalibrationError to exit code 2 and everything
// else to exit code 1.
struct LayoutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct FeasibilityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dense matrices are only materialized up to this total dimension.
inline constexpr long kDenseCap = 4096;

// Tolerances for on-demand flag checks (hermitian / unitary / projector).
inline constexpr double kFlagTol = 1e-10;

struct RegisterSpec {
  std::string name;
  long dim = 0;
};

/// An ordered list of named registers.  Vector indices are row-major over
/// the register order: the first register is the most significant digit.
class RegisterLayout {
 public:
  RegisterLayout() = default;
  explicit RegisterLayout(std::vector<RegisterSpec> regs);

  long total_dim() const { return total_dim_; }
  int num_registers() const { return static_cast<int>(regs_.size()); }
  const RegisterSpec& reg(int i) const { return regs_.at(i); }
  long dim(int i) const { return regs_.at(i).dim; }
  long stride(int i) const { return strides_.at(i); }
  int index_of(std::string_view name) const;  // throws LayoutError if absent

  bool same_shape(const RegisterLayout& other) const;

 private:
  std::vector<RegisterSpec> regs_;
  std::vector<long> strides_;
  long total_dim_ = 1;
};

/// Unit-norm amplitude vector over a register layout.
struct StateVector {
  RegisterLayout layout;
  Vec amps;

  // Checks length and unit norm (1e-12); throws ContractError otherwise.
  static StateVector make(RegisterLayout layout, Vec amps);
};

enum class TriState { yes, no, unknown };

/// One Kronecker factor of a structured term: a dense block acting on an
/// ordered list of registers (identity on all others).  Registers need not
/// be adjacent in the layout.
struct KronFactor {
  std::vector<int> regs;  // register indices, ascending
  Mat block;              // rows/cols = product of those registers' dims
};

struct KronTerm {
  cdouble weight{1.0, 0.0};
  std::vector<KronFactor> factors;  // pairwise disjoint register sets
};

/// A linear operator over a register layout, stored either as one dense
/// matrix or as a weighted sum of Kronecker-factored terms applied lazily.
class LinearOperator {
 public:
  static LinearOperator dense(RegisterLayout layout, Mat m,
                              TriState hermitian = TriState::unknown,
                              TriState unitary = TriState::unknown);
  static LinearOperator structured(RegisterLayout layout,
                                   std::vector<KronTerm> terms,
                                   TriState hermitian = TriState::unknown,
                                   TriState unitary = TriState::unknown);

  const RegisterLayout& layout() const { return layout_; }
  bool is_dense() const { return dense_.has_value(); }
  const std::vector<KronTerm>& terms() const { return terms_; }
  TriState hermitian_flag() const { return hermitian_; }
  TriState unitary_flag() const { return unitary_; }

  Vec apply(const Vec& v) const;
  Vec apply(const StateVector& v) const { return apply(v.amps); }

  /// Materializes the full matrix; FeasibilityError above kDenseCap.
  Mat densify() const;

  /// On-demand flag verification.  Dense (and densifiable) operators are
  /// checked exactly; larger structured operators via randomized probes.
  /// Throws ContractError when a yes-flag fails its 1e-10 check.
  void verify_flags() const;

 private:
  RegisterLayout layout_;
  std::optional<Mat> dense_;
  std::vector<KronTerm> terms_;
  TriState hermitian_ = TriState::unknown;
  TriState unitary_ = TriState::unknown;
};

/// Ordered Kronecker product of named blocks; unreferenced registers get
/// identity blocks.  Dimension mismatches throw LayoutError.
LinearOperator kron_assemble(const RegisterLayout& layout,
                             const std::vector<std::pair<std::string, Mat>>& factors,
                             TriState hermitian = TriState::unknown,
                             TriState unitary = TriState::unknown);

struct EigResult {
  Eigen::VectorXd values;  // descending
  Mat vectors;             // orthonormal columns, phase-fixed
};

/// Hermitian eigendecomposition with deterministic ordering: eigenvalues
/// descending, each eigenvector's first component above 1e-12 made real
/// positive.  Non-Hermitian input (1e-10 check) throws ContractError.
EigResult hermitian_eig(const LinearOperator& op);
EigResult hermitian_eig(const Mat& m);

/// State-dependent distance d_v(A, B) = ||(A - B) v||_2.
double state_dep_distance(const LinearOperator& a, const LinearOperator& b,
                          const StateVector& v);

// --- small dense helpers used across modules ---

Mat kron_dense(const Mat& a, const Mat& b);
Mat kron_dense(const std::vector<Mat>& factors);

double max_abs(const Mat& m);
bool is_hermitian(const Mat& m, double tol = kFlagTol);
bool is_unitary(const Mat& m, double tol = kFlagTol);
bool is_projector(const Mat& m, double tol = kFlagTol);
double operator_norm(const Mat& m);  // spectral norm

Mat pauli_x();
Mat pauli_y();
Mat pauli_z();
Mat identity_mat(long dim);

}  // namespace msq
