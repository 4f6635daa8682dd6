#include "msq/tensor_core.hpp"

#include <algorithm>
#include <random>
#include <set>

namespace msq {

RegisterLayout::RegisterLayout(std::vector<RegisterSpec> regs) : regs_(std::move(regs)) {
  std::set<std::string> seen;
  for (const auto& r : regs_) {
    if (r.dim < 1) throw LayoutError("register '" + r.name + "' has non-positive dim");
    if (!seen.insert(r.name).second) throw LayoutError("duplicate register name '" + r.name + "'");
  }
  strides_.assign(regs_.size(), 1);
  total_dim_ = 1;
  for (int i = static_cast<int>(regs_.size()) - 1; i >= 0; --i) {
    strides_[i] = total_dim_;
    total_dim_ *= regs_[i].dim;
  }
}

int RegisterLayout::index_of(std::string_view name) const {
  for (int i = 0; i < num_registers(); ++i) {
    if (regs_[i].name == name) return i;
  }
  throw LayoutError("no register named '" + std::string(name) + "'");
}

bool RegisterLayout::same_shape(const RegisterLayout& other) const {
  if (num_registers() != other.num_registers()) return false;
  for (int i = 0; i < num_registers(); ++i) {
    if (regs_[i].dim != other.regs_[i].dim || regs_[i].name != other.regs_[i].name) return false;
  }
  return true;
}

StateVector StateVector::make(RegisterLayout layout, Vec amps) {
  if (amps.size() != layout.total_dim()) {
    throw ContractError("state length does not match layout dimension");
  }
  const double norm = amps.norm();
  if (std::abs(norm - 1.0) > 1e-12) {
    throw ContractError("state is not unit norm (|norm-1| = " + std::to_string(std::abs(norm - 1.0)) + ")");
  }
  return StateVector{std::move(layout), std::move(amps)};
}

namespace {

long factor_dim(const RegisterLayout& lay, const std::vector<int>& regs) {
  long d = 1;
  for (int r : regs) d *= lay.dim(r);
  return d;
}

void check_factor(const RegisterLayout& lay, const KronFactor& f) {
  if (f.regs.empty()) throw LayoutError("factor references no registers");
  for (size_t i = 0; i < f.regs.size(); ++i) {
    if (f.regs[i] < 0 || f.regs[i] >= lay.num_registers())
      throw LayoutError("factor references register out of range");
    if (i > 0 && f.regs[i] <= f.regs[i - 1])
      throw LayoutError("factor registers must be strictly ascending");
  }
  const long d = factor_dim(lay, f.regs);
  if (f.block.rows() != d || f.block.cols() != d)
    throw LayoutError("factor block is " + std::to_string(f.block.rows()) + "x" +
                      std::to_string(f.block.cols()) + " but register product is " + std::to_string(d));
}

// Offsets of the factor subspace basis states and of the complement space,
// so that every global index decomposes as base[c] + off[x].
struct FactorIndexing {
  std::vector<long> off;    // size: factor dim
  std::vector<long> bases;  // size: total / factor dim
};

FactorIndexing build_indexing(const RegisterLayout& lay, const std::vector<int>& regs) {
  FactorIndexing ix;
  const long fdim = factor_dim(lay, regs);
  ix.off.assign(fdim, 0);
  {
    for (long x = 0; x < fdim; ++x) {
      long rem = x;
      long o = 0;
      for (int j = static_cast<int>(regs.size()) - 1; j >= 0; --j) {
        const long d = lay.dim(regs[j]);
        o += (rem % d) * lay.stride(regs[j]);
        rem /= d;
      }
      ix.off[x] = o;
    }
  }
  std::vector<int> comp;
  for (int i = 0; i < lay.num_registers(); ++i) {
    if (!std::binary_search(regs.begin(), regs.end(), i)) comp.push_back(i);
  }
  const long cdim = lay.total_dim() / fdim;
  ix.bases.assign(cdim, 0);
  for (long c = 0; c < cdim; ++c) {
    long rem = c;
    long b = 0;
    for (int j = static_cast<int>(comp.size()) - 1; j >= 0; --j) {
      const long d = lay.dim(comp[j]);
      b += (rem % d) * lay.stride(comp[j]);
      rem /= d;
    }
    ix.bases[c] = b;
  }
  return ix;
}

void apply_factor_inplace(const RegisterLayout& lay, const KronFactor& f, Vec& v) {
  const FactorIndexing ix = build_indexing(lay, f.regs);
  const long fdim = static_cast<long>(ix.off.size());
  Vec in(fdim), out(fdim);
  for (long base : ix.bases) {
    for (long x = 0; x < fdim; ++x) in[x] = v[base + ix.off[x]];
    out.noalias() = f.block * in;
    for (long x = 0; x < fdim; ++x) v[base + ix.off[x]] = out[x];
  }
}

// Merges all factors of a term into a single (regs, block) pair.
KronFactor merge_term_factors(const RegisterLayout& lay, const KronTerm& t) {
  KronFactor merged;
  if (t.factors.empty()) {
    // empty term acts as identity; represent on register 0 (or scalar layout)
    merged.regs = {0};
    merged.block = identity_mat(lay.dim(0));
    return merged;
  }
  std::vector<KronFactor> sorted = t.factors;
  std::sort(sorted.begin(), sorted.end(),
            [](const KronFactor& a, const KronFactor& b) { return a.regs.front() < b.regs.front(); });
  // Register order inside the merged block must follow layout order, which
  // holds when factor register sets do not interleave.  General interleaved
  // sets are merged by explicit index arithmetic below.
  std::vector<int> all;
  for (const auto& f : sorted)
    for (int r : f.regs) all.push_back(r);
  std::vector<int> all_sorted = all;
  std::sort(all_sorted.begin(), all_sorted.end());
  const long fdim = factor_dim(lay, all_sorted);
  Mat block = Mat::Zero(fdim, fdim);

  // dims of each register in 'all' (concatenated factor order) and the
  // position of each register of 'all' within 'all_sorted'
  std::vector<long> cat_dims(all.size());
  std::vector<int> pos(all.size());
  for (size_t i = 0; i < all.size(); ++i) {
    cat_dims[i] = lay.dim(all[i]);
    pos[i] = static_cast<int>(std::lower_bound(all_sorted.begin(), all_sorted.end(), all[i]) -
                              all_sorted.begin());
  }
  std::vector<long> sorted_strides(all_sorted.size(), 1);
  for (int j = static_cast<int>(all_sorted.size()) - 2; j >= 0; --j) {
    sorted_strides[j] = sorted_strides[j + 1] * lay.dim(all_sorted[j + 1]);
  }

  // kron of blocks in concatenated order, then permute digits into layout order
  Mat cat = sorted.front().block;
  for (size_t i = 1; i < sorted.size(); ++i) cat = kron_dense(cat, sorted[i].block);
  const long n = cat.rows();
  std::vector<long> remap(n);
  for (long x = 0; x < n; ++x) {
    long rem = x, y = 0;
    for (int j = static_cast<int>(all.size()) - 1; j >= 0; --j) {
      y += (rem % cat_dims[j]) * sorted_strides[pos[j]];
      rem /= cat_dims[j];
    }
    remap[x] = y;
  }
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < n; ++j) block(remap[i], remap[j]) = cat(i, j);

  merged.regs = all_sorted;
  merged.block = std::move(block);
  return merged;
}

}  // namespace

LinearOperator LinearOperator::dense(RegisterLayout layout, Mat m, TriState hermitian,
                                     TriState unitary) {
  if (m.rows() != layout.total_dim() || m.cols() != layout.total_dim())
    throw LayoutError("dense matrix does not match layout dimension");
  LinearOperator op;
  op.layout_ = std::move(layout);
  op.dense_ = std::move(m);
  op.hermitian_ = hermitian;
  op.unitary_ = unitary;
  return op;
}

LinearOperator LinearOperator::structured(RegisterLayout layout, std::vector<KronTerm> terms,
                                          TriState hermitian, TriState unitary) {
  for (const auto& t : terms) {
    std::set<int> used;
    for (const auto& f : t.factors) {
      check_factor(layout, f);
      for (int r : f.regs) {
        if (!used.insert(r).second)
          throw LayoutError("term factors overlap on register " + std::to_string(r));
      }
    }
  }
  LinearOperator op;
  op.layout_ = std::move(layout);
  op.terms_ = std::move(terms);
  op.hermitian_ = hermitian;
  op.unitary_ = unitary;
  return op;
}

Vec LinearOperator::apply(const Vec& v) const {
  if (v.size() != layout_.total_dim()) throw LayoutError("vector does not match operator layout");
  if (dense_) return (*dense_) * v;
  Vec out = Vec::Zero(v.size());
  Vec tmp(v.size());
  for (const auto& t : terms_) {
    tmp = v;
    for (const auto& f : t.factors) apply_factor_inplace(layout_, f, tmp);
    out += t.weight * tmp;
  }
  return out;
}

Mat LinearOperator::densify() const {
  const long n = layout_.total_dim();
  if (n > kDenseCap)
    throw FeasibilityError("densify: dimension " + std::to_string(n) + " exceeds dense cap " +
                           std::to_string(kDenseCap));
  if (dense_) return *dense_;
  Mat out = Mat::Zero(n, n);
  for (const auto& t : terms_) {
    const KronFactor merged = merge_term_factors(layout_, t);
    const FactorIndexing ix = build_indexing(layout_, merged.regs);
    const long fdim = static_cast<long>(ix.off.size());
    for (long base : ix.bases) {
      for (long i = 0; i < fdim; ++i)
        for (long j = 0; j < fdim; ++j)
          out(base + ix.off[i], base + ix.off[j]) += t.weight * merged.block(i, j);
    }
  }
  return out;
}

void LinearOperator::verify_flags() const {
  const long n = layout_.total_dim();
  if (n <= kDenseCap) {
    const Mat m = densify();
    if (hermitian_ == TriState::yes && !is_hermitian(m))
      throw ContractError("operator flagged hermitian fails check");
    if (unitary_ == TriState::yes && !is_unitary(m))
      throw ContractError("operator flagged unitary fails check");
    return;
  }
  // randomized probes for large structured operators
  std::mt19937_64 eng(0x9e3779b97f4a7c15ull);
  std::normal_distribution<double> g(0.0, 1.0);
  auto rand_vec = [&] {
    Vec v(n);
    for (long i = 0; i < n; ++i) v[i] = cdouble(g(eng), g(eng));
    v.normalize();
    return v;
  };
  for (int trial = 0; trial < 8; ++trial) {
    const Vec u = rand_vec();
    const Vec v = rand_vec();
    const Vec ou = apply(u);
    const Vec ov = apply(v);
    if (hermitian_ == TriState::yes) {
      const cdouble lhs = u.dot(ov);  // <u, O v>
      const cdouble rhs = ou.dot(v);  // <O u, v>
      if (std::abs(lhs - rhs) > 1e-8) throw ContractError("operator flagged hermitian fails probe");
    }
    if (unitary_ == TriState::yes) {
      if (std::abs(ov.norm() - 1.0) > 1e-8) throw ContractError("operator flagged unitary fails probe");
    }
  }
}

LinearOperator kron_assemble(const RegisterLayout& layout,
                             const std::vector<std::pair<std::string, Mat>>& factors,
                             TriState hermitian, TriState unitary) {
  KronTerm term;
  term.weight = 1.0;
  std::set<int> used;
  for (const auto& [name, block] : factors) {
    const int idx = layout.index_of(name);
    if (!used.insert(idx).second) throw LayoutError("register '" + name + "' referenced twice");
    if (block.rows() != layout.dim(idx) || block.cols() != layout.dim(idx))
      throw LayoutError("block for register '" + name + "' has wrong dimension");
    term.factors.push_back(KronFactor{{idx}, block});
  }
  std::sort(term.factors.begin(), term.factors.end(),
            [](const KronFactor& a, const KronFactor& b) { return a.regs[0] < b.regs[0]; });
  return LinearOperator::structured(layout, {std::move(term)}, hermitian, unitary);
}

EigResult hermitian_eig(const Mat& m) {
  if (!is_hermitian(m))
    throw ContractError("hermitian_eig: input fails hermitian check at 1e-10");
  Eigen::SelfAdjointEigenSolver<Mat> solver(m);
  if (solver.info() != Eigen::Success) throw ContractError("eigensolver failed to converge");
  const long n = m.rows();
  EigResult res;
  res.values.resize(n);
  res.vectors.resize(n, n);
  // SelfAdjointEigenSolver returns ascending order; flip to descending.
  for (long i = 0; i < n; ++i) {
    res.values[i] = solver.eigenvalues()[n - 1 - i];
    res.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  // Phase convention: first component with |x| > 1e-12 made real positive.
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) {
      const cdouble x = res.vectors(j, i);
      if (std::abs(x) > 1e-12) {
        res.vectors.col(i) *= std::conj(x) / std::abs(x);
        break;
      }
    }
  }
  return res;
}

EigResult hermitian_eig(const LinearOperator& op) { return hermitian_eig(op.densify()); }

double state_dep_distance(const LinearOperator& a, const LinearOperator& b,
                          const StateVector& v) {
  if (!a.layout().same_shape(b.layout()) || !a.layout().same_shape(v.layout))
    throw LayoutError("state_dep_distance: layouts do not match");
  return (a.apply(v.amps) - b.apply(v.amps)).norm();
}

Mat kron_dense(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (long i = 0; i < a.rows(); ++i)
    for (long j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Mat kron_dense(const std::vector<Mat>& factors) {
  if (factors.empty()) return Mat::Identity(1, 1);
  Mat out = factors.front();
  for (size_t i = 1; i < factors.size(); ++i) out = kron_dense(out, factors[i]);
  return out;
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

bool is_hermitian(const Mat& m, double tol) { return max_abs(m - m.adjoint()) <= tol; }

bool is_unitary(const Mat& m, double tol) {
  return max_abs(m.adjoint() * m - Mat::Identity(m.rows(), m.cols())) <= tol;
}

bool is_projector(const Mat& m, double tol) {
  return is_hermitian(m, tol) && max_abs(m * m - m) <= tol;
}

double operator_norm(const Mat& m) {
  if (m.rows() == 0 || m.cols() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues()[0];
}

Mat pauli_x() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}

Mat pauli_y() {
  Mat m(2, 2);
  m << cdouble(0, 0), cdouble(0, -1), cdouble(0, 1), cdouble(0, 0);
  return m;
}

Mat pauli_z() {
  Mat m(2, 2);
  m << 1, 0, 0, -1;
  return m;
}

Mat identity_mat(long dim) { return Mat::Identity(dim, dim); }

}  // namespace msq
