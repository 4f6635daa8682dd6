#include "msq/rigidity.hpp"

#include <bit>
#include <cmath>

#include <json.hpp>

#include "msq/random_gen.hpp"

namespace msq {

namespace {

using nlohmann::ordered_json;

long pow_long(long base, int exp) {
  long r = 1;
  for (int i = 0; i < exp; ++i) r *= base;
  return r;
}

std::vector<int> digits3(long x, int n) {
  std::vector<int> d(n);
  for (int k = 0; k < n; ++k) {
    d[k] = static_cast<int>(x % 3);
    x /= 3;
  }
  return d;
}

// Full question vector with round k pinned to `own` and the remaining
// rounds taken from the base-3 encoding of `rest` (round order, skipping k).
std::vector<int> insert_round(int n, int k, int own, long rest) {
  std::vector<int> v(n);
  for (int j = 0; j < n; ++j) {
    if (j == k) {
      v[j] = own;
    } else {
      v[j] = static_cast<int>(rest % 3);
      rest /= 3;
    }
  }
  return v;
}

std::vector<int> unit_parity(int n, int k) {
  std::vector<int> p(n, 0);
  p[k] = 1;
  return p;
}

// <Psi, Phi>_F
cdouble frob_inner(const Mat& a, const Mat& b) { return (a.conjugate().cwiseProduct(b)).sum(); }

}  // namespace

Mat Dilation::alice_obs(int r, int c, int k) const {
  if (inert) {
    std::vector<int> rvec(base.n, 0), cvec(base.n, 0);
    rvec[k] = r;
    cvec[k] = c;
    return base.block_observable(Side::alice, rvec, cvec, unit_parity(base.n, k));
  }
  const int n = base.n;
  const long anc_total = pow_long(anc_dim, n);
  Mat out = Mat::Zero(eff_dim_a, eff_dim_a);
  for (long v = 0; v < anc_dim; ++v) {
    const auto rvec = insert_round(n, k, r, v);
    std::vector<int> cvec(n, c);  // only c_k enters the e_k observable
    const Mat block = base.block_observable(Side::alice, rvec, cvec, unit_parity(n, k));
    // projector |v><v| on ancilla register k, identity on the others
    Mat anc = Mat::Zero(anc_total, anc_total);
    const long hi = pow_long(anc_dim, k);           // registers before k
    const long lo = pow_long(anc_dim, n - 1 - k);   // registers after k
    for (long h = 0; h < hi; ++h)
      for (long l = 0; l < lo; ++l) {
        const long idx = (h * anc_dim + v) * lo + l;
        anc(idx, idx) = 1.0;
      }
    out += kron_dense(block, anc);
  }
  return out;
}

Mat Dilation::bob_obs(int r, int c, int k) const {
  if (inert) {
    std::vector<int> rvec(base.n, 0), cvec(base.n, 0);
    rvec[k] = r;
    cvec[k] = c;
    return base.block_observable(Side::bob, cvec, rvec, unit_parity(base.n, k));
  }
  const int n = base.n;
  const long anc_total = pow_long(anc_dim, n);
  Mat out = Mat::Zero(eff_dim_b, eff_dim_b);
  for (long v = 0; v < anc_dim; ++v) {
    const auto cvec = insert_round(n, k, c, v);
    std::vector<int> rvec(n, r);
    const Mat block = base.block_observable(Side::bob, cvec, rvec, unit_parity(n, k));
    Mat anc = Mat::Zero(anc_total, anc_total);
    const long hi = pow_long(anc_dim, k);
    const long lo = pow_long(anc_dim, n - 1 - k);
    for (long h = 0; h < hi; ++h)
      for (long l = 0; l < lo; ++l) {
        const long idx = (h * anc_dim + v) * lo + l;
        anc(idx, idx) = 1.0;
      }
    out += kron_dense(block, anc);
  }
  return out;
}

Mat Dilation::alice_parity_obs(const std::vector<int>& rvec, const std::vector<int>& cvec,
                               const std::vector<int>& pvec) const {
  const Mat block = base.block_observable(Side::alice, rvec, cvec, pvec);
  if (inert) return block;
  return kron_dense(block, identity_mat(pow_long(anc_dim, base.n)));
}

Mat Dilation::bob_parity_obs(const std::vector<int>& cvec, const std::vector<int>& rvec,
                             const std::vector<int>& pvec) const {
  const Mat block = base.block_observable(Side::bob, cvec, rvec, pvec);
  if (inert) return block;
  return kron_dense(block, identity_mat(pow_long(anc_dim, base.n)));
}

RegisterLayout Dilation::dilated_layout() const {
  std::vector<RegisterSpec> regs;
  const int n = base.n;
  for (int k = 0; k < n; ++k) regs.push_back({"A" + std::to_string(k + 1), base.dims_a[k]});
  for (int k = 0; k < n; ++k) regs.push_back({"ancA" + std::to_string(k + 1), anc_dim});
  for (int k = 0; k < n; ++k) regs.push_back({"B" + std::to_string(k + 1), base.dims_b[k]});
  for (int k = 0; k < n; ++k) regs.push_back({"ancB" + std::to_string(k + 1), anc_dim});
  return RegisterLayout(std::move(regs));
}

LinearOperator Dilation::dilated_alice_observable(int r, int c, int k) const {
  const RegisterLayout lay = dilated_layout();
  const int n = base.n;
  std::vector<KronTerm> terms;
  if (inert && base.is_product()) {
    KronTerm term;
    term.factors.push_back(KronFactor{{k}, base.round_observable(Side::alice, k, r, c)});
    terms.push_back(std::move(term));
  } else {
    std::vector<int> block_regs(n);
    for (int j = 0; j < n; ++j) block_regs[j] = j;
    for (long v = 0; v < anc_dim; ++v) {
      const auto rvec = insert_round(n, k, r, v);
      std::vector<int> cvec(n, c);
      KronTerm term;
      term.factors.push_back(
          KronFactor{block_regs, base.block_observable(Side::alice, rvec, cvec, unit_parity(n, k))});
      Mat sel = Mat::Zero(anc_dim, anc_dim);
      sel(v, v) = 1.0;
      term.factors.push_back(KronFactor{{n + k}, sel});
      terms.push_back(std::move(term));
    }
  }
  return LinearOperator::structured(lay, std::move(terms), TriState::yes, TriState::yes);
}

LinearOperator Dilation::dilated_bob_observable(int r, int c, int k) const {
  const RegisterLayout lay = dilated_layout();
  const int n = base.n;
  std::vector<KronTerm> terms;
  if (inert && base.is_product()) {
    KronTerm term;
    term.factors.push_back(KronFactor{{2 * n + k}, base.round_observable(Side::bob, k, r, c)});
    terms.push_back(std::move(term));
  } else {
    std::vector<int> block_regs(n);
    for (int j = 0; j < n; ++j) block_regs[j] = 2 * n + j;
    for (long v = 0; v < anc_dim; ++v) {
      const auto cvec = insert_round(n, k, c, v);
      std::vector<int> rvec(n, r);
      KronTerm term;
      term.factors.push_back(
          KronFactor{block_regs, base.block_observable(Side::bob, cvec, rvec, unit_parity(n, k))});
      Mat sel = Mat::Zero(anc_dim, anc_dim);
      sel(v, v) = 1.0;
      term.factors.push_back(KronFactor{{3 * n + k}, sel});
      terms.push_back(std::move(term));
    }
  }
  return LinearOperator::structured(lay, std::move(terms), TriState::yes, TriState::yes);
}

StateVector Dilation::psi_prime() const {
  const RegisterLayout lay = dilated_layout();
  if (lay.total_dim() > 1'000'000)
    throw FeasibilityError("psi_prime: dilated dimension too large to materialize");
  const int n = base.n;
  const long da = base.dim_a();
  const long db = base.dim_b();
  const long anc_total = pow_long(anc_dim, n);
  const double anc_amp = 1.0 / std::sqrt(static_cast<double>(anc_total));
  Vec out = Vec::Zero(lay.total_dim());
  for (long ia = 0; ia < da; ++ia) {
    for (long ib = 0; ib < db; ++ib) {
      const cdouble amp = base.psi.amps[ia * db + ib] * anc_amp * anc_amp;
      if (amp == cdouble(0, 0)) continue;
      for (long xa = 0; xa < anc_total; ++xa)
        for (long xb = 0; xb < anc_total; ++xb) {
          const long idx = ((ia * anc_total + xa) * db + ib) * anc_total + xb;
          out[idx] = amp;
        }
    }
  }
  return StateVector::make(lay, std::move(out));
}

Dilation dilate(const PureStrategy& s, DilationPath path) {
  Dilation d;
  d.base = s;
  d.anc_dim = pow_long(3, s.n - 1);
  const bool product = s.is_product();
  d.inert = product && path != DilationPath::force_dense;
  if (!d.inert) {
    if (s.n > 2) throw FeasibilityError("dilate: dense dilation supports n <= 2");
    PureStrategy general = product ? to_general(s) : s;
    d.base = std::move(general);
    const long anc_total = pow_long(d.anc_dim, s.n);
    d.eff_dim_a = d.base.dim_a() * anc_total;
    d.eff_dim_b = d.base.dim_b() * anc_total;
    const double anc_amp = 1.0 / std::sqrt(static_cast<double>(anc_total));
    const Mat psi = d.base.psi_matrix();
    d.psi_eff = Mat::Zero(d.eff_dim_a, d.eff_dim_b);
    for (long ia = 0; ia < psi.rows(); ++ia)
      for (long ib = 0; ib < psi.cols(); ++ib) {
        if (psi(ia, ib) == cdouble(0, 0)) continue;
        const cdouble amp = psi(ia, ib) * anc_amp * anc_amp;
        for (long xa = 0; xa < anc_total; ++xa)
          for (long xb = 0; xb < anc_total; ++xb)
            d.psi_eff(ia * anc_total + xa, ib * anc_total + xb) = amp;
      }
  } else {
    if (s.n > 3) throw FeasibilityError("dilate: n <= 3 supported");
    d.eff_dim_a = s.dim_a();
    d.eff_dim_b = s.dim_b();
    d.psi_eff = s.psi_matrix();
  }
  d.eps = 1.0 - win_probability(s);
  return d;
}

std::vector<RelationEntry> relation_residuals(const Dilation& d) {
  const int n = d.rounds();
  std::vector<RelationEntry> out;
  const Mat& psi = d.psi_eff;

  auto apply_a = [&](const Mat& o, const Mat& m) { return Mat(o * m); };
  auto apply_b = [&](const Mat& o, const Mat& m) { return Mat(m * o.transpose()); };

  // same-round phase relations, both sides
  for (int side = 0; side < 2; ++side) {
    const bool alice = side == 0;
    for (int k = 0; k < n; ++k) {
      std::array<std::array<Mat, 3>, 3> obs, applied;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
          obs[r][c] = alice ? d.alice_obs(r, c, k) : d.bob_obs(r, c, k);
          applied[r][c] = alice ? apply_a(obs[r][c], psi) : apply_b(obs[r][c], psi);
        }
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          for (int r2 = 0; r2 < 3; ++r2)
            for (int c2 = 0; c2 < 3; ++c2) {
              const double sign = (r != r2 && c != c2) ? -1.0 : 1.0;
              const Mat lhs = alice ? apply_a(obs[r][c], applied[r2][c2])
                                    : apply_b(obs[r][c], applied[r2][c2]);
              const Mat rhs = alice ? apply_a(obs[r2][c2], applied[r][c])
                                    : apply_b(obs[r2][c2], applied[r][c]);
              RelationEntry e;
              e.id = alice ? "phase.alice.same_round" : "phase.bob.same_round";
              e.indices = {k + 1, r, c, r2, c2};
              e.residual = (lhs - sign * rhs).norm();
              e.bound_kind = "O(sqrt(eps))";
              out.push_back(std::move(e));
            }
    }
  }

  // cross-round commutation, both sides
  for (int side = 0; side < 2; ++side) {
    const bool alice = side == 0;
    for (int k = 0; k < n; ++k) {
      for (int k2 = k + 1; k2 < n; ++k2) {
        for (int r = 0; r < 3; ++r)
          for (int c = 0; c < 3; ++c) {
            const Mat o1 = alice ? d.alice_obs(r, c, k) : d.bob_obs(r, c, k);
            const Mat o1psi = alice ? apply_a(o1, psi) : apply_b(o1, psi);
            for (int r2 = 0; r2 < 3; ++r2)
              for (int c2 = 0; c2 < 3; ++c2) {
                const Mat o2 = alice ? d.alice_obs(r2, c2, k2) : d.bob_obs(r2, c2, k2);
                const Mat lhs = alice ? apply_a(o1, apply_a(o2, psi)) : apply_b(o1, apply_b(o2, psi));
                const Mat rhs = alice ? apply_a(o2, o1psi) : apply_b(o2, o1psi);
                RelationEntry e;
                e.id = alice ? "commute.alice.cross_round" : "commute.bob.cross_round";
                e.indices = {k + 1, k2 + 1, r, c, r2, c2};
                e.residual = (lhs - rhs).norm();
                e.bound_kind = "O(sqrt(eps))";
                out.push_back(std::move(e));
              }
          }
      }
    }
  }
  return out;
}

std::vector<RelationEntry> consistency_residuals(const Dilation& d) {
  const int n = d.rounds();
  std::vector<RelationEntry> out;
  const Mat& psi = d.psi_eff;

  // (i) d(~A^c_{r,k}, ~B^r_{c,k})
  for (int k = 0; k < n; ++k)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        const Mat a = d.alice_obs(r, c, k);
        const Mat b = d.bob_obs(r, c, k);
        RelationEntry e;
        e.id = "cons.ab";
        e.indices = {k + 1, r, c};
        e.residual = (a * psi - psi * b.transpose()).norm();
        e.bound_kind = "O(sqrt(eps))";
        out.push_back(std::move(e));
      }

  // (ii) E_r d(A^{c}_{r,p} x I, prod_k (~A^{c_k}_{r_k,k})^{p_k})^2, p = all-ones
  {
    const long nq = pow_long(3, n);
    const std::vector<int> pvec(n, 1);
    for (long qc = 0; qc < nq; ++qc) {
      const auto cvec = digits3(qc, n);
      double mean_sq = 0.0;
      for (long qr = 0; qr < nq; ++qr) {
        const auto rvec = digits3(qr, n);
        const Mat lhs = d.alice_parity_obs(rvec, cvec, pvec) * psi;
        Mat rhs = psi;
        for (int k = n - 1; k >= 0; --k) rhs = d.alice_obs(rvec[k], cvec[k], k) * rhs;
        mean_sq += std::pow((lhs - rhs).norm(), 2);
      }
      mean_sq /= static_cast<double>(nq);
      RelationEntry e;
      e.id = "cons.product";
      e.indices = cvec;
      e.residual = mean_sq;
      e.bound_kind = "O(n*sqrt(eps))";
      out.push_back(std::move(e));
    }
  }

  // (iii) input switching: |1 - E <A A>| <= 36 eps, on the base state
  {
    const Mat base_psi = d.base.psi_matrix();
    const long rest = pow_long(3, n - 1);
    for (int i = 0; i < n; ++i)
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) {
          Mat mean = Mat::Zero(base_psi.rows(), base_psi.cols());
          for (long v = 0; v < rest; ++v) {
            const auto rvec = insert_round(n, i, r, v);
            const std::vector<int> cvec(n, c);
            mean += d.base.block_observable(Side::alice, rvec, cvec, unit_parity(n, i)) * base_psi;
          }
          mean /= static_cast<double>(rest);
          const double q = std::abs(1.0 - std::real(frob_inner(mean, mean)));
          RelationEntry e;
          e.id = "input_switch";
          e.indices = {i + 1, r, c};
          e.residual = q;
          e.bound_kind = "36*eps";
          e.bound_value = 36.0 * d.eps;
          out.push_back(std::move(e));
        }
  }
  return out;
}

PauliFrame pauli_frame(const Dilation& d) {
  const int n = d.rounds();
  PauliFrame f;
  f.n = n;
  f.x_a.resize(2 * n);
  f.z_a.resize(2 * n);
  f.x_b.resize(2 * n);
  f.z_b.resize(2 * n);
  for (int k = 0; k < n; ++k) {
    f.x_a[2 * k] = d.alice_obs(1, 1, k);      // X_{2k-1}
    f.x_a[2 * k + 1] = d.alice_obs(1, 0, k);  // X_{2k}
    f.z_a[2 * k] = d.alice_obs(0, 0, k);      // Z_{2k-1}
    f.z_a[2 * k + 1] = d.alice_obs(0, 1, k);  // Z_{2k}
    f.x_b[2 * k] = d.bob_obs(1, 1, k);
    f.x_b[2 * k + 1] = d.bob_obs(1, 0, k);
    f.z_b[2 * k] = d.bob_obs(0, 0, k);
    f.z_b[2 * k + 1] = d.bob_obs(0, 1, k);
  }

  const Mat& psi = d.psi_eff;
  auto push = [&](std::string id, std::vector<int> idx, double resid) {
    RelationEntry e;
    e.id = std::move(id);
    e.indices = std::move(idx);
    e.residual = resid;
    e.bound_kind = "O(sqrt(eps))";
    f.relations.push_back(std::move(e));
  };
  for (int i = 0; i < 2 * n; ++i) {
    push("pauli.consistency.x", {i + 1}, (f.x_a[i] * psi - psi * f.x_b[i].transpose()).norm());
    push("pauli.consistency.z", {i + 1}, (f.z_a[i] * psi - psi * f.z_b[i].transpose()).norm());
    push("pauli.anticommute", {i + 1},
         ((f.x_a[i] * (f.z_a[i] * psi)) + (f.z_a[i] * (f.x_a[i] * psi))).norm());
  }
  for (int i = 0; i < 2 * n; ++i)
    for (int j = 0; j < 2 * n; ++j) {
      if (i == j) continue;
      push("pauli.commute.xx", {i + 1, j + 1},
           ((f.x_a[i] * (f.x_a[j] * psi)) - (f.x_a[j] * (f.x_a[i] * psi))).norm());
      push("pauli.commute.zz", {i + 1, j + 1},
           ((f.z_a[i] * (f.z_a[j] * psi)) - (f.z_a[j] * (f.z_a[i] * psi))).norm());
    }
  return f;
}

namespace {

Mat word_product(const std::vector<Mat>& ops, std::uint32_t bits, bool ascending, long dim) {
  Mat out = identity_mat(dim);
  if (ascending) {
    for (int i = 0; i < static_cast<int>(ops.size()); ++i)
      if (bits & (1u << i)) out = out * ops[i];
  } else {
    for (int i = static_cast<int>(ops.size()) - 1; i >= 0; --i)
      if (bits & (1u << i)) out = out * ops[i];
  }
  return out;
}

}  // namespace

LinearOperator word_to_observable(const Dilation& d, const PauliFrame& f, const PauliWord& w) {
  const int n = f.n;
  const long dim = w.side == Side::alice ? d.eff_dim_a : d.eff_dim_b;
  Mat m;
  if (w.side == Side::alice) {
    m = word_product(f.x_a, w.x_bits, true, dim) * word_product(f.z_a, w.z_bits, true, dim);
  } else {
    m = word_product(f.x_b, w.x_bits, false, dim) * word_product(f.z_b, w.z_bits, false, dim);
  }
  const RegisterLayout lay = d.dilated_layout();
  std::vector<int> regs;
  const int base = w.side == Side::alice ? 0 : 2 * n;
  for (int j = 0; j < n; ++j) regs.push_back(base + j);
  if (!d.inert) {
    const int anc_base = w.side == Side::alice ? n : 3 * n;
    for (int j = 0; j < n; ++j) regs.push_back(anc_base + j);
  }
  KronTerm term;
  term.factors.push_back(KronFactor{std::move(regs), std::move(m)});
  return LinearOperator::structured(lay, {std::move(term)}, TriState::unknown, TriState::yes);
}

SwapEngine::SwapEngine(const Dilation& d, const PauliFrame& f)
    : n_(f.n), psi_(d.psi_eff), xa_(f.x_a), za_(f.z_a), xb_(f.x_b), zb_(f.z_b) {}

Mat SwapEngine::x_word(Side side, std::uint32_t bits) {
  const int s = side == Side::alice ? 0 : 1;
  auto it = x_bank_[s].find(bits);
  if (it != x_bank_[s].end()) return it->second;
  Mat m;
  const auto& ops = side == Side::alice ? xa_ : xb_;
  const long dim = ops.front().rows();
  if (bits == 0) {
    m = identity_mat(dim);
  } else if (side == Side::alice) {
    // ascending product: rightmost factor has the highest index
    const int j = 31 - std::countl_zero(bits);
    m = x_word(side, bits & ~(1u << j)) * ops[j];
  } else {
    // descending product: rightmost factor has the lowest index
    const int j = std::countr_zero(bits);
    m = x_word(side, bits & ~(1u << j)) * ops[j];
  }
  x_bank_[s].emplace(bits, m);
  return m;
}

Mat SwapEngine::z_word(Side side, std::uint32_t bits) {
  const int s = side == Side::alice ? 0 : 1;
  auto it = z_bank_[s].find(bits);
  if (it != z_bank_[s].end()) return it->second;
  Mat m;
  const auto& ops = side == Side::alice ? za_ : zb_;
  const long dim = ops.front().rows();
  if (bits == 0) {
    m = identity_mat(dim);
  } else if (side == Side::alice) {
    const int j = 31 - std::countl_zero(bits);
    m = z_word(side, bits & ~(1u << j)) * ops[j];
  } else {
    const int j = std::countr_zero(bits);
    m = z_word(side, bits & ~(1u << j)) * ops[j];
  }
  z_bank_[s].emplace(bits, m);
  return m;
}

Mat SwapEngine::word_matrix(Side side, std::uint32_t x_bits, std::uint32_t z_bits) {
  return x_word(side, x_bits) * z_word(side, z_bits);
}

const Mat& SwapEngine::f_x(Side side, std::uint32_t s) {
  const int si = side == Side::alice ? 0 : 1;
  auto it = fx_bank_[si].find(s);
  if (it != fx_bank_[si].end()) return it->second;
  const long nlabels = 1L << (2 * n_);
  Mat sum = Mat::Zero(side == Side::alice ? psi_.rows() : psi_.cols(),
                      side == Side::alice ? psi_.rows() : psi_.cols());
  for (long a = 0; a < nlabels; ++a) {
    const std::uint32_t au = static_cast<std::uint32_t>(a);
    sum += x_word(side, au ^ s).adjoint() * x_word(side, au);
  }
  return fx_bank_[si].emplace(s, std::move(sum)).first->second;
}

const Mat& SwapEngine::g_op(Side side, std::uint32_t s, std::uint32_t t) {
  const int si = side == Side::alice ? 0 : 1;
  const std::uint64_t key = (static_cast<std::uint64_t>(s) << 32) | t;
  auto it = g_bank_[si].find(key);
  if (it != g_bank_[si].end()) return it->second;
  const long nlabels = 1L << (2 * n_);
  const Mat& fx = f_x(side, s);
  Mat sum = Mat::Zero(fx.rows(), fx.cols());
  for (long b = 0; b < nlabels; ++b) {
    const std::uint32_t bu = static_cast<std::uint32_t>(b);
    const double sign = std::popcount((bu ^ t) & s) % 2 ? -1.0 : 1.0;
    sum += sign * (z_word(side, bu ^ t).adjoint() * fx * z_word(side, bu));
  }
  return g_bank_[si].emplace(key, std::move(sum)).first->second;
}

SwapEngine::Expectation SwapEngine::full(std::uint32_t s, std::uint32_t t, std::uint32_t u,
                                         std::uint32_t v) {
  const std::uint32_t mask = (1u << (2 * n_)) - 1;
  if ((s | t | u | v) & ~mask) throw ContractError("pauli label exceeds 2n bits");
  const Mat& ga = g_op(Side::alice, s, t);
  const Mat& gb = g_op(Side::bob, u, v);
  const double scale = std::pow(2.0, -8.0 * n_);
  Expectation e;
  e.iso = scale * frob_inner(psi_, ga * psi_ * gb.transpose());
  e.direct = frob_inner(psi_, word_matrix(Side::alice, s, t) * psi_ *
                                  word_matrix(Side::bob, u, v).transpose());
  e.discrepancy = std::abs(e.iso - e.direct);
  return e;
}

SwapEngine::Sampled SwapEngine::sampled(std::uint32_t s, std::uint32_t t, std::uint32_t u,
                                        std::uint32_t v, long budget, std::uint64_t seed) {
  if (budget < 2) throw ContractError("sampled mode needs a budget of at least 2");
  RandomGen rng(seed);
  const std::uint32_t mask = (1u << (2 * n_)) - 1;
  cdouble sum = 0.0;
  double sum_sq = 0.0;
  std::vector<cdouble> vals(budget);
  for (long i = 0; i < budget; ++i) {
    const std::uint32_t a = static_cast<std::uint32_t>(rng.bits()) & mask;
    const std::uint32_t b = static_cast<std::uint32_t>(rng.bits()) & mask;
    const std::uint32_t dd = static_cast<std::uint32_t>(rng.bits()) & mask;
    const std::uint32_t e = static_cast<std::uint32_t>(rng.bits()) & mask;
    const double sign_a = std::popcount((b ^ t) & s) % 2 ? -1.0 : 1.0;
    const double sign_b = std::popcount((e ^ v) & u) % 2 ? -1.0 : 1.0;
    const Mat lhs = word_matrix(Side::alice, a ^ s, b ^ t) * psi_ *
                    word_matrix(Side::bob, dd ^ u, e ^ v).transpose();
    const Mat rhs = word_matrix(Side::alice, a, b) * psi_ * word_matrix(Side::bob, dd, e).transpose();
    vals[i] = sign_a * sign_b * frob_inner(lhs, rhs);
    sum += vals[i];
  }
  const cdouble mean = sum / static_cast<double>(budget);
  for (long i = 0; i < budget; ++i) sum_sq += std::norm(vals[i] - mean);
  Sampled out;
  out.estimate = mean;
  out.std_error = std::sqrt(sum_sq / (static_cast<double>(budget) * (budget - 1)));
  out.samples = budget;
  return out;
}

SwapEngine::Expectation swap_isometry_expectation(const Dilation& d, const PauliFrame& f,
                                                  std::uint32_t s, std::uint32_t t,
                                                  std::uint32_t u, std::uint32_t v) {
  SwapEngine engine(d, f);
  return engine.full(s, t, u, v);
}

const std::array<MagicTerm, 10>& magic_round_terms() {
  // Per-round decomposition of M_1; bit 0 = qubit 2k-1, bit 1 = qubit 2k.
  static const std::array<MagicTerm, 10> terms = {{
      {0u, 0u, 0.5},          // identity
      {2u, 0u, 1.0 / 18.0},   // IXIX
      {1u, 0u, 1.0 / 18.0},   // XIXI
      {3u, 0u, 1.0 / 18.0},   // XXXX
      {0u, 1u, 1.0 / 18.0},   // ZIZI
      {0u, 2u, 1.0 / 18.0},   // IZIZ
      {0u, 3u, 1.0 / 18.0},   // ZZZZ
      {1u, 2u, 1.0 / 18.0},   // XZXZ
      {2u, 1u, 1.0 / 18.0},   // ZXZX
      {3u, 3u, 1.0 / 18.0},   // YYYY
  }};
  return terms;
}

FidelityResult epr_fidelity(SwapEngine& engine, std::optional<long> sample_budget,
                            std::uint64_t seed) {
  const int n = engine.qubits() / 2;
  const auto& terms = magic_round_terms();
  FidelityResult res;
  if (!sample_budget) {
    if (n > 2)
      throw FeasibilityError("epr_fidelity: full label sum supported for n <= 2; use sampling");
    // all 10^n per-round label combinations
    const long count = pow_long(10, n);
    cdouble total = 0.0;
    for (long x = 0; x < count; ++x) {
      long rem = x;
      double w = 1.0;
      std::uint32_t s = 0, t = 0;
      for (int k = 0; k < n; ++k) {
        const MagicTerm& term = terms[rem % 10];
        rem /= 10;
        w *= term.weight;
        s |= term.s << (2 * k);
        t |= term.t << (2 * k);
      }
      total += w * engine.full(s, t, s, t).iso;
    }
    if (std::abs(total.imag()) > 1e-9)
      throw ContractError("M_n expectation has non-negligible imaginary part");
    res.m_expectation = total.real();
    res.labels_used = count;
  } else {
    // per-round terms drawn with probability equal to their weight
    RandomGen rng(seed);
    const long budget = *sample_budget;
    if (budget < 2) throw ContractError("epr_fidelity: sampling budget too small");
    std::vector<double> vals(budget);
    double sum = 0.0;
    for (long i = 0; i < budget; ++i) {
      std::uint32_t s = 0, t = 0;
      for (int k = 0; k < n; ++k) {
        double x = rng.uniform();
        int pick = 0;
        for (; pick < 9; ++pick) {
          if (x < terms[pick].weight) break;
          x -= terms[pick].weight;
        }
        s |= terms[pick].s << (2 * k);
        t |= terms[pick].t << (2 * k);
      }
      vals[i] = std::real(engine.full(s, t, s, t).iso);
      sum += vals[i];
    }
    res.m_expectation = sum / static_cast<double>(budget);
    double var = 0.0;
    for (double v : vals) var += (v - res.m_expectation) * (v - res.m_expectation);
    res.sampled = true;
    res.std_error = std::sqrt(var / (static_cast<double>(budget) * (budget - 1)));
    res.labels_used = budget;
  }
  const double deficit = std::max(0.0, 1.0 - res.m_expectation);
  res.fidelity_bound = std::clamp(1.0 - 2.25 * deficit, 0.0, 1.0);
  return res;
}

FidelityResult epr_fidelity(const Dilation& d, const PauliFrame& f,
                            std::optional<long> sample_budget, std::uint64_t seed) {
  SwapEngine engine(d, f);
  return epr_fidelity(engine, sample_budget, seed);
}

namespace {

RegisterLayout magic_layout(int n) {
  std::vector<RegisterSpec> regs;
  static const char* names[4] = {"A1", "A2", "B1", "B2"};
  for (int k = 1; k <= n; ++k)
    for (int q = 0; q < 4; ++q)
      regs.push_back({"r" + std::to_string(k) + "." + names[q], 2});
  return RegisterLayout(std::move(regs));
}

Mat magic_m1_dense() {
  const Mat X = pauli_x();
  const Mat Z = pauli_z();
  auto qubit_word = [&](std::uint32_t s, std::uint32_t t, int bit) {
    Mat m = identity_mat(2);
    if (s & (1u << bit)) m = m * X;
    if (t & (1u << bit)) m = m * Z;
    return m;
  };
  Mat m1 = Mat::Zero(16, 16);
  for (const MagicTerm& term : magic_round_terms()) {
    // qubit order (A1, A2, B1, B2); bit 0 of the mask is the first qubit
    const Mat w = kron_dense({qubit_word(term.s, term.t, 0), qubit_word(term.s, term.t, 1),
                              qubit_word(term.s, term.t, 0), qubit_word(term.s, term.t, 1)});
    m1 += term.weight * w;
  }
  return m1;
}

}  // namespace

LinearOperator magic_operator(int n) {
  if (n < 1 || n > 3) throw FeasibilityError("magic_operator: n must be in [1, 3]");
  Mat m = magic_m1_dense();
  Mat acc = m;
  for (int k = 1; k < n; ++k) acc = kron_dense(acc, m);
  return LinearOperator::dense(magic_layout(n), std::move(acc), TriState::yes);
}

Vec magic_top_state(int n) {
  Vec per_round = Vec::Zero(16);
  // (A1,A2,B1,B2) with EPR pairs (A1,B1), (A2,B2)
  for (int a1 = 0; a1 < 2; ++a1)
    for (int a2 = 0; a2 < 2; ++a2) per_round[(((a1 * 2 + a2) * 2 + a1) * 2 + a2)] = 0.5;
  Vec out = per_round;
  for (int k = 1; k < n; ++k) {
    Vec next(out.size() * 16);
    for (long i = 0; i < out.size(); ++i)
      for (long j = 0; j < 16; ++j) next[i * 16 + j] = out[i] * per_round[j];
    out = std::move(next);
  }
  return out;
}

MagicSpectrumReport magic_spectrum(int n) {
  const LinearOperator m = magic_operator(n);
  const EigResult eig = hermitian_eig(m);
  MagicSpectrumReport rep;
  rep.n = n;
  rep.top_eigenvalue = eig.values[0];
  rep.top_multiplicity = 0;
  for (long i = 0; i < eig.values.size(); ++i)
    if (std::abs(eig.values[i] - eig.values[0]) <= 1e-10) ++rep.top_multiplicity;
  rep.second_largest_abs = 0.0;
  for (long i = rep.top_multiplicity; i < eig.values.size(); ++i)
    rep.second_largest_abs = std::max(rep.second_largest_abs, std::abs(eig.values[i]));
  const Vec epr = magic_top_state(n);
  rep.epr_overlap = std::norm(epr.dot(eig.vectors.col(0)));
  const Mat dense = m.densify();
  const Mat proj = epr * epr.adjoint();
  const Mat gap = proj + (5.0 / 9.0) * (identity_mat(dense.rows()) - proj) - dense;
  const EigResult gap_eig = hermitian_eig(gap);
  rep.dominance_min_eig = gap_eig.values[gap_eig.values.size() - 1];
  return rep;
}

ImplicationAudit magic_implication_audit(int trials, std::uint64_t seed) {
  const Mat m1 = magic_m1_dense();
  const Vec epr = magic_top_state(1);
  RandomGen rng(seed);
  ImplicationAudit audit;
  audit.trials = trials;
  audit.min_slack = std::numeric_limits<double>::infinity();
  for (int i = 0; i < trials; ++i) {
    const Mat g = rng.complex_matrix(16, 16);
    Mat rho = g * g.adjoint();
    rho /= rho.trace().real();
    const double delta = 1.0 - std::real((m1 * rho).trace());
    const double fid = std::real(epr.dot(rho * epr));
    const double slack = fid - (1.0 - 2.25 * delta);
    audit.min_slack = std::min(audit.min_slack, slack);
    if (slack < -1e-10) ++audit.failures;
  }
  return audit;
}

AppendixBReport appendix_b_audit(const PureStrategy& s) {
  if (s.n != 1) throw ContractError("appendix_b_audit: single-round strategies only");
  AppendixBReport rep;
  rep.eps = 1.0 - win_probability(s);

  auto aop = [&](int r, int c) {
    return s.block_observable(Side::alice, {r}, {c}, {1});
  };
  auto bop = [&](int r, int c) {
    return s.block_observable(Side::bob, {c}, {r}, {1});
  };
  const Mat X1 = aop(1, 1), X2 = aop(1, 0), Z1 = aop(0, 0), Z2 = aop(0, 1);
  const Mat W1 = aop(2, 0), W2 = aop(2, 1);
  const Mat X3 = bop(1, 1), X4 = bop(1, 0), Z3 = bop(0, 0), Z4 = bop(0, 1);
  const Mat W3 = bop(0, 2), W4 = bop(1, 2);

  struct Factor {
    Side side;
    const Mat* op;
  };
  const Mat psi = s.psi_matrix();
  auto eval = [&](double sign, std::initializer_list<Factor> word) {
    Mat phi = psi;
    const std::vector<Factor> fs(word);
    for (auto it = fs.rbegin(); it != fs.rend(); ++it) {
      if (it->side == Side::alice) {
        phi = (*it->op) * phi;
      } else {
        phi = phi * it->op->transpose();
      }
    }
    return Mat(sign * phi);
  };
  auto expectation = [&](double sign, std::initializer_list<Factor> word) {
    const cdouble v = frob_inner(psi, eval(sign, word));
    if (std::abs(v.imag()) > 1e-9)
      throw ContractError("win-condition expectation has imaginary part");
    return v.real();
  };

  const Side A = Side::alice;
  const Side B = Side::bob;
  const double bound = 1.0 - 9.0 * rep.eps;
  const std::array<std::pair<std::string, double>, 9> values = {{
      {"win1", expectation(+1, {{A, &Z1}, {B, &Z3}})},
      {"win2", expectation(+1, {{A, &Z2}, {B, &Z4}})},
      {"win3", expectation(+1, {{A, &Z1}, {A, &Z2}, {B, &W3}})},
      {"win4", expectation(+1, {{A, &X2}, {B, &X4}})},
      {"win5", expectation(+1, {{A, &X1}, {B, &X3}})},
      {"win6", expectation(+1, {{A, &X1}, {A, &X2}, {B, &W4}})},
      {"win7", expectation(-1, {{A, &W1}, {B, &Z3}, {B, &X4}})},
      {"win8", expectation(-1, {{A, &W2}, {B, &Z4}, {B, &X3}})},
      {"win9", expectation(-1, {{A, &W1}, {A, &W2}, {B, &W3}, {B, &W4}})},
  }};
  for (size_t i = 0; i < 9; ++i) {
    rep.wins[i] = {values[i].first, values[i].second, bound, values[i].second >= bound - 1e-6};
  }

  // the X1 Z1 ~ -Z1 X1 derivation chain, one expression per step
  const std::vector<std::pair<double, std::vector<Factor>>> chain = {
      {+1, {{A, &X1}, {A, &Z1}}},
      {+1, {{A, &X1}, {A, &Z2}, {B, &W3}}},
      {+1, {{B, &W3}, {A, &X1}, {A, &Z2}}},
      {+1, {{B, &W3}, {A, &X1}, {B, &Z4}}},
      {+1, {{B, &W3}, {B, &Z4}, {B, &X3}}},
      {-1, {{B, &W3}, {A, &W2}}},
      {+1, {{B, &W3}, {A, &W1}, {B, &W3}, {B, &W4}}},
      {+1, {{A, &W1}, {B, &W4}}},
      {-1, {{B, &W4}, {B, &Z3}, {B, &X4}}},
      {-1, {{A, &Z1}, {B, &W4}, {B, &X4}}},
      {-1, {{A, &Z1}, {A, &X2}, {B, &W4}}},
      {-1, {{A, &Z1}, {A, &X2}, {A, &X2}, {A, &X1}}},
      {-1, {{A, &Z1}, {A, &X1}}},
  };
  std::vector<Mat> states;
  states.reserve(chain.size());
  for (const auto& [sign, word] : chain) {
    Mat phi = psi;
    for (auto it = word.rbegin(); it != word.rend(); ++it) {
      if (it->side == Side::alice) {
        phi = (*it->op) * phi;
      } else {
        phi = phi * it->op->transpose();
      }
    }
    states.push_back(sign * phi);
  }
  rep.chain_total = 0.0;
  for (size_t i = 0; i + 1 < states.size(); ++i) {
    rep.chain_steps.push_back((states[i] - states[i + 1]).norm());
    rep.chain_total += rep.chain_steps.back();
  }
  rep.direct_residual = (states.front() - states.back()).norm();
  rep.chain_dominates = rep.direct_residual <= rep.chain_total + 1e-9;
  return rep;
}

std::string RigidityReport::to_json_string() const {
  ordered_json j;
  j["schema"] = "msq.rigidity-report/1";
  j["meta"] = {{"n", n},
               {"eps", eps},
               {"seed", seed},
               {"kind", kind},
               {"convention", convention}};
  ordered_json rels = ordered_json::array();
  for (const auto& r : relations) {
    ordered_json e;
    e["id"] = r.id;
    e["indices"] = r.indices;
    e["residual"] = r.residual;
    e["bound_kind"] = r.bound_kind;
    if (std::isnan(r.bound_value)) {
      e["bound_value"] = nullptr;
    } else {
      e["bound_value"] = r.bound_value;
    }
    rels.push_back(std::move(e));
  }
  j["relations"] = std::move(rels);
  j["fidelity"] = {{"m_expectation", m_expectation}, {"fidelity_bound", fidelity_bound}};
  ordered_json table = ordered_json::array();
  for (const auto& p : pauli_table) {
    ordered_json e;
    e["s"] = p.s;
    e["t"] = p.t;
    e["u"] = p.u;
    e["v"] = p.v;
    e["iso_value"] = {{"re", p.iso_value.real()}, {"im", p.iso_value.imag()}};
    e["direct_value"] = {{"re", p.direct_value.real()}, {"im", p.direct_value.imag()}};
    e["discrepancy"] = p.discrepancy;
    table.push_back(std::move(e));
  }
  j["pauli_table"] = std::move(table);
  return j.dump(2);
}

}  // namespace msq
