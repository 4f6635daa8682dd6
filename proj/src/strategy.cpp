#include "msq/strategy.hpp"

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

std::vector<int> digits_base(long x, int base, int n) {
  std::vector<int> d(n);
  for (int k = 0; k < n; ++k) {
    d[k] = static_cast<int>(x % base);
    x /= base;
  }
  return d;
}

long question_index(const std::vector<int>& v) {
  long q = 0;
  for (int k = static_cast<int>(v.size()) - 1; k >= 0; --k) {
    if (v[k] < 0 || v[k] > 2) throw ContractError("question symbol out of range");
    q = q * 3 + v[k];
  }
  return q;
}

// Round answer bit selected by the other player's symbol.
int alice_bit(int a0, int a1, int col) {
  switch (col) {
    case 0: return a0;
    case 1: return a1;
    case 2: return a0 ^ a1;
    default: throw ContractError("column out of range");
  }
}

int bob_bit(int b0, int b1, int row) {
  switch (row) {
    case 0: return b0;
    case 1: return b1;
    case 2: return 1 ^ b0 ^ b1;
    default: throw ContractError("row out of range");
  }
}

RegisterLayout strategy_layout(const std::vector<long>& dims_a, const std::vector<long>& dims_b) {
  std::vector<RegisterSpec> regs;
  for (size_t k = 0; k < dims_a.size(); ++k)
    regs.push_back({"A" + std::to_string(k + 1), dims_a[k]});
  for (size_t k = 0; k < dims_b.size(); ++k)
    regs.push_back({"B" + std::to_string(k + 1), dims_b[k]});
  return RegisterLayout(std::move(regs));
}

void check_family(const std::vector<Mat>& fam, long dim) {
  Mat sum = Mat::Zero(dim, dim);
  for (size_t i = 0; i < fam.size(); ++i) {
    const Mat& p = fam[i];
    if (p.rows() != dim || p.cols() != dim) throw ContractError("projector has wrong dimension");
    if (!is_projector(p)) throw ContractError("family member is not a projector at 1e-10");
    for (size_t j = i + 1; j < fam.size(); ++j) {
      if (max_abs(p * fam[j]) > kFlagTol) throw ContractError("projectors are not orthogonal");
    }
    sum += p;
  }
  if (max_abs(sum - Mat::Identity(dim, dim)) > kFlagTol)
    throw ContractError("projector family is not complete");
}

}  // namespace

long PureStrategy::dim_a() const {
  long d = 1;
  for (long x : dims_a) d *= x;
  return d;
}

long PureStrategy::dim_b() const {
  long d = 1;
  for (long x : dims_b) d *= x;
  return d;
}

long PureStrategy::num_questions() const { return pow_long(3, n); }
long PureStrategy::num_answers() const { return pow_long(4, n); }

Mat PureStrategy::projector(Side side, long question, long answer) const {
  const auto& general = side == Side::alice ? general_a : general_b;
  if (!is_product()) return general.at(question).at(answer);
  const auto& rounds = side == Side::alice ? rounds_a : rounds_b;
  const auto q = digits_base(question, 3, n);
  const auto a = digits_base(answer, 4, n);
  std::vector<Mat> factors(n);
  for (int k = 0; k < n; ++k) factors[k] = rounds[k].proj[q[k]][a[k]];
  return kron_dense(factors);
}

Mat PureStrategy::round_observable(Side side, int k, int r, int c) const {
  if (!is_product()) throw ContractError("round_observable requires product form");
  const auto& fam = side == Side::alice ? rounds_a.at(k) : rounds_b.at(k);
  const int own = side == Side::alice ? r : c;
  Mat o = Mat::Zero(fam.dim, fam.dim);
  for (int a1 = 0; a1 < 2; ++a1) {
    for (int a0 = 0; a0 < 2; ++a0) {
      const int bit = side == Side::alice ? alice_bit(a0, a1, c) : bob_bit(a0, a1, r);
      o += (bit ? -1.0 : 1.0) * fam.proj[own][a0 + 2 * a1];
    }
  }
  return o;
}

Mat PureStrategy::block_observable(Side side, const std::vector<int>& own,
                                   const std::vector<int>& other,
                                   const std::vector<int>& parity) const {
  if (static_cast<int>(own.size()) != n || static_cast<int>(other.size()) != n ||
      static_cast<int>(parity.size()) != n) {
    throw ContractError("block_observable: vector length mismatch");
  }
  if (is_product()) {
    std::vector<Mat> factors(n);
    for (int k = 0; k < n; ++k) {
      const long d = (side == Side::alice ? dims_a : dims_b)[k];
      if (parity[k] == 0) {
        factors[k] = Mat::Identity(d, d);
      } else {
        const int r = side == Side::alice ? own[k] : other[k];
        const int c = side == Side::alice ? other[k] : own[k];
        factors[k] = round_observable(side, k, r, c);
      }
    }
    return kron_dense(factors);
  }
  const auto& general = side == Side::alice ? general_a : general_b;
  const long dim = side == Side::alice ? dim_a() : dim_b();
  const auto& fam = general.at(question_index(own));
  Mat o = Mat::Zero(dim, dim);
  for (long ans = 0; ans < num_answers(); ++ans) {
    const auto digits = digits_base(ans, 4, n);
    int sign = 0;
    for (int k = 0; k < n; ++k) {
      if (!parity[k]) continue;
      const int a0 = digits[k] & 1;
      const int a1 = digits[k] >> 1;
      sign ^= side == Side::alice ? alice_bit(a0, a1, other[k]) : bob_bit(a0, a1, other[k]);
    }
    o += (sign ? -1.0 : 1.0) * fam[ans];
  }
  return o;
}

void PureStrategy::validate() const {
  if (std::abs(psi.amps.norm() - 1.0) > 1e-12) throw ContractError("strategy state not unit norm");
  if (is_product()) {
    for (int k = 0; k < n; ++k) {
      for (int q = 0; q < 3; ++q) {
        check_family({rounds_a[k].proj[q].begin(), rounds_a[k].proj[q].end()}, dims_a[k]);
        check_family({rounds_b[k].proj[q].begin(), rounds_b[k].proj[q].end()}, dims_b[k]);
      }
    }
  } else {
    for (long q = 0; q < num_questions(); ++q) {
      check_family(general_a.at(q), dim_a());
      check_family(general_b.at(q), dim_b());
    }
  }
}

Mat PureStrategy::psi_matrix() const {
  const long da = dim_a();
  const long db = dim_b();
  Mat m(da, db);
  for (long i = 0; i < da; ++i)
    for (long j = 0; j < db; ++j) m(i, j) = psi.amps[i * db + j];
  return m;
}

PureStrategy ideal_single_round() { return ideal_parallel(1); }

PureStrategy ideal_parallel(int n) {
  if (n < 1) throw ContractError("ideal_parallel: n must be >= 1");
  if (n > 3) throw FeasibilityError("ideal_parallel: dense path supports n <= 3");
  const Mat I2 = identity_mat(2);
  const Mat X = pauli_x();
  const Mat Z = pauli_z();
  const Mat ZX = kron_dense(Z, X);
  const Mat XZ = kron_dense(X, Z);
  const Mat ZZ = kron_dense(Z, Z);
  const Mat XX = kron_dense(X, X);
  const Mat I4 = identity_mat(4);

  RoundFamily alice, bob;
  alice.dim = bob.dim = 4;
  for (int a1 = 0; a1 < 2; ++a1) {
    for (int a0 = 0; a0 < 2; ++a0) {
      const double s0 = a0 ? -1.0 : 1.0;
      const double s1 = a1 ? -1.0 : 1.0;
      const int idx = a0 + 2 * a1;
      alice.proj[0][idx] = 0.25 * kron_dense(I2 + s0 * Z, I2 + s1 * Z);
      alice.proj[1][idx] = 0.25 * kron_dense(I2 + s1 * X, I2 + s0 * X);
      alice.proj[2][idx] = 0.25 * (I4 - s0 * ZX) * (I4 - s1 * XZ);
      bob.proj[0][idx] = 0.25 * kron_dense(I2 + s0 * Z, I2 + s1 * X);
      bob.proj[1][idx] = 0.25 * kron_dense(I2 + s1 * X, I2 + s0 * Z);
      bob.proj[2][idx] = 0.25 * (I4 + s0 * ZZ) * (I4 + s1 * XX);
    }
  }

  PureStrategy s;
  s.n = n;
  s.dims_a.assign(n, 4);
  s.dims_b.assign(n, 4);
  s.rounds_a.assign(n, alice);
  s.rounds_b.assign(n, bob);

  const long da = s.dim_a();
  const long db = s.dim_b();
  Vec amps = Vec::Zero(da * db);
  const double amp = std::pow(0.5, n);
  for (long i = 0; i < da; ++i) amps[i * db + i] = amp;
  s.psi = StateVector::make(strategy_layout(s.dims_a, s.dims_b), std::move(amps));
  return s;
}

PureStrategy classical_embedding(int alice_fn, int bob_fn) {
  if (alice_fn < 0 || alice_fn >= 64 || bob_fn < 0 || bob_fn >= 64)
    throw ContractError("classical_embedding: answer function out of range");
  RoundFamily alice, bob;
  alice.dim = bob.dim = 4;
  for (int q = 0; q < 3; ++q) {
    const int fa = (alice_fn >> (2 * q)) & 3;
    const int fb = (bob_fn >> (2 * q)) & 3;
    for (int a = 0; a < 4; ++a) {
      Mat pa = Mat::Zero(4, 4);
      pa(a ^ fa, a ^ fa) = 1.0;
      alice.proj[q][a] = pa;
      Mat pb = Mat::Zero(4, 4);
      pb(a ^ fb, a ^ fb) = 1.0;
      bob.proj[q][a] = pb;
    }
  }
  PureStrategy s;
  s.n = 1;
  s.dims_a = {4};
  s.dims_b = {4};
  s.rounds_a = {alice};
  s.rounds_b = {bob};
  Vec amps = Vec::Zero(16);
  amps[0] = 1.0;
  s.psi = StateVector::make(strategy_layout(s.dims_a, s.dims_b), std::move(amps));
  return s;
}

namespace {

// Per-round "agree on the intersection cell" operator: sum over t of
// (coarse Alice projector for a_c = t) kron (coarse Bob projector for
// b_r = t), on the round's A_k and B_k registers.
Mat round_win_block(const PureStrategy& s, int k, int r, int c) {
  const long da = s.dims_a[k];
  const long db = s.dims_b[k];
  Mat w = Mat::Zero(da * db, da * db);
  for (int t = 0; t < 2; ++t) {
    Mat pa = Mat::Zero(da, da);
    Mat qb = Mat::Zero(db, db);
    for (int a1 = 0; a1 < 2; ++a1) {
      for (int a0 = 0; a0 < 2; ++a0) {
        if (alice_bit(a0, a1, c) == t) pa += s.rounds_a[k].proj[r][a0 + 2 * a1];
        if (bob_bit(a0, a1, r) == t) qb += s.rounds_b[k].proj[c][a0 + 2 * a1];
      }
    }
    w += kron_dense(pa, qb);
  }
  return w;
}

double win_probability_product(const PureStrategy& s) {
  const int n = s.n;
  // win blocks as lazy operators on the (A_k, B_k) register pair
  std::vector<std::array<std::array<LinearOperator, 3>, 3>> win(n);
  for (int k = 0; k < n; ++k) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        KronTerm term;
        term.factors.push_back(KronFactor{{k, n + k}, round_win_block(s, k, r, c)});
        win[k][r][c] = LinearOperator::structured(s.psi.layout, {term}, TriState::yes);
      }
    }
  }
  const long nq = pow_long(3, n);
  double total = 0.0;
  for (long qa = 0; qa < nq; ++qa) {
    const auto rvec = digits_base(qa, 3, n);
    for (long qb = 0; qb < nq; ++qb) {
      const auto cvec = digits_base(qb, 3, n);
      Vec w = s.psi.amps;
      for (int k = 0; k < n; ++k) w = win[k][rvec[k]][cvec[k]].apply(w);
      total += std::real(s.psi.amps.dot(w));
    }
  }
  return total / static_cast<double>(nq * nq);
}

double win_probability_general(const PureStrategy& s) {
  const int n = s.n;
  const long da = s.dim_a();
  const long db = s.dim_b();
  const long nq = s.num_questions();
  const long na = s.num_answers();
  const long nt = pow_long(2, n);
  const Mat psi = s.psi_matrix();
  double total = 0.0;
  std::vector<Mat> ga(nt), hb(nt);
  for (long qa = 0; qa < nq; ++qa) {
    const auto rvec = digits_base(qa, 3, n);
    for (long qb = 0; qb < nq; ++qb) {
      const auto cvec = digits_base(qb, 3, n);
      for (long t = 0; t < nt; ++t) {
        ga[t] = Mat::Zero(da, da);
        hb[t] = Mat::Zero(db, db);
      }
      for (long ans = 0; ans < na; ++ans) {
        const auto digits = digits_base(ans, 4, n);
        long ta = 0, tb = 0;
        for (int k = n - 1; k >= 0; --k) {
          const int x0 = digits[k] & 1;
          const int x1 = digits[k] >> 1;
          ta = 2 * ta + alice_bit(x0, x1, cvec[k]);
          tb = 2 * tb + bob_bit(x0, x1, rvec[k]);
        }
        ga[ta] += s.general_a[qa][ans];
        hb[tb] += s.general_b[qb][ans];
      }
      for (long t = 0; t < nt; ++t) {
        total += std::real((psi.conjugate().cwiseProduct(ga[t] * psi * hb[t].transpose())).sum());
      }
    }
  }
  return total / static_cast<double>(nq * nq);
}

}  // namespace

double win_probability(const PureStrategy& s) {
  return s.is_product() ? win_probability_product(s) : win_probability_general(s);
}

OutputObservable output_observable(const PureStrategy& s, Side side,
                                   const std::vector<int>& input,
                                   const std::vector<int>& parity,
                                   const std::vector<int>& other) {
  for (int p : parity)
    if (p != 0 && p != 1) throw ContractError("parity vector entries must be bits");
  // completeness gate: an incomplete family would break the observable laws
  if (s.is_product()) {
    for (int k = 0; k < s.n; ++k) {
      const auto& fam = side == Side::alice ? s.rounds_a[k] : s.rounds_b[k];
      Mat sum = Mat::Zero(fam.dim, fam.dim);
      for (const Mat& p : fam.proj[input[k]]) sum += p;
      if (max_abs(sum - Mat::Identity(fam.dim, fam.dim)) > kFlagTol)
        throw ContractError("projector family incomplete");
    }
  } else {
    const auto& fam =
        (side == Side::alice ? s.general_a : s.general_b).at(question_index(input));
    const long d = side == Side::alice ? s.dim_a() : s.dim_b();
    Mat sum = Mat::Zero(d, d);
    for (const Mat& p : fam) sum += p;
    if (max_abs(sum - Mat::Identity(d, d)) > kFlagTol)
      throw ContractError("projector family incomplete");
  }

  const Mat block = s.block_observable(side, input, other, parity);
  if (!is_hermitian(block)) throw ContractError("output observable fails hermitian check");
  if (!is_unitary(block)) throw ContractError("output observable fails unitary check");

  KronTerm term;
  std::vector<int> regs;
  const int base = side == Side::alice ? 0 : s.n;
  for (int k = 0; k < s.n; ++k) regs.push_back(base + k);
  term.factors.push_back(KronFactor{regs, block});
  OutputObservable out{
      LinearOperator::structured(s.psi.layout, {term}, TriState::yes, TriState::yes), side,
      input, other, parity};
  return out;
}

double correlation(const PureStrategy& s, const std::vector<int>& rvec,
                   const std::vector<int>& cvec, const std::vector<int>& pvec) {
  const Mat a = s.block_observable(Side::alice, rvec, cvec, pvec);
  const Mat b = s.block_observable(Side::bob, cvec, rvec, pvec);
  const Mat psi = s.psi_matrix();
  const cdouble v = (psi.conjugate().cwiseProduct(a * psi * b.transpose())).sum();
  if (std::abs(v.imag()) > 1e-10)
    throw ContractError("correlation has non-negligible imaginary part");
  return v.real();
}

namespace {

struct RotationPlan {
  // eigendecomposition of the Hermitian generator per (round, symbol)
  struct Gen {
    Mat vectors;
    Eigen::VectorXd eigs;
  };
  std::vector<std::array<Gen, 3>> alice, bob;
  Vec chi;  // orthogonal state direction (state kinds)
};

RotationPlan make_plan(const PureStrategy& s, std::uint64_t seed, PerturbKind kind) {
  RandomGen rng(seed);
  RotationPlan plan;
  if (kind != PerturbKind::measurement_rotate) {
    Vec chi = rng.unit_vector(s.psi.amps.size());
    chi -= s.psi.amps * s.psi.amps.dot(chi);
    const double nrm = chi.norm();
    if (nrm < 1e-8) throw CalibrationError("degenerate random direction");
    plan.chi = chi / nrm;
  }
  if (kind != PerturbKind::state_mix) {
    plan.alice.resize(s.n);
    plan.bob.resize(s.n);
    for (int k = 0; k < s.n; ++k) {
      for (int r = 0; r < 3; ++r) {
        Eigen::SelfAdjointEigenSolver<Mat> ea(rng.hermitian(s.dims_a[k]));
        plan.alice[k][r] = {ea.eigenvectors(), ea.eigenvalues()};
        Eigen::SelfAdjointEigenSolver<Mat> eb(rng.hermitian(s.dims_b[k]));
        plan.bob[k][r] = {eb.eigenvectors(), eb.eigenvalues()};
      }
    }
  }
  return plan;
}

PureStrategy apply_plan(const PureStrategy& s, const RotationPlan& plan, double theta,
                        PerturbKind kind) {
  PureStrategy out = s;
  if (kind != PerturbKind::state_mix) {
    auto rotate = [&](std::vector<RoundFamily>& rounds,
                      const std::vector<std::array<RotationPlan::Gen, 3>>& gens) {
      for (int k = 0; k < s.n; ++k) {
        for (int r = 0; r < 3; ++r) {
          const auto& g = gens[k][r];
          Vec phases(g.eigs.size());
          for (long i = 0; i < g.eigs.size(); ++i)
            phases[i] = std::exp(cdouble(0.0, theta * g.eigs[i]));
          const Mat u = g.vectors * phases.asDiagonal() * g.vectors.adjoint();
          for (int a = 0; a < 4; ++a)
            rounds[k].proj[r][a] = u * rounds[k].proj[r][a] * u.adjoint();
        }
      }
    };
    rotate(out.rounds_a, plan.alice);
    rotate(out.rounds_b, plan.bob);
  }
  if (kind != PerturbKind::measurement_rotate) {
    Vec mixed = std::cos(theta) * s.psi.amps + std::sin(theta) * plan.chi;
    mixed.normalize();
    out.psi = StateVector::make(s.psi.layout, std::move(mixed));
  }
  return out;
}

}  // namespace

PureStrategy perturb(const PureStrategy& s, double target_eps, std::uint64_t seed,
                     PerturbKind kind) {
  if (target_eps < 0.0 || target_eps > 0.2)
    throw ContractError("perturb: target_eps must lie in [0, 0.2]");
  if (target_eps == 0.0) return s;
  if (!s.is_product() && kind != PerturbKind::state_mix)
    throw ContractError("perturb: measurement rotation requires product form");

  const RotationPlan plan = make_plan(s, seed, kind);
  const auto wp = [&](double theta) {
    return win_probability(apply_plan(s, plan, theta, kind));
  };
  const double target = 1.0 - target_eps;
  double lo = 0.0;
  double hi = M_PI / 2.0;
  if (wp(hi) > target)
    throw CalibrationError("perturbation kind cannot reach target epsilon");
  for (int iter = 0; iter < 60; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (wp(mid) > target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  PureStrategy out = apply_plan(s, plan, hi, kind);
  const double achieved = win_probability(out);
  if (std::abs(achieved - target) > 1e-4)
    throw CalibrationError("perturbation calibration missed target by " +
                           std::to_string(std::abs(achieved - target)));
  return out;
}

PureStrategy to_general(const PureStrategy& s) {
  if (!s.is_product()) return s;
  if (s.n > 2) throw FeasibilityError("to_general: general families supported for n <= 2");
  PureStrategy out = s;
  out.rounds_a.clear();
  out.rounds_b.clear();
  out.general_a.assign(s.num_questions(), {});
  out.general_b.assign(s.num_questions(), {});
  for (long q = 0; q < s.num_questions(); ++q) {
    out.general_a[q].resize(s.num_answers());
    out.general_b[q].resize(s.num_answers());
    for (long ans = 0; ans < s.num_answers(); ++ans) {
      out.general_a[q][ans] = s.projector(Side::alice, q, ans);
      out.general_b[q][ans] = s.projector(Side::bob, q, ans);
    }
  }
  return out;
}

const char* perturb_kind_name(PerturbKind k) {
  switch (k) {
    case PerturbKind::state_mix: return "state-mix";
    case PerturbKind::measurement_rotate: return "measurement-rotate";
    case PerturbKind::both: return "both";
  }
  return "?";
}

PerturbKind perturb_kind_from_name(const std::string& name) {
  if (name == "state-mix") return PerturbKind::state_mix;
  if (name == "measurement-rotate") return PerturbKind::measurement_rotate;
  if (name == "both") return PerturbKind::both;
  throw ContractError("unknown perturbation kind '" + name + "'");
}

// --- serialization ---

namespace {

constexpr char kB64Alphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

std::string b64_encode(const std::vector<unsigned char>& data) {
  std::string out;
  out.reserve((data.size() + 2) / 3 * 4);
  size_t i = 0;
  for (; i + 3 <= data.size(); i += 3) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8) | data[i + 2];
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += kB64Alphabet[v & 63];
  }
  const size_t rem = data.size() - i;
  if (rem == 1) {
    const unsigned v = data[i] << 16;
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += "==";
  } else if (rem == 2) {
    const unsigned v = (data[i] << 16) | (data[i + 1] << 8);
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<unsigned char> b64_decode(const std::string& text) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    if (c == '=') return -1;
    throw ContractError("invalid base64 character");
  };
  std::vector<unsigned char> out;
  unsigned buf = 0;
  int bits = 0;
  for (char c : text) {
    const int v = val(c);
    if (v < 0) break;
    buf = (buf << 6) | static_cast<unsigned>(v);
    bits += 6;
    if (bits >= 8) {
      bits -= 8;
      out.push_back(static_cast<unsigned char>((buf >> bits) & 0xff));
    }
  }
  return out;
}

void push_double_le(std::vector<unsigned char>& bytes, double d) {
  const auto u = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>((u >> (8 * i)) & 0xff));
}

double pop_double_le(const std::vector<unsigned char>& bytes, size_t pos) {
  std::uint64_t u = 0;
  for (int i = 7; i >= 0; --i) u = (u << 8) | bytes.at(pos + i);
  return std::bit_cast<double>(u);
}

std::string encode_complex_array(const cdouble* data, long count) {
  std::vector<unsigned char> bytes;
  bytes.reserve(static_cast<size_t>(count) * 16);
  for (long i = 0; i < count; ++i) {
    push_double_le(bytes, data[i].real());
    push_double_le(bytes, data[i].imag());
  }
  return b64_encode(bytes);
}

std::vector<cdouble> decode_complex_array(const std::string& text, long expected) {
  const auto bytes = b64_decode(text);
  if (bytes.size() != static_cast<size_t>(expected) * 16)
    throw ContractError("serialized array has wrong length");
  std::vector<cdouble> out(expected);
  for (long i = 0; i < expected; ++i) {
    out[i] = cdouble(pop_double_le(bytes, static_cast<size_t>(i) * 16),
                     pop_double_le(bytes, static_cast<size_t>(i) * 16 + 8));
  }
  return out;
}

std::string encode_mat(const Mat& m) { return encode_complex_array(m.data(), m.size()); }

Mat decode_mat(const std::string& text, long rows, long cols) {
  const auto vals = decode_complex_array(text, rows * cols);
  Mat m(rows, cols);
  std::copy(vals.begin(), vals.end(), m.data());
  return m;
}

}  // namespace

std::string save_strategy(const PureStrategy& s) {
  ordered_json j;
  j["schema"] = "msq.strategy/1";
  j["n"] = s.n;
  j["dims_a"] = s.dims_a;
  j["dims_b"] = s.dims_b;
  j["psi"] = encode_complex_array(s.psi.amps.data(), s.psi.amps.size());
  j["form"] = s.is_product() ? "product" : "general";
  if (s.is_product()) {
    auto dump_rounds = [](const std::vector<RoundFamily>& rounds) {
      ordered_json arr = ordered_json::array();
      for (const auto& fam : rounds) {
        ordered_json f;
        f["dim"] = fam.dim;
        ordered_json families = ordered_json::array();
        for (int q = 0; q < 3; ++q) {
          ordered_json projs = ordered_json::array();
          for (int a = 0; a < 4; ++a) projs.push_back(encode_mat(fam.proj[q][a]));
          families.push_back(projs);
        }
        f["proj"] = families;
        arr.push_back(f);
      }
      return arr;
    };
    j["rounds_a"] = dump_rounds(s.rounds_a);
    j["rounds_b"] = dump_rounds(s.rounds_b);
  } else {
    auto dump_general = [](const std::vector<std::vector<Mat>>& fams) {
      ordered_json arr = ordered_json::array();
      for (const auto& fam : fams) {
        ordered_json projs = ordered_json::array();
        for (const Mat& p : fam) projs.push_back(encode_mat(p));
        arr.push_back(projs);
      }
      return arr;
    };
    j["general_a"] = dump_general(s.general_a);
    j["general_b"] = dump_general(s.general_b);
  }
  return j.dump(2);
}

PureStrategy load_strategy(const std::string& text) {
  const auto j = ordered_json::parse(text);
  if (j.at("schema").get<std::string>() != "msq.strategy/1")
    throw ContractError("unsupported strategy schema");
  PureStrategy s;
  s.n = j.at("n").get<int>();
  s.dims_a = j.at("dims_a").get<std::vector<long>>();
  s.dims_b = j.at("dims_b").get<std::vector<long>>();
  const long total = s.dim_a() * s.dim_b();
  const auto amps = decode_complex_array(j.at("psi").get<std::string>(), total);
  Vec v(total);
  std::copy(amps.begin(), amps.end(), v.data());
  s.psi = StateVector::make(strategy_layout(s.dims_a, s.dims_b), std::move(v));
  const auto form = j.at("form").get<std::string>();
  if (form == "product") {
    auto load_rounds = [&](const ordered_json& arr, const std::vector<long>& dims) {
      std::vector<RoundFamily> rounds;
      for (size_t k = 0; k < arr.size(); ++k) {
        RoundFamily fam;
        fam.dim = arr[k].at("dim").get<long>();
        if (fam.dim != dims[k]) throw ContractError("round family dim mismatch");
        for (int q = 0; q < 3; ++q)
          for (int a = 0; a < 4; ++a)
            fam.proj[q][a] = decode_mat(arr[k].at("proj")[q][a].get<std::string>(), fam.dim, fam.dim);
        rounds.push_back(std::move(fam));
      }
      return rounds;
    };
    s.rounds_a = load_rounds(j.at("rounds_a"), s.dims_a);
    s.rounds_b = load_rounds(j.at("rounds_b"), s.dims_b);
  } else if (form == "general") {
    auto load_general = [&](const ordered_json& arr, long dim) {
      std::vector<std::vector<Mat>> fams;
      for (const auto& fam : arr) {
        std::vector<Mat> projs;
        for (const auto& p : fam) projs.push_back(decode_mat(p.get<std::string>(), dim, dim));
        fams.push_back(std::move(projs));
      }
      return fams;
    };
    s.general_a = load_general(j.at("general_a"), s.dim_a());
    s.general_b = load_general(j.at("general_b"), s.dim_b());
  } else {
    throw ContractError("unknown strategy form '" + form + "'");
  }
  return s;
}

}  // namespace msq
