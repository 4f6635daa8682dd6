#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "msq/tensor_core.hpp"

namespace msq {

/// Seeded random source.  Gaussians use an explicit Box-Muller transform on
/// the raw 64-bit stream so that draws are reproducible independent of the
/// standard library's distribution implementations.
class RandomGen {
 public:
  explicit RandomGen(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return eng_() % n; }

  double gauss() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  cdouble cgauss() { return cdouble(gauss(), gauss()); }

  Vec unit_vector(long dim) {
    Vec v(dim);
    for (long i = 0; i < dim; ++i) v[i] = cgauss();
    v.normalize();
    return v;
  }

  Mat complex_matrix(long rows, long cols) {
    Mat m(rows, cols);
    for (long j = 0; j < cols; ++j)
      for (long i = 0; i < rows; ++i) m(i, j) = cgauss();
    return m;
  }

  /// GUE-style Hermitian matrix, spectral norm scaled to 1.
  Mat hermitian(long dim) {
    Mat g = complex_matrix(dim, dim);
    Mat h = 0.5 * (g + g.adjoint());
    const double nrm = operator_norm(h);
    if (nrm > 0) h /= nrm;
    return h;
  }

  /// Hermitian unitary: eigenvalues of a random Hermitian snapped to +-1.
  Mat hermitian_unitary(long dim) {
    const Mat h = hermitian(dim);
    Eigen::SelfAdjointEigenSolver<Mat> es(h);
    Mat d = Mat::Zero(dim, dim);
    for (long i = 0; i < dim; ++i) d(i, i) = es.eigenvalues()[i] >= 0 ? 1.0 : -1.0;
    return es.eigenvectors() * d * es.eigenvectors().adjoint();
  }

 private:
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace msq
