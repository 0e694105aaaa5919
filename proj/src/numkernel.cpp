#include "ihmm/numkernel.hpp"

#include <cmath>
#include <iostream>
#include <numbers>

namespace ihmm {

SpdMatrix::SpdMatrix(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() < 1) {
    throw DimensionMismatch("SpdMatrix requires a non-empty square matrix");
  }
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff() / scale;
  if (asym > 1e-8) {
    std::cerr << "warning: symmetrizing matrix with relative asymmetry " << asym << "\n";
  }
  m_ = 0.5 * (m + m.transpose());
}

SpdMatrix SpdMatrix::identity(int p) { return SpdMatrix(Matrix::Identity(p, p)); }

CholFactor::CholFactor(Matrix lower) : lower_(std::move(lower)) {
  if (lower_.rows() != lower_.cols()) {
    throw DimensionMismatch("Cholesky factor must be square");
  }
}

Matrix CholFactor::reconstruct() const { return lower_ * lower_.transpose(); }

CholFactor cholesky_symmetric(const Matrix& m) {
  const Eigen::Index p = m.rows();
  Matrix l = Matrix::Zero(p, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    double d = m(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) {
      throw NotPositiveDefinite("matrix is not positive definite (pivot " + std::to_string(j) +
                                " = " + std::to_string(d) + ")");
    }
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < p; ++i) {
      double s = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return CholFactor(std::move(l));
}

CholFactor cholesky(const SpdMatrix& m) { return cholesky_symmetric(m.matrix()); }

double logdet(const CholFactor& f) {
  return 2.0 * f.lower().diagonal().array().log().sum();
}

Vector forward_solve(const CholFactor& f, const Eigen::Ref<const Vector>& x) {
  if (x.size() != f.dim()) {
    throw DimensionMismatch("vector length " + std::to_string(x.size()) + " != factor dimension " +
                            std::to_string(f.dim()));
  }
  return f.lower().triangularView<Eigen::Lower>().solve(x);
}

double quadform(const CholFactor& f, const Eigen::Ref<const Vector>& x) {
  return forward_solve(f, x).squaredNorm();
}

void chol_rank1_update_inplace(Matrix& lower, Vector x, int sign) {
  const Eigen::Index p = lower.rows();
  if (x.size() != p) throw DimensionMismatch("rank-one update vector has wrong length");
  const double sgn = sign >= 0 ? 1.0 : -1.0;
  for (Eigen::Index k = 0; k < p; ++k) {
    const double lkk = lower(k, k);
    const double r2 = lkk * lkk + sgn * x(k) * x(k);
    if (!(r2 > 0.0)) throw DowndateBreaksPositivity();
    const double r = std::sqrt(r2);
    const double c = r / lkk;
    const double s = x(k) / lkk;
    lower(k, k) = r;
    if (k + 1 < p) {
      auto col = lower.col(k).tail(p - k - 1);
      auto rest = x.tail(p - k - 1);
      col = (col + sgn * s * rest) / c;
      rest = c * rest - s * col;
    }
  }
}

CholFactor chol_rank1_update(const CholFactor& f, const Eigen::Ref<const Vector>& x, int sign) {
  if (sign != 1 && sign != -1) throw DomainError("rank-one update sign must be +1 or -1");
  Matrix l = f.lower();
  chol_rank1_update_inplace(l, x, sign);
  return CholFactor(std::move(l));
}

double log_multigamma(int p, double a) {
  if (p < 1) throw DomainError("log_multigamma requires p >= 1");
  if (!(a > 0.5 * (p - 1))) {
    throw DomainError("log_multigamma requires a > (p-1)/2, got a = " + std::to_string(a));
  }
  double s = 0.25 * p * (p - 1) * std::log(std::numbers::pi);
  for (int j = 1; j <= p; ++j) s += std::lgamma(a + 0.5 * (1 - j));
  return s;
}

Matrix chol_inverse(const CholFactor& f) {
  const int p = f.dim();
  Matrix linv = f.lower().triangularView<Eigen::Lower>().solve(Matrix::Identity(p, p));
  return linv.transpose() * linv;
}

}  // namespace ihmm
