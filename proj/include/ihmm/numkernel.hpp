#pragma once

// Dense SPD primitives: Cholesky, log-determinants, quadratic forms,
// rank-one updates and the multivariate log-gamma. Storage is Eigen's
// default column-major layout; dimensions are small (p in the tens).

#include <Eigen/Dense>

#include "ihmm/errors.hpp"

namespace ihmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Symmetric positive-definite matrix. Construction symmetrizes the input;
/// positive definiteness is only confirmed by a successful cholesky().
class SpdMatrix {
 public:
  SpdMatrix() = default;
  /// Symmetrizes (m + m^T)/2. Emits a warning on stderr when the relative
  /// asymmetry exceeds 1e-8.
  explicit SpdMatrix(const Matrix& m);

  static SpdMatrix identity(int p);

  int dim() const { return static_cast<int>(m_.rows()); }
  const Matrix& matrix() const { return m_; }
  double operator()(int i, int j) const { return m_(i, j); }

 private:
  Matrix m_;
};

class CholFactor {
 public:
  CholFactor() = default;
  /// Takes ownership of a lower-triangular factor; no validation beyond shape.
  explicit CholFactor(Matrix lower);

  int dim() const { return static_cast<int>(lower_.rows()); }
  const Matrix& lower() const { return lower_; }
  Matrix reconstruct() const;

 private:
  Matrix lower_;
};

CholFactor cholesky(const SpdMatrix& m);
/// Same, for a matrix already known to be symmetric (skips the copy/check).
CholFactor cholesky_symmetric(const Matrix& m);

double logdet(const CholFactor& f);

/// x^T (L L^T)^{-1} x.
double quadform(const CholFactor& f, const Eigen::Ref<const Vector>& x);

/// Solves L y = x.
Vector forward_solve(const CholFactor& f, const Eigen::Ref<const Vector>& x);

/// Factor of L L^T + sign * x x^T. sign must be +1 or -1.
CholFactor chol_rank1_update(const CholFactor& f, const Eigen::Ref<const Vector>& x, int sign);

/// In-place variant used on hot paths. Leaves `lower` unspecified when it throws.
void chol_rank1_update_inplace(Matrix& lower, Vector x, int sign);

/// ln Gamma_p(a) = p(p-1)/4 ln pi + sum_{j=1..p} ln Gamma(a + (1-j)/2).
double log_multigamma(int p, double a);

/// (L L^T)^{-1} as a dense matrix.
Matrix chol_inverse(const CholFactor& f);

}  // namespace ihmm
