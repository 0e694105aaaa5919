#pragma once

#include <cmath>
#include <vector>

#include "ihmm/inference.hpp"
#include "ihmm/numkernel.hpp"
#include "ihmm/random.hpp"

namespace ihmm::testing {

inline Matrix random_matrix(int r, int c, Rng& rng) {
  Matrix m(r, c);
  for (int j = 0; j < c; ++j)
    for (int i = 0; i < r; ++i) m(i, j) = standard_normal(rng);
  return m;
}

inline Vector random_vector(int n, Rng& rng) { return random_matrix(n, 1, rng).col(0); }

/// A A^T + p I.
inline SpdMatrix random_spd(int p, Rng& rng) {
  const Matrix a = random_matrix(p, p, rng);
  return SpdMatrix(a * a.transpose() + p * Matrix::Identity(p, p));
}

inline double rel_frobenius(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

/// Random orthogonal matrix (QR of a Gaussian matrix).
inline Matrix random_rotation(int p, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(random_matrix(p, p, rng));
  return qr.householderQ() * Matrix::Identity(p, p);
}

/// Every label sequence over {0..k-1} of length n, in lexicographic order.
inline std::vector<std::vector<int>> all_sequences(int n, int k) {
  std::vector<std::vector<int>> out;
  std::vector<int> z(n, 0);
  while (true) {
    out.push_back(z);
    int i = n - 1;
    while (i >= 0 && z[i] == k - 1) z[i--] = 0;
    if (i < 0) break;
    ++z[i];
  }
  return out;
}

inline int sequence_index(const std::vector<int>& z, int k) {
  int idx = 0;
  for (int v : z) idx = idx * k + v;
  return idx;
}

}  // namespace ihmm::testing
