#pragma once

#include <vector>

#include "reprocs/support.hpp"
#include "reprocs/types.hpp"

namespace reprocs {

// Matrix with orthonormal columns (Q'Q = I). A basis with zero columns is
// valid and denotes the trivial subspace of R^n.
class BasisMatrix {
 public:
  static constexpr double kOrthonormalityTol = 1e-10;

  BasisMatrix() = default;
  // Empty basis of R^n.
  explicit BasisMatrix(Index n) : data_(n, 0) {}
  // Throws std::invalid_argument unless ||Q'Q - I||_max <= kOrthonormalityTol.
  explicit BasisMatrix(Matrix q);

  // Skips the orthonormality check; for results of orthogonal factorizations.
  static BasisMatrix from_orthonormal(Matrix q);

  Index ambient_dim() const { return data_.rows(); }
  Index rank() const { return data_.cols(); }
  bool empty() const { return data_.cols() == 0; }
  const Matrix& matrix() const { return data_; }

  // First r columns.
  BasisMatrix leading(Index r) const;
  // [this other]; re-orthonormalized if the columns drifted apart.
  BasisMatrix append(const BasisMatrix& other) const;

  // ||Q'Q - I||_max
  double orthonormality_drift() const;

 private:
  Matrix data_;
};

// Nonincreasing, nonnegative singular values.
class SingularSpectrum {
 public:
  SingularSpectrum() = default;
  explicit SingularSpectrum(Vector values);

  const Vector& values() const { return values_; }
  Index size() const { return values_.size(); }
  bool empty() const { return values_.size() == 0; }
  double operator[](Index i) const { return values_[i]; }
  SingularSpectrum leading(Index r) const { return SingularSpectrum(Vector(values_.head(r))); }

 private:
  Vector values_;
};

struct SvdBasis {
  BasisMatrix basis;
  SingularSpectrum spectrum;
};

// Full thin left SVD of m (all min(n, T) left singular vectors), with each
// singular vector's largest-magnitude entry made nonnegative.
SvdBasis left_svd(const Matrix& m);
// Singular values only.
Vector singular_values(const Matrix& m);

// Smallest leading set of left singular vectors whose squared singular values
// reach b_percent of the total energy. Throws std::invalid_argument on empty
// input or b outside (0, 100].
SvdBasis approx_basis_energy(const Matrix& m, double b_percent);

// The r leading left singular vectors; 1 <= r <= min(n, T).
BasisMatrix approx_basis_rank(const Matrix& m, Index r);

// Left singular vectors/values of [P diag(sigma)  D], computed from the
// previous factorization plus the new columns D.
SvdBasis inc_svd(const BasisMatrix& p, const SingularSpectrum& sigma, const Matrix& d);

// Modified Gram-Schmidt with one reorthogonalization pass. Columns whose
// residual falls below drop_tol times their original norm are discarded.
Matrix modified_gram_schmidt(const Matrix& m, double drop_tol = 0.0);

// I - QQ', applied without forming the n x n matrix.
class PerpProjector {
 public:
  PerpProjector() = default;
  explicit PerpProjector(BasisMatrix basis) : basis_(std::move(basis)) {}

  const BasisMatrix& basis() const { return basis_; }
  Index dim() const { return basis_.ambient_dim(); }

  Vector apply(const Vector& v) const;
  Matrix apply(const Matrix& m) const;

 private:
  BasisMatrix basis_;
};

Vector perp_project(const PerpProjector& phi, const Vector& v);

// ||I_T' Q||_2 for one support T: spectral norm of the rows of Q indexed by T.
double denseness_proxy(const BasisMatrix& q, const SupportSet& t);

// Exact restricted isometry constant delta_s of (I - PP'), by enumerating
// every support of size <= s. Exponential; refuses n > 12.
double ric_of_projected_identity(const BasisMatrix& p, int s);

// Exact delta_s of an arbitrary matrix by enumeration (n <= 12).
double restricted_isometry_constant(const Matrix& a, int s);

// SE(P, P_hat) = ||(I - P_hat P_hat') P||_2.
double subspace_error(const BasisMatrix& p, const BasisMatrix& p_hat);

}  // namespace reprocs
