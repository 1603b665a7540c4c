#include "reprocs/linalg.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/SVD>

namespace reprocs {
namespace {

constexpr double kReorthTrigger = 1e-8;

double max_abs_drift(const Matrix& q) {
  if (q.cols() == 0) return 0.0;
  const Matrix g = q.transpose() * q - Matrix::Identity(q.cols(), q.cols());
  return g.cwiseAbs().maxCoeff();
}

// Largest-magnitude entry of every column made nonnegative (first index wins ties).
void fix_signs(Matrix& u) {
  for (Index j = 0; j < u.cols(); ++j) {
    Index arg = 0;
    double best = -1.0;
    for (Index i = 0; i < u.rows(); ++i) {
      const double a = std::abs(u(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    if (u.rows() > 0 && u(arg, j) < 0.0) u.col(j) = -u.col(j);
  }
}

// MGS with an absolute drop threshold on residual norms.
Matrix mgs_absolute(const Matrix& m, double abs_drop) {
  Matrix q(m.rows(), m.cols());
  Index kept = 0;
  for (Index j = 0; j < m.cols(); ++j) {
    Vector v = m.col(j);
    // Two passes keep the result orthogonal to working precision.
    for (int pass = 0; pass < 2; ++pass) {
      for (Index k = 0; k < kept; ++k) v -= q.col(k).dot(v) * q.col(k);
    }
    const double nv = v.norm();
    if (nv <= abs_drop || nv == 0.0) continue;
    q.col(kept++) = v / nv;
  }
  return q.leftCols(kept);
}

double largest_singular_value(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

BasisMatrix::BasisMatrix(Matrix q) : data_(std::move(q)) {
  const double drift = max_abs_drift(data_);
  if (!(drift <= kOrthonormalityTol)) {
    throw std::invalid_argument("basis matrix columns are not orthonormal (drift " +
                                std::to_string(drift) + ")");
  }
  if (data_.cols() > data_.rows()) throw std::invalid_argument("basis rank exceeds dimension");
}

BasisMatrix BasisMatrix::from_orthonormal(Matrix q) {
  BasisMatrix b;
  b.data_ = std::move(q);
  return b;
}

BasisMatrix BasisMatrix::leading(Index r) const {
  if (r < 0 || r > rank()) throw std::invalid_argument("leading: rank out of range");
  return from_orthonormal(data_.leftCols(r));
}

BasisMatrix BasisMatrix::append(const BasisMatrix& other) const {
  if (other.empty()) return *this;
  if (empty()) return other;
  if (other.ambient_dim() != ambient_dim()) throw std::invalid_argument("append: dimension mismatch");
  Matrix q(ambient_dim(), rank() + other.rank());
  q << data_, other.data_;
  if (max_abs_drift(q) > 1e-12) q = mgs_absolute(q, 0.0);
  return from_orthonormal(std::move(q));
}

double BasisMatrix::orthonormality_drift() const { return max_abs_drift(data_); }

SingularSpectrum::SingularSpectrum(Vector values) : values_(std::move(values)) {
  for (Index i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0)) throw std::invalid_argument("singular values must be nonnegative");
    if (i > 0 && values_[i] > values_[i - 1]) {
      throw std::invalid_argument("singular values must be nonincreasing");
    }
  }
}

SvdBasis left_svd(const Matrix& m) {
  const Index k = std::min(m.rows(), m.cols());
  if (k == 0) return {BasisMatrix(m.rows()), SingularSpectrum()};
  Eigen::BDCSVD<Matrix> svd(m, Eigen::ComputeThinU);
  Matrix u = svd.matrixU().leftCols(k);
  fix_signs(u);
  return {BasisMatrix::from_orthonormal(std::move(u)), SingularSpectrum(svd.singularValues().head(k))};
}

Vector singular_values(const Matrix& m) {
  if (m.size() == 0) return Vector();
  Eigen::BDCSVD<Matrix> svd(m);
  return svd.singularValues();
}

SvdBasis approx_basis_energy(const Matrix& m, double b_percent) {
  if (m.size() == 0) throw std::invalid_argument("empty input");
  if (!(b_percent > 0.0 && b_percent <= 100.0)) {
    throw std::invalid_argument("energy percent must lie in (0, 100]");
  }
  SvdBasis full = left_svd(m);
  const Vector& s = full.spectrum.values();
  const double total = s.squaredNorm();
  // Relative slack absorbs the rounding in the running sum, so b = 100 stops
  // at the numerical rank instead of picking up roundoff-level directions.
  const double target = b_percent / 100.0 * total * (1.0 - 1e-12);
  Index r = 0;
  double cum = 0.0;
  if (total > 0.0) {
    while (r < s.size()) {
      cum += s[r] * s[r];
      ++r;
      if (cum >= target) break;
    }
  }
  return {full.basis.leading(r), full.spectrum.leading(r)};
}

BasisMatrix approx_basis_rank(const Matrix& m, Index r) {
  if (r < 1 || r > std::min(m.rows(), m.cols())) {
    throw std::invalid_argument("approx_basis_rank: r out of range");
  }
  return left_svd(m).basis.leading(r);
}

SvdBasis inc_svd(const BasisMatrix& p, const SingularSpectrum& sigma, const Matrix& d) {
  const Index n = d.rows();
  const Index r = p.rank();
  if (d.cols() < 1) throw std::invalid_argument("inc_svd: no new columns");
  if (r > 0 && p.ambient_dim() != n) throw std::invalid_argument("inc_svd: dimension mismatch");
  if (sigma.size() != r) throw std::invalid_argument("inc_svd: spectrum length differs from rank");

  Matrix d_par(r, d.cols());
  Matrix d_perp = d;
  if (r > 0) {
    d_par = p.matrix().transpose() * d;
    d_perp -= p.matrix() * d_par;
    // second pass against P in case P has drifted
    const Matrix corr = p.matrix().transpose() * d_perp;
    d_perp -= p.matrix() * corr;
    d_par += corr;
  }
  const Matrix j = mgs_absolute(d_perp, 1e-10 * d.norm());
  const Index q = j.cols();
  const Matrix k = j.transpose() * d_perp;

  Matrix mid = Matrix::Zero(r + q, r + d.cols());
  mid.topLeftCorner(r, r) = sigma.values().asDiagonal();
  mid.topRightCorner(r, d.cols()) = d_par;
  mid.bottomRightCorner(q, d.cols()) = k;

  Eigen::BDCSVD<Matrix> svd(mid, Eigen::ComputeThinU);
  const Index keep = r + q;
  Matrix basis(n, r + q);
  if (r > 0) basis.leftCols(r) = p.matrix();
  if (q > 0) basis.rightCols(q) = j;
  Matrix u = basis * svd.matrixU().leftCols(keep);
  if (max_abs_drift(u) > kReorthTrigger) u = mgs_absolute(u, 0.0);
  fix_signs(u);
  Vector s = svd.singularValues().head(u.cols());
  return {BasisMatrix::from_orthonormal(std::move(u)), SingularSpectrum(std::move(s))};
}

Matrix modified_gram_schmidt(const Matrix& m, double drop_tol) {
  Matrix q(m.rows(), m.cols());
  Index kept = 0;
  for (Index j = 0; j < m.cols(); ++j) {
    Vector v = m.col(j);
    const double n0 = v.norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (Index k = 0; k < kept; ++k) v -= q.col(k).dot(v) * q.col(k);
    }
    const double nv = v.norm();
    if (nv == 0.0 || nv <= drop_tol * n0) continue;
    q.col(kept++) = v / nv;
  }
  return q.leftCols(kept);
}

Vector PerpProjector::apply(const Vector& v) const {
  if (basis_.empty()) return v;
  if (v.size() != basis_.ambient_dim()) throw std::invalid_argument("perp_project: dimension mismatch");
  const Matrix& q = basis_.matrix();
  return v - q * (q.transpose() * v);
}

Matrix PerpProjector::apply(const Matrix& m) const {
  if (basis_.empty()) return m;
  if (m.rows() != basis_.ambient_dim()) throw std::invalid_argument("perp_project: dimension mismatch");
  const Matrix& q = basis_.matrix();
  return m - q * (q.transpose() * m);
}

Vector perp_project(const PerpProjector& phi, const Vector& v) { return phi.apply(v); }

double denseness_proxy(const BasisMatrix& q, const SupportSet& t) {
  if (t.empty() || q.empty()) return 0.0;
  if (t.bound() > q.ambient_dim()) throw std::invalid_argument("denseness_proxy: index out of range");
  Matrix rows(static_cast<Index>(t.size()), q.rank());
  Index i = 0;
  for (Index idx : t) rows.row(i++) = q.matrix().row(idx);
  return largest_singular_value(rows);
}

double restricted_isometry_constant(const Matrix& a, int s) {
  const Index n = a.cols();
  if (n > 12) throw std::invalid_argument("exponential cost guard");
  if (s <= 0 || n == 0) return 0.0;
  double delta = 0.0;
  const unsigned limit = 1u << n;
  for (unsigned mask = 1; mask < limit; ++mask) {
    const int size = std::popcount(mask);
    if (size > s) continue;
    Matrix cols(a.rows(), size);
    Index c = 0;
    for (Index i = 0; i < n; ++i) {
      if (mask & (1u << i)) cols.col(c++) = a.col(i);
    }
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cols.transpose() * cols, Eigen::EigenvaluesOnly);
    const Vector& ev = eig.eigenvalues();
    delta = std::max({delta, 1.0 - ev.minCoeff(), ev.maxCoeff() - 1.0});
  }
  return delta;
}

double ric_of_projected_identity(const BasisMatrix& p, int s) {
  const Index n = p.ambient_dim();
  if (n > 12) throw std::invalid_argument("exponential cost guard");
  Matrix a = Matrix::Identity(n, n);
  if (!p.empty()) a -= p.matrix() * p.matrix().transpose();
  return restricted_isometry_constant(a, s);
}

double subspace_error(const BasisMatrix& p, const BasisMatrix& p_hat) {
  if (p.empty()) return 0.0;
  if (p_hat.empty()) return largest_singular_value(p.matrix());
  if (p.ambient_dim() != p_hat.ambient_dim()) throw std::invalid_argument("subspace_error: dimension mismatch");
  const Matrix& ph = p_hat.matrix();
  const Matrix resid = p.matrix() - ph * (ph.transpose() * p.matrix());
  return largest_singular_value(resid);
}

}  // namespace reprocs
