#include "reprocs/operator.hpp"

#include <stdexcept>

namespace reprocs {

Vector LinearOperator::column(Index i) const {
  Vector e = Vector::Zero(cols());
  e[i] = 1.0;
  return apply(e);
}

Matrix LinearOperator::to_dense() const {
  Matrix a(rows(), cols());
  for (Index i = 0; i < cols(); ++i) a.col(i) = column(i);
  return a;
}

Vector DenseOperator::apply(const Vector& x) const {
  if (x.size() != a_.cols()) throw std::invalid_argument("operator: dimension mismatch");
  return a_ * x;
}

Vector DenseOperator::adjoint(const Vector& y) const {
  if (y.size() != a_.rows()) throw std::invalid_argument("operator: dimension mismatch");
  return a_.transpose() * y;
}

Vector IdentityOperator::apply(const Vector& x) const {
  if (x.size() != n_) throw std::invalid_argument("operator: dimension mismatch");
  return x;
}

Vector ProjectorOperator::apply(const Vector& x) const {
  if (x.size() != n_) throw std::invalid_argument("operator: dimension mismatch");
  return phi_.apply(x);
}

ComposedOperator::ComposedOperator(OperatorPtr outer, OperatorPtr inner)
    : outer_(std::move(outer)), inner_(std::move(inner)) {
  if (outer_->cols() != inner_->rows()) throw std::invalid_argument("operator composition: dimension mismatch");
}

}  // namespace reprocs
