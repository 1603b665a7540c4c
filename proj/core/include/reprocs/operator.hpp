#pragma once

#include <memory>

#include "reprocs/linalg.hpp"
#include "reprocs/types.hpp"

namespace reprocs {

// Linear map R^cols -> R^rows with its adjoint.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;

  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual Vector apply(const Vector& x) const = 0;
  virtual Vector adjoint(const Vector& y) const = 0;

  // Column i, i.e. apply(e_i).
  virtual Vector column(Index i) const;
  // Dense rows() x cols() representation.
  virtual Matrix to_dense() const;
};

using OperatorPtr = std::shared_ptr<const LinearOperator>;

class DenseOperator final : public LinearOperator {
 public:
  explicit DenseOperator(Matrix a) : a_(std::move(a)) {}

  Index rows() const override { return a_.rows(); }
  Index cols() const override { return a_.cols(); }
  Vector apply(const Vector& x) const override;
  Vector adjoint(const Vector& y) const override;
  Vector column(Index i) const override { return a_.col(i); }
  Matrix to_dense() const override { return a_; }

  const Matrix& matrix() const { return a_; }

 private:
  Matrix a_;
};

class IdentityOperator final : public LinearOperator {
 public:
  explicit IdentityOperator(Index n) : n_(n) {}

  Index rows() const override { return n_; }
  Index cols() const override { return n_; }
  Vector apply(const Vector& x) const override;
  Vector adjoint(const Vector& y) const override { return apply(y); }

 private:
  Index n_;
};

// I - QQ' (self-adjoint).
class ProjectorOperator final : public LinearOperator {
 public:
  explicit ProjectorOperator(PerpProjector phi) : phi_(std::move(phi)), n_(phi_.dim()) {}
  ProjectorOperator(PerpProjector phi, Index n) : phi_(std::move(phi)), n_(n) {}

  Index rows() const override { return n_; }
  Index cols() const override { return n_; }
  Vector apply(const Vector& x) const override;
  Vector adjoint(const Vector& y) const override { return apply(y); }

 private:
  PerpProjector phi_;
  Index n_;
};

// outer * inner
class ComposedOperator final : public LinearOperator {
 public:
  ComposedOperator(OperatorPtr outer, OperatorPtr inner);

  Index rows() const override { return outer_->rows(); }
  Index cols() const override { return inner_->cols(); }
  Vector apply(const Vector& x) const override { return outer_->apply(inner_->apply(x)); }
  Vector adjoint(const Vector& y) const override { return inner_->adjoint(outer_->adjoint(y)); }
  Vector column(Index i) const override { return outer_->apply(inner_->column(i)); }

 private:
  OperatorPtr outer_;
  OperatorPtr inner_;
};

}  // namespace reprocs
