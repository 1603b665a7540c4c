#include "reprocs/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "reprocs/error.hpp"

namespace reprocs {
namespace {

// Operators up to this many entries are materialized so the x-update is a
// pair of triangular solves; larger ones fall back to conjugate gradients.
constexpr Index kDenseLimit = 4'000'000;
constexpr double kConditionLimit = 1e-8;

Vector weights_for(const L1Problem& prob, Index n) {
  Vector w = Vector::Ones(n);
  if (prob.lambda < 1.0) {
    for (Index i : prob.weight_set) {
      if (i >= n) throw std::invalid_argument("weight set index out of range");
      w[i] = prob.lambda;
    }
  }
  return w;
}

double soft(double v, double t) {
  if (v > t) return v - t;
  if (v < -t) return v + t;
  return 0.0;
}

// Applies A, A', and (I + A'A)^{-1}, dense or matrix-free.
class NormalSystem {
 public:
  explicit NormalSystem(const LinearOperator& op) : op_(op) {
    if (op.rows() * op.cols() <= kDenseLimit) {
      dense_ = op.to_dense();
      Matrix normal = dense_.transpose() * dense_;
      normal.diagonal().array() += 1.0;
      llt_.compute(normal);
      use_dense_ = true;
    }
  }

  Vector apply(const Vector& x) const { return use_dense_ ? Vector(dense_ * x) : op_.apply(x); }
  Vector adjoint(const Vector& y) const {
    return use_dense_ ? Vector(dense_.transpose() * y) : op_.adjoint(y);
  }
  Vector column(Index i) const { return use_dense_ ? Vector(dense_.col(i)) : op_.column(i); }

  Vector solve(const Vector& rhs, const Vector& guess) const {
    if (use_dense_) return llt_.solve(rhs);
    // CG on the SPD system (I + A'A) x = rhs.
    Vector x = guess;
    Vector r = rhs - (x + adjoint(apply(x)));
    Vector p = r;
    double rr = r.squaredNorm();
    const double stop = 1e-24 * std::max(rhs.squaredNorm(), 1e-300);
    for (int it = 0; it < 500 && rr > stop; ++it) {
      const Vector ap = p + adjoint(apply(p));
      const double step = rr / p.dot(ap);
      x += step * p;
      r -= step * ap;
      const double rr_next = r.squaredNorm();
      p = r + (rr_next / rr) * p;
      rr = rr_next;
    }
    return x;
  }

 private:
  const LinearOperator& op_;
  bool use_dense_ = false;
  Matrix dense_;
  Eigen::LLT<Matrix> llt_;
};

struct Candidate {
  Vector x;
  double objective = 0.0;
  double residual = 0.0;
  bool certified = false;
};

// Exact minimizer of c'x over {x supported on T : ||y - A_T x|| <= xi}, where
// c carries the weights and the sign pattern of `pattern` on T. Certifies
// global optimality when the sign pattern is reproduced and the dual
// variable satisfies the off-support bound.
std::optional<Candidate> polish(const NormalSystem& sys, Index n, const Vector& y, double xi,
                                double feas_limit, const Vector& w, const Vector& pattern) {
  std::vector<Index> t;
  for (Index i = 0; i < n; ++i) {
    if (pattern[i] != 0.0) t.push_back(i);
  }
  const Index k = static_cast<Index>(t.size());
  if (k == 0 || k > y.size()) return std::nullopt;
  Matrix at(y.size(), k);
  for (Index j = 0; j < k; ++j) at.col(j) = sys.column(t[j]);

  Eigen::BDCSVD<Matrix> svd(at, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  if (sv(k - 1) <= kConditionLimit * sv(0)) return std::nullopt;

  const Vector x_ls = svd.solve(y);
  const Vector r0 = y - at * x_ls;
  double slack2 = xi * xi - r0.squaredNorm();
  if (slack2 < 0.0) {
    if (r0.norm() > feas_limit) return std::nullopt;
    slack2 = 0.0;
  }

  Vector c(k);
  for (Index j = 0; j < k; ++j) c[j] = w[t[j]] * (pattern[t[j]] > 0.0 ? 1.0 : -1.0);
  // G^{-1} c with G = A_T'A_T = V S^2 V'
  const Matrix& v = svd.matrixV();
  const Vector ginv_c = v * (sv.array().square().inverse().matrix().asDiagonal() * (v.transpose() * c));
  const double quad = c.dot(ginv_c);
  Vector xt = x_ls;
  const double radius = std::sqrt(slack2);
  if (quad > 0.0) xt -= (radius / std::sqrt(quad)) * ginv_c;

  Candidate cand;
  cand.x = Vector::Zero(n);
  for (Index j = 0; j < k; ++j) cand.x[t[j]] = xt[j];
  cand.residual = (y - at * xt).norm();
  cand.objective = (w.array() * cand.x.array().abs()).sum();

  bool signs_match = true;
  for (Index j = 0; j < k; ++j) {
    if (xt[j] * pattern[t[j]] <= 0.0) signs_match = false;
  }
  if (signs_match && xi > 0.0 && radius > 0.0) {
    if (quad == 0.0) {
      cand.certified = true;
    } else {
      const double nu = std::sqrt(quad) / radius;
      const Vector grad = sys.adjoint(y - at * xt);
      bool dual_ok = true;
      for (Index i = 0; i < n && dual_ok; ++i) {
        if (pattern[i] != 0.0) continue;
        if (nu * std::abs(grad[i]) > w[i] * (1.0 + 1e-9) + 1e-12) dual_ok = false;
      }
      cand.certified = dual_ok;
    }
  }
  return cand;
}

}  // namespace

double weighted_l1_norm(const L1Problem& prob, const Vector& x) {
  const Vector w = weights_for(prob, x.size());
  return (w.array() * x.array().abs()).sum();
}

L1Result solve_weighted_l1(const L1Problem& prob, const SolverConfig& cfg,
                           const std::optional<Vector>& warm_start) {
  if (prob.phi == nullptr) throw std::invalid_argument("L1Problem without operator");
  const LinearOperator& op = *prob.phi;
  const Index n = op.cols();
  const Index m = op.rows();
  if (prob.y.size() != m) throw std::invalid_argument("solve_weighted_l1: dimension mismatch");
  if (!(prob.xi >= 0.0)) throw std::invalid_argument("solve_weighted_l1: xi must be nonnegative");
  if (!(prob.lambda >= 0.0 && prob.lambda <= 1.0)) throw std::invalid_argument("lambda must lie in [0, 1]");

  const Vector w = weights_for(prob, n);
  const double scale = prob.y.norm();
  L1Result out;
  out.x = Vector::Zero(n);
  if (prob.xi >= scale) {
    out.converged = true;
    out.residual = scale;
    return out;
  }

  // Work in units where ||y|| = 1.
  const Vector y = prob.y / scale;
  const double xi = prob.xi / scale;
  const NormalSystem sys(op);

  auto ball = [&](const Vector& v) -> Vector {
    const Vector d = v - y;
    const double nd = d.norm();
    return nd <= xi ? v : Vector(y + (xi / nd) * d);
  };
  auto evaluate = [&](const Vector& x) {
    Candidate c;
    c.x = x;
    c.residual = (y - sys.apply(x)).norm();
    c.objective = (w.array() * x.array().abs()).sum();
    return c;
  };
  const double feas_limit = xi * (1.0 + cfg.feas_slack) + 1e-12;

  Vector x = warm_start ? Vector(*warm_start / scale) : Vector(Vector::Zero(n));
  if (x.size() != n) throw std::invalid_argument("warm start has wrong length");
  Vector z = x;
  Vector ax = sys.apply(x);
  Vector u = ball(ax);
  Vector a = Vector::Zero(n);
  Vector b = Vector::Zero(m);
  double rho = 1.0;
  const double eps_abs = 1e-3 * cfg.rel_tol;

  std::optional<Candidate> best;
  auto consider = [&](Candidate c) {
    if (c.residual > feas_limit) return;
    if (!best || c.objective < best->objective || (c.certified && !best->certified &&
                                                   c.objective <= best->objective * (1.0 + 1e-12))) {
      best = std::move(c);
    }
  };

  // Sign pattern of the last polish attempt; an unchanged pattern gives the same candidate.
  Vector polished = Vector::Zero(n);
  auto signs = [](const Vector& v) -> Vector { return v.array().sign().matrix(); };

  bool admm_converged = false;
  int it = 0;
  for (; it < cfg.max_iters; ++it) {
    x = sys.solve((z - a) + sys.adjoint(u - b), x);
    ax = sys.apply(x);
    const Vector z_old = z;
    const Vector u_old = u;
    for (Index i = 0; i < n; ++i) z[i] = soft(x[i] + a[i], w[i] / rho);
    u = ball(ax + b);
    a += x - z;
    b += ax - u;

    const double r_pri = std::sqrt((x - z).squaredNorm() + (ax - u).squaredNorm());
    const double r_dual = rho * ((z - z_old) + sys.adjoint(u - u_old)).norm();
    const double eps_pri = std::sqrt(double(n + m)) * eps_abs +
                           cfg.rel_tol * std::max(std::sqrt(x.squaredNorm() + ax.squaredNorm()),
                                                  std::sqrt(z.squaredNorm() + u.squaredNorm()));
    const double eps_dual = std::sqrt(double(n)) * eps_abs + cfg.rel_tol * rho * (a + sys.adjoint(b)).norm();

    if ((it + 1) % 25 == 0 && xi > 0.0 && signs(z) != polished) {
      polished = signs(z);
      if (auto c = polish(sys, n, y, xi, feas_limit, w, z); c && c->certified) {
        consider(std::move(*c));
        admm_converged = true;
        ++it;
        break;
      }
    }
    if (r_pri <= eps_pri && r_dual <= eps_dual) {
      admm_converged = true;
      ++it;
      break;
    }
    // Residual balancing; frozen late so the iteration can settle.
    if (it < cfg.max_iters / 2 && (it + 1) % 10 == 0) {
      if (r_pri > 10.0 * r_dual) {
        rho *= 2.0;
        a /= 2.0;
        b /= 2.0;
      } else if (r_dual > 10.0 * r_pri) {
        rho /= 2.0;
        a *= 2.0;
        b *= 2.0;
      }
    }
  }

  if (!best || !best->certified) {
    if (auto c = polish(sys, n, y, xi, feas_limit, w, signs(z))) consider(std::move(*c));
    consider(evaluate(z));
    consider(evaluate(x));
  }

  if (best) {
    out.x = best->x * scale;
    out.residual = best->residual * scale;
    out.objective = best->objective * scale;
    out.converged = admm_converged || best->certified;
  } else {
    // Nothing feasible: report the sparse iterate and flag it.
    const Candidate c = evaluate(z);
    out.x = c.x * scale;
    out.residual = c.residual * scale;
    out.objective = c.objective * scale;
    out.converged = false;
  }
  out.iterations = it;
  return out;
}

SupportSet thresh(const Vector& x, double omega) {
  if (!(omega >= 0.0)) throw std::invalid_argument("thresh: omega must be nonnegative");
  std::vector<Index> idx;
  for (Index i = 0; i < x.size(); ++i) {
    if (std::abs(x[i]) >= omega) idx.push_back(i);
  }
  return SupportSet(std::move(idx));
}

SupportSet prune(const Vector& x, Index k) {
  if (k < 0) throw std::invalid_argument("prune: negative count");
  k = std::min<Index>(k, x.size());
  std::vector<Index> order(static_cast<std::size_t>(x.size()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index i, Index j) { return std::abs(x[i]) > std::abs(x[j]); });
  order.resize(static_cast<std::size_t>(k));
  return SupportSet(std::move(order));
}

namespace {

Matrix restrict_columns(const LinearOperator& phi, const SupportSet& t) {
  Matrix at(phi.rows(), static_cast<Index>(t.size()));
  Index j = 0;
  for (Index i : t) {
    if (i >= phi.cols()) throw std::invalid_argument("support index out of range");
    at.col(j++) = phi.column(i);
  }
  return at;
}

bool well_conditioned(const Vector& sv, Index k, Index m) {
  if (k > m) return false;
  return sv(0) > 0.0 && sv(k - 1) > kConditionLimit * sv(0);
}

}  // namespace

bool support_is_conditioned(const LinearOperator& phi, const SupportSet& t) {
  if (t.empty()) return true;
  const Matrix at = restrict_columns(phi, t);
  return well_conditioned(Eigen::BDCSVD<Matrix>(at).singularValues(), at.cols(), at.rows());
}

Vector least_squares_on_support(const LinearOperator& phi, const Vector& y, const SupportSet& t) {
  if (y.size() != phi.rows()) throw std::invalid_argument("least squares: dimension mismatch");
  Vector x = Vector::Zero(phi.cols());
  if (t.empty()) return x;
  const Matrix at = restrict_columns(phi, t);
  Eigen::BDCSVD<Matrix> svd(at, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (!well_conditioned(svd.singularValues(), at.cols(), at.rows())) throw IllConditionedSupport();
  const Vector xt = svd.solve(y);
  Index j = 0;
  for (Index i : t) x[i] = xt[j++];
  return x;
}

OverlapDecision support_overlap_policy(const SupportSet& t_prev2, const SupportSet& t_prev1) {
  if (t_prev2.empty() || t_prev1.empty()) return {false, 1.0};
  const double overlap = static_cast<double>(set_intersection(t_prev2, t_prev1).size()) /
                         static_cast<double>(t_prev2.size());
  if (overlap < 0.5) return {false, 1.0};
  const double lambda = static_cast<double>(set_difference(t_prev2, t_prev1).size()) /
                        static_cast<double>(t_prev1.size());
  return {true, lambda};
}

}  // namespace reprocs
