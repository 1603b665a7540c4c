#pragma once

#include <optional>

#include "reprocs/operator.hpp"
#include "reprocs/support.hpp"
#include "reprocs/types.hpp"

namespace reprocs {

// min_x lambda*||x_T||_1 + ||x_{T^c}||_1  s.t.  ||y - Phi x||_2 <= xi
// lambda == 1 is plain basis pursuit denoising and ignores weight_set.
struct L1Problem {
  const LinearOperator* phi = nullptr;
  Vector y;
  double xi = 0.0;
  SupportSet weight_set;
  double lambda = 1.0;
};

struct SolverConfig {
  int max_iters = 2000;
  double rel_tol = 1e-6;
  // Allowed relative excess of the residual over xi.
  double feas_slack = 1e-4;
};

struct L1Result {
  Vector x;
  bool converged = false;
  int iterations = 0;
  double objective = 0.0;
  double residual = 0.0;
};

// Weighted l1 objective of x for the weights implied by prob.
double weighted_l1_norm(const L1Problem& prob, const Vector& x);

// Operator splitting (ADMM) on the constrained form followed by an exact
// polish on the identified support. `warm_start`, when given, seeds x.
// Deterministic for fixed inputs. converged == false flags both iteration
// exhaustion and an infeasible budget (xi below the distance from y to
// range(Phi)); the best iterate is returned either way.
L1Result solve_weighted_l1(const L1Problem& prob, const SolverConfig& cfg = {},
                           const std::optional<Vector>& warm_start = std::nullopt);

// {i : |x_i| >= omega}
SupportSet thresh(const Vector& x, double omega);

// Indices of the k largest |x_i|; ties go to the lower index. k is clipped to n.
SupportSet prune(const Vector& x, Index k);

// Minimum-norm least squares of y on the columns of Phi indexed by T, zero
// elsewhere. Throws IllConditionedSupport when sigma_min(Phi_T) <= 1e-8 sigma_max(Phi_T).
Vector least_squares_on_support(const LinearOperator& phi, const Vector& y, const SupportSet& t);

// True when Phi_T passes the conditioning test used by least_squares_on_support.
bool support_is_conditioned(const LinearOperator& phi, const SupportSet& t);

struct OverlapDecision {
  bool use_weighted = false;
  double lambda = 1.0;
};

// Weighted l1 is used when |T2 n T1| / |T2| >= 0.5, with
// lambda = |T2 \ T1| / |T1|. Empty denominators fall back to plain l1.
OverlapDecision support_overlap_policy(const SupportSet& t_prev2, const SupportSet& t_prev1);

}  // namespace reprocs
