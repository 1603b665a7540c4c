#include "reprocs/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "reprocs/error.hpp"

namespace reprocs {
namespace {

// Same materialization bound as the solver; above it the operator stays matrix-free.
constexpr Index kMaterializeLimit = 4'000'000;

Matrix buffer_matrix(const std::deque<Vector>& buf, std::size_t count) {
  const std::size_t first = buf.size() - count;
  Matrix w(buf.front().size(), static_cast<Index>(count));
  for (std::size_t i = 0; i < count; ++i) w.col(static_cast<Index>(i)) = buf[first + i];
  return w;
}

// Drops the entries of T with the smallest |ref| until Phi_T is well conditioned.
SupportSet condition_support(const LinearOperator& op, SupportSet t, const Vector& ref) {
  auto weakest_first = [&](const SupportSet& s) {
    std::vector<Index> idx(s.begin(), s.end());
    // ascending |ref|; among equal magnitudes the larger index goes first
    std::stable_sort(idx.begin(), idx.end(), [&](Index a, Index b) {
      const double fa = std::abs(ref[a]);
      const double fb = std::abs(ref[b]);
      return fa < fb || (fa == fb && a > b);
    });
    return idx;
  };
  if (static_cast<Index>(t.size()) > op.rows()) {
    std::vector<Index> idx = weakest_first(t);
    idx.erase(idx.begin(), idx.begin() + (static_cast<Index>(idx.size()) - op.rows()));
    t = SupportSet(std::move(idx));
  }
  while (!t.empty() && !support_is_conditioned(op, t)) {
    std::vector<Index> idx = weakest_first(t);
    idx.erase(idx.begin());
    t = SupportSet(std::move(idx));
  }
  return t;
}

}  // namespace

void EngineParams::validate() const {
  if (alpha < 1) throw std::invalid_argument("alpha must be >= 1");
  if (k_min < 1 || k_max < k_min) throw std::invalid_argument("require 1 <= k_min <= k_max");
  if (!(b_percent > 0.0 && b_percent <= 100.0)) throw std::invalid_argument("b_percent must lie in (0, 100]");
  if (!(q > 0.0)) throw std::invalid_argument("q must be positive");
  if (solver.max_iters < 1 || !(solver.rel_tol > 0.0) || !(solver.feas_slack > 0.0)) {
    throw std::invalid_argument("solver settings must be positive");
  }
}

EngineState init_engine(const FrameSequence& training, const EngineParams& params, SubspaceUpdate update) {
  params.validate();
  if (training.cols() < 1 || training.rows() < 1) throw std::invalid_argument("empty training sequence");

  EngineState st;
  st.params = params;
  st.t_train = static_cast<long>(training.cols());
  st.t = st.t_train;
  st.t_hat_j = st.t_train;

  const SvdBasis init = approx_basis_energy(training / std::sqrt(double(training.cols())), params.b_percent);
  st.p_hat = init.basis;
  st.p_prev_final = init.basis;
  st.r_hat = init.basis.rank();
  st.sigma_hat = init.spectrum;
  st.sigma_min = st.r_hat > 0 ? init.spectrum[st.r_hat - 1] : 0.0;

  // Training frames are sparse-free, so they seed L_hat history directly.
  const Index tail = std::min<Index>(params.alpha, training.cols());
  for (Index c = training.cols() - tail; c < training.cols(); ++c) st.buffer.emplace_back(training.col(c));
  st.l_prev = training.col(training.cols() - 1);

  select_update(st, update);
  return st;
}

void select_update(EngineState& st, SubspaceUpdate update) {
  if (st.t != st.t_train) throw std::logic_error("subspace update can only change before the first frame");
  st.update = update;
  st.p_tmp = BasisMatrix();
  st.sigma_tmp = SingularSpectrum();
  st.d = 0;
  if (update == SubspaceUpdate::RecursivePCA) {
    st.p_tmp = st.p_hat;
    st.sigma_tmp = st.sigma_hat;
    st.d = 3 * static_cast<long>(st.r_hat);
  }
}

void set_compressive(EngineState& state, Matrix a) {
  if (a.rows() != state.frame_dim()) {
    throw std::invalid_argument("measurement operator rows differ from training dimension");
  }
  state.measurement = std::make_shared<DenseOperator>(std::move(a));
}

double projection_change_ratio(const BasisMatrix& p_prev, const BasisMatrix& p_cur, const Vector& s) {
  auto project = [&](const BasisMatrix& p) -> Vector {
    if (p.empty()) return Vector::Zero(s.size());
    return p.matrix() * (p.matrix().transpose() * s);
  };
  const Vector prev = project(p_prev);
  const double num = (prev - project(p_cur)).norm();
  const double den = prev.norm();
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

SubspaceEvent update_subspace_ppca(EngineState& st) {
  const int alpha = st.params.alpha;
  if ((st.t - st.t_hat_j + 1) % alpha != 0) return SubspaceEvent::None;
  if (st.buffer.size() < static_cast<std::size_t>(alpha)) return SubspaceEvent::None;

  const Matrix window = buffer_matrix(st.buffer, static_cast<std::size_t>(alpha));
  const PerpProjector phi(st.p_prev_final);
  const SvdBasis svd = left_svd(phi.apply(window) / std::sqrt(double(alpha)));
  const Vector& sv = svd.spectrum.values();
  Index above = 0;
  while (above < sv.size() && sv[above] > st.sigma_min) ++above;

  SubspaceEvent event = SubspaceEvent::PpcaStep;
  if (st.phase == Phase::Detect) {
    if (above == 0) return SubspaceEvent::None;
    st.phase = Phase::PPCA;
    st.j += 1;
    st.t_hat_j = st.t - alpha + 1;
    st.k = 1;
    st.new_history.clear();
    event = SubspaceEvent::ChangeDetected;
  }

  const Index clip = (alpha + 2) / 3;
  const BasisMatrix p_new = svd.basis.leading(std::min(above, clip));
  st.p_hat = st.p_prev_final.append(p_new);
  st.new_history.push_back(p_new);
  if (st.new_history.size() > 4) st.new_history.erase(st.new_history.begin());

  bool stop = st.k >= st.params.k_max;
  if (!stop && st.k >= std::max(st.params.k_min, 3)) {
    const Vector s = window.rowwise().sum();
    const int h = static_cast<int>(st.new_history.size());
    bool settled = true;
    for (int i = st.k - 2; i <= st.k; ++i) {
      if (i < 2) continue;
      const int cur = h - 1 - (st.k - i);
      if (cur < 1) continue;
      if (!(projection_change_ratio(st.new_history[cur - 1], st.new_history[cur], s) < 0.01)) settled = false;
    }
    stop = settled;
  }

  if (stop) {
    st.p_prev_final = st.p_hat;
    st.phase = Phase::Detect;
    st.k = 0;
    st.new_history.clear();
    return event == SubspaceEvent::ChangeDetected ? event : SubspaceEvent::PpcaComplete;
  }
  st.k += 1;
  return event;
}

SubspaceEvent update_subspace_recursive_pca(EngineState& st) {
  const long since = st.t - st.t_train;
  if (since <= 0) return SubspaceEvent::None;
  SubspaceEvent event = SubspaceEvent::None;
  const auto alpha = static_cast<std::size_t>(st.params.alpha);
  if (since % st.params.alpha == 0 && st.buffer.size() >= alpha) {
    const SvdBasis upd = inc_svd(st.p_tmp, st.sigma_tmp, buffer_matrix(st.buffer, alpha));
    st.p_tmp = upd.basis;
    st.sigma_tmp = upd.spectrum;
    st.p_hat = st.p_tmp.leading(std::min(st.r_hat, st.p_tmp.rank()));
    event = SubspaceEvent::RecursiveUpdate;
  }
  if (st.d > 0 && since % st.d == 0) {
    const Index keep = std::min(st.r_hat, st.p_tmp.rank());
    st.p_tmp = st.p_tmp.leading(keep);
    st.sigma_tmp = st.sigma_tmp.leading(keep);
  }
  return event;
}

FrameResult process_frame(EngineState& st, const Vector& m) {
  if (m.size() != st.frame_dim()) throw std::invalid_argument("frame dimension mismatch");
  st.t += 1;

  const PerpProjector phi(st.p_hat);
  OperatorPtr op = std::make_shared<ProjectorOperator>(phi, st.frame_dim());
  if (st.compressive()) op = std::make_shared<ComposedOperator>(op, st.measurement);
  if (op->rows() * op->cols() <= kMaterializeLimit) op = std::make_shared<DenseOperator>(op->to_dense());

  const Index n = st.signal_dim();
  const Vector y = phi.apply(m);
  const Vector beta_hat = phi.apply(st.l_prev);

  FrameResult res;
  res.t = st.t;
  res.xi = beta_hat.norm();
  res.s_hat = Vector::Zero(n);

  const double m_norm = m.norm();
  if (m_norm > 0.0) {
    const OverlapDecision policy = support_overlap_policy(st.t_prev2, st.t_prev1);
    const double omega = st.params.threshold_rule == ThresholdRule::FrameEnergy
                              ? st.params.q * std::sqrt(m_norm * m_norm / double(n))
                              : st.params.q * beta_hat.lpNorm<Eigen::Infinity>();
    L1Problem prob;
    prob.phi = op.get();
    prob.y = y;
    prob.xi = res.xi;
    if (policy.use_weighted) {
      prob.weight_set = st.t_prev1;
      prob.lambda = policy.lambda;
    }
    const L1Result cs = solve_weighted_l1(prob, st.params.solver);
    res.solver_converged = cs.converged;
    res.weighted = policy.use_weighted;

    // Exact zeros carry no evidence, even when omega is 0.
    const SupportSet nonzero = SupportSet::of(cs.x);
    SupportSet t_hat;
    if (!policy.use_weighted) {
      t_hat = set_intersection(thresh(cs.x, omega), nonzero);
    } else {
      const auto k_add = static_cast<Index>((14 * st.t_prev1.size() + 9) / 10);  // ceil(1.4 |T|)
      const SupportSet t_add = condition_support(*op, prune(cs.x, k_add), cs.x);
      const Vector s_add = least_squares_on_support(*op, y, t_add);
      t_hat = set_intersection(thresh(s_add, omega), SupportSet::of(s_add));
    }
    t_hat = condition_support(*op, t_hat, cs.x);
    res.s_hat = least_squares_on_support(*op, y, t_hat);
    res.t_hat = std::move(t_hat);
  }

  res.l_hat = st.compressive() ? Vector(m - st.measurement->apply(res.s_hat)) : Vector(m - res.s_hat);

  st.t_prev2 = std::move(st.t_prev1);
  st.t_prev1 = res.t_hat;
  st.l_prev = res.l_hat;
  st.buffer.push_back(res.l_hat);
  while (st.buffer.size() > static_cast<std::size_t>(st.params.alpha)) st.buffer.pop_front();

  res.event = st.update == SubspaceUpdate::ProjectionPCA ? update_subspace_ppca(st)
                                                          : update_subspace_recursive_pca(st);
  res.phase_snapshot = st.phase;
  res.rank = st.p_hat.rank();
  return res;
}

}  // namespace reprocs
