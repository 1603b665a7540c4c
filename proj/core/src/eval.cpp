#include "reprocs/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <thread>

namespace reprocs {
namespace {

// 0/0 = 0; a nonzero numerator over 0 stays infinite.
double ratio_or_zero(double num, double den) {
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return num / den;
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / double(v.size());
}

void check_same_shape(const FrameSequence& a, const FrameSequence& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw std::invalid_argument("sequence dimensions differ");
}

std::ostream& csv_number(std::ostream& os, double x) {
  const auto old = os.precision(17);
  os << x;
  os.precision(old);
  return os;
}

}  // namespace

double nmse_matrix(const std::vector<FrameSequence>& s_true, const std::vector<FrameSequence>& s_hat) {
  if (s_true.size() != s_hat.size()) throw std::invalid_argument("realization counts differ");
  double err = 0.0;
  double sig = 0.0;
  for (std::size_t r = 0; r < s_true.size(); ++r) {
    check_same_shape(s_true[r], s_hat[r]);
    err += (s_true[r] - s_hat[r]).squaredNorm();
    sig += s_true[r].squaredNorm();
  }
  if (!(sig > 0.0)) throw std::invalid_argument("zero-energy truth");
  return err / sig;
}

double nmse_matrix(const FrameSequence& s_true, const FrameSequence& s_hat) {
  return nmse_matrix(std::vector<FrameSequence>{s_true}, std::vector<FrameSequence>{s_hat});
}

MetricReport nmse_per_frame(const FrameSequence& s_true, const FrameSequence& s_hat) {
  check_same_shape(s_true, s_hat);
  MetricReport rep{"nmse", {}, 0.0};
  for (Index t = 0; t < s_true.cols(); ++t) {
    rep.per_frame.push_back(
        ratio_or_zero((s_true.col(t) - s_hat.col(t)).squaredNorm(), s_true.col(t).squaredNorm()));
  }
  rep.aggregate = mean(rep.per_frame);
  return rep;
}

MetricReport verify_slow_subspace_change(const FrameSequence& l, Index tau, double b_percent) {
  if (tau < 1) throw std::invalid_argument("tau must be >= 1");
  if (l.cols() < 2 * tau) throw std::invalid_argument("need at least 2 tau frames");
  MetricReport rep{"subspace_change", {}, 0.0};
  const Index windows = l.cols() / tau;
  std::vector<BasisMatrix> bases;
  for (Index j = 0; j < windows; ++j) bases.push_back(approx_basis_energy(l.middleCols(j * tau, tau), b_percent).basis);
  for (Index t = tau; t < l.cols(); ++t) {
    const Index prev = std::min<Index>(t / tau, windows) - 1;
    const PerpProjector phi(bases[prev]);
    rep.per_frame.push_back(ratio_or_zero(phi.apply(Vector(l.col(t))).norm(), l.col(t).norm()));
  }
  rep.aggregate = mean(rep.per_frame);
  return rep;
}

MetricReport verify_denseness(const BasisMatrix& p, const std::vector<SupportSet>& supports) {
  MetricReport rep{"denseness", {}, 0.0};
  for (const auto& t : supports) {
    if (t.bound() > p.ambient_dim()) throw std::invalid_argument("support index out of range");
    double best = 0.0;
    for (Index i = 0; i < p.rank(); ++i) {
      double sq = 0.0;
      for (Index idx : t) sq += p.matrix()(idx, i) * p.matrix()(idx, i);
      best = std::max(best, std::sqrt(sq));
    }
    rep.per_frame.push_back(best);
    rep.aggregate = std::max(rep.aggregate, best);
  }
  return rep;
}

SupportDynamics verify_support_dynamics(const std::vector<SupportSet>& supports, Index n) {
  if (supports.size() < 2) throw std::invalid_argument("need at least 2 frames");
  if (n < 1) throw std::invalid_argument("dimension must be positive");
  SupportDynamics d{{"support_size", {}, 0.0}, {"support_added", {}, 0.0}, {"support_removed", {}, 0.0}};
  for (std::size_t t = 1; t < supports.size(); ++t) {
    const double size = double(supports[t].size());
    d.size.per_frame.push_back(size / double(n));
    d.added.per_frame.push_back(ratio_or_zero(double(set_difference(supports[t], supports[t - 1]).size()), size));
    d.removed.per_frame.push_back(
        ratio_or_zero(double(set_difference(supports[t - 1], supports[t]).size()), size));
  }
  d.size.aggregate = mean(d.size.per_frame);
  d.added.aggregate = mean(d.added.per_frame);
  d.removed.aggregate = mean(d.removed.per_frame);
  return d;
}

EngineParams Scenario::default_params() {
  EngineParams p;
  p.alpha = 20;
  p.k_min = 3;
  p.k_max = 10;
  p.b_percent = 99.99;
  p.q = 1.0;
  return p;
}

Scenario table1_case(Index block_len, double magnitude) {
  if (block_len != 9 && block_len != 27) throw std::invalid_argument("block length must be 9 or 27");
  if (magnitude != 100.0 && magnitude != 10.0) throw std::invalid_argument("magnitude must be 100 or 10");
  Scenario sc;
  sc.block_len = block_len;
  sc.magnitude = magnitude;
  sc.name = "table1-" + std::to_string(block_len) + (magnitude == 100.0 ? "-large" : "-small");
  if (magnitude == 10.0) sc.params.q = 0.25;
  return sc;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

ScenarioData generate_scenario(const Scenario& sc, std::uint64_t seed) {
  LowRankConfig lc;
  lc.n = sc.n;
  lc.r0 = sc.r0;
  lc.c_new = sc.c_new;
  lc.t_train = sc.t_train;
  lc.t_1 = sc.t_train + sc.change_offset;
  lc.total_frames = sc.t_train + sc.post_frames;
  lc.new_variances.assign(static_cast<std::size_t>(sc.c_new), 50.0);
  if (sc.c_new > 0) lc.new_variances[0] = 60.0;
  lc.decaying = std::min<Index>(2, sc.r0);
  lc.seed = seed;
  const LowRankData low = gen_lowrank_ar(lc);

  BlockSupportConfig bc;
  bc.n = sc.n;
  bc.block_len = sc.block_len;
  bc.magnitude = sc.magnitude;
  bc.seed = seed;
  SparseData sparse = gen_moving_block(bc, sc.post_frames);

  ScenarioData d;
  d.t_train = sc.t_train;
  d.t_1 = lc.t_1;
  d.p1 = low.p1();
  d.l = low.l.rightCols(sc.post_frames);
  d.s = std::move(sparse.s);
  d.supports = std::move(sparse.supports);
  const FrameSequence train = low.l.leftCols(sc.t_train);
  const FrameSequence signal = d.l + d.s;
  if (sc.compressive) {
    const auto m = static_cast<Index>(std::lround(sc.measure_ratio * double(sc.n)));
    d.a = gen_gaussian_operator(m, sc.n, seed).matrix();
    d.training = *d.a * train;
    d.m = *d.a * signal;
    // The engine tracks the low-rank part in measurement space.
    d.p1 = left_svd(*d.a * d.p1.matrix()).basis;
  } else {
    d.training = train;
    d.m = signal;
  }
  return d;
}

RunDiagnostics run_scenario(const Scenario& sc, const ScenarioData& data) {
  const auto start = std::chrono::steady_clock::now();
  EngineState st = init_engine(data.training, sc.params, sc.update);
  if (data.a) set_compressive(st, *data.a);

  RunDiagnostics out;
  const Index frames = data.m.cols();
  out.s_hat.resize(data.s.rows(), frames);
  out.l_hat.resize(data.m.rows(), frames);
  std::vector<long> step_frames;
  bool first_change_open = false;
  bool first_change_done = false;
  for (Index c = 0; c < frames; ++c) {
    const Vector l_meas = data.a ? Vector(*data.a * data.l.col(c)) : Vector(data.l.col(c));
    out.beta.push_back(PerpProjector(st.p_hat).apply(l_meas).norm());

    FrameResult r = process_frame(st, data.m.col(c));
    out.s_hat.col(c) = r.s_hat;
    out.l_hat.col(c) = r.l_hat;
    out.t_hat.push_back(r.t_hat);
    out.xi.push_back(r.xi);
    out.events.push_back(r.event);
    out.rank.push_back(r.rank);
    out.all_converged = out.all_converged && r.solver_converged;

    if (first_change_done) continue;
    if (r.event == SubspaceEvent::ChangeDetected) {
      out.detection_time = r.t;
      first_change_open = true;
    }
    if (first_change_open && r.event != SubspaceEvent::None) {
      step_frames.push_back(r.t);
      if (r.phase_snapshot == Phase::Detect) {
        out.ppca_complete_time = r.t;
        out.se_at_complete = subspace_error(data.p1, st.p_hat);
        first_change_done = true;
      }
    }
  }
  out.ppca_steps = static_cast<int>(step_frames.size());
  out.se_final = subspace_error(data.p1, st.p_hat);

  // beta is recorded before each frame, so frame t uses the estimate from t-1.
  const long first_t = data.t_train + 1;
  for (std::size_t k = 0; k < step_frames.size(); ++k) {
    const long lo = step_frames[k] + 1;
    const long hi = k + 1 < step_frames.size() ? step_frames[k + 1] : step_frames[k] + sc.params.alpha;
    double sum = 0.0;
    long count = 0;
    if (hi - first_t >= frames) break;  // interval cut off by the end of the run
    for (long t = lo; t <= hi; ++t) {
      sum += out.beta[static_cast<std::size_t>(t - first_t)];
      ++count;
    }
    if (count > 0) out.step_beta_means.push_back(sum / double(count));
  }

  out.error_energy = (data.s - out.s_hat).squaredNorm();
  out.signal_energy = data.s.squaredNorm();
  out.nmse = ratio_or_zero(out.error_energy, out.signal_energy);
  Index exact = 0;
  for (Index c = 0; c < frames; ++c) exact += out.t_hat[c] == data.supports[c] ? 1 : 0;
  out.exact_support_rate = frames > 0 ? double(exact) / double(frames) : 1.0;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

int effective_threads(int requested) {
  int hw = static_cast<int>(std::thread::hardware_concurrency());
  if (hw < 1) hw = 1;
  int n = requested > 0 ? requested : hw;
  if (const char* env = std::getenv("REPROCS_THREADS")) {
    char* end = nullptr;
    const long cap = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && cap > 0) n = std::min<int>(n, static_cast<int>(cap));
  }
  return std::max(n, 1);
}

BenchmarkRow run_benchmark(const Scenario& sc, int realizations, std::uint64_t seed, int threads) {
  if (realizations < 1) throw std::invalid_argument("need at least one realization");
  BenchmarkRow row;
  row.scenario = sc.name;
  row.realizations = realizations;
  row.seed = seed;
  row.runs.resize(static_cast<std::size_t>(realizations));

  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (int r = next++; r < realizations; r = next++) {
      try {
        const ScenarioData data = generate_scenario(sc, derive_seed(seed, static_cast<std::uint64_t>(r)));
        row.runs[static_cast<std::size_t>(r)] = run_scenario(sc, data);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int workers = std::min(effective_threads(threads), realizations);
  std::vector<std::thread> pool;
  for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  // Ordered reduction: independent of completion order.
  double err = 0.0;
  double sig = 0.0;
  double exact = 0.0;
  double secs = 0.0;
  for (const auto& run : row.runs) {
    err += run.error_energy;
    sig += run.signal_energy;
    exact += run.exact_support_rate;
    secs += run.seconds;
    row.realization_nmse.push_back(run.nmse);
  }
  row.nmse = ratio_or_zero(err, sig);
  row.exact_support_rate = exact / realizations;
  row.mean_seconds = secs / realizations;
  return row;
}

void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkRow>& rows) {
  os << "scenario,realizations,seed,nmse,exact_support_rate,mean_seconds\n";
  for (const auto& r : rows) {
    os << r.scenario << ',' << r.realizations << ',' << r.seed << ',';
    csv_number(os, r.nmse) << ',';
    csv_number(os, r.exact_support_rate) << ',';
    csv_number(os, r.mean_seconds) << '\n';
  }
}

void write_realizations_csv(std::ostream& os, const BenchmarkRow& row) {
  os << "realization,seed,nmse,exact_support_rate,detection_time,ppca_steps,se_final,seconds\n";
  for (std::size_t i = 0; i < row.runs.size(); ++i) {
    const auto& run = row.runs[i];
    os << i << ',' << derive_seed(row.seed, i) << ',';
    csv_number(os, run.nmse) << ',';
    csv_number(os, run.exact_support_rate) << ',' << run.detection_time << ',' << run.ppca_steps << ',';
    csv_number(os, run.se_final) << ',';
    csv_number(os, run.seconds) << '\n';
  }
}

void write_report_csv(std::ostream& os, const std::vector<MetricReport>& reports, long first_frame) {
  std::size_t len = 0;
  for (const auto& r : reports) len = std::max(len, r.per_frame.size());
  os << "frame";
  for (const auto& r : reports) os << ',' << r.label;
  os << '\n';
  for (std::size_t i = 0; i < len; ++i) {
    os << first_frame + static_cast<long>(i);
    for (const auto& r : reports) {
      os << ',';
      if (i < r.per_frame.size()) csv_number(os, r.per_frame[i]);
    }
    os << '\n';
  }
}

}  // namespace reprocs
