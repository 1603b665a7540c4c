#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "reprocs/datagen.hpp"
#include "reprocs/engine.hpp"
#include "reprocs/linalg.hpp"
#include "reprocs/support.hpp"
#include "reprocs/types.hpp"

namespace reprocs {

struct MetricReport {
  std::string label;
  std::vector<double> per_frame;
  double aggregate = 0.0;
};

// sum_r ||S_r - S_hat_r||_F^2 / sum_r ||S_r||_F^2. Throws on zero-energy truth.
double nmse_matrix(const std::vector<FrameSequence>& s_true, const std::vector<FrameSequence>& s_hat);
double nmse_matrix(const FrameSequence& s_true, const FrameSequence& s_hat);

// ||S_t - S_hat_t||^2 / ||S_t||^2 per frame (0/0 = 0); aggregate is the mean.
MetricReport nmse_per_frame(const FrameSequence& s_true, const FrameSequence& s_hat);

// Frames are split into windows of tau; P_(j) = approx-basis(window j, b).
// For every frame t >= tau in window j, reports ||(I - P_(j-1)P_(j-1)')L_t|| / ||L_t||
// (0/0 = 0). Aggregate is the mean. Requires at least 2 tau frames.
MetricReport verify_slow_subspace_change(const FrameSequence& l, Index tau, double b_percent);

// Per frame max_i ||(P_i)_{T_t}||; aggregate is the max.
MetricReport verify_denseness(const BasisMatrix& p, const std::vector<SupportSet>& supports);

struct SupportDynamics {
  MetricReport size;     // |T_t| / n
  MetricReport added;    // |T_t \ T_{t-1}| / |T_t|
  MetricReport removed;  // |T_{t-1} \ T_t| / |T_t|
};

// Series for frames 2..T (0/0 = 0); aggregates are means. Requires >= 2 frames.
SupportDynamics verify_support_dynamics(const std::vector<SupportSet>& supports, Index n);

// A simulated benchmark case.
struct Scenario {
  std::string name = "table1-9-large";
  Index n = 100;
  Index r0 = 20;
  Index c_new = 2;
  long t_train = 2000;
  long post_frames = 80;
  long change_offset = 5;  // t_1 = t_train + change_offset
  Index block_len = 9;
  double magnitude = 100.0;
  EngineParams params = default_params();
  SubspaceUpdate update = SubspaceUpdate::ProjectionPCA;
  bool compressive = false;
  double measure_ratio = 0.7;  // m = round(ratio * n) in compressive mode

  static EngineParams default_params();
};

// Table I cases: block_len in {9, 27}, magnitude in {100, 10}. Magnitude 10
// uses q = 0.25.
Scenario table1_case(Index block_len, double magnitude);

struct ScenarioData {
  FrameSequence training;  // t_train measured frames (sparse-free)
  FrameSequence m;         // post-training measurements
  FrameSequence l;         // true low-rank part, post-training (signal space)
  FrameSequence s;         // true sparse part, post-training
  std::vector<SupportSet> supports;
  BasisMatrix p1;          // span [P0 P_new]; span A[P0 P_new] in compressive mode
  long t_train = 0;
  long t_1 = 0;
  std::optional<Matrix> a; // compressive measurement matrix
};

ScenarioData generate_scenario(const Scenario& sc, std::uint64_t seed);

struct RunDiagnostics {
  FrameSequence s_hat;
  FrameSequence l_hat;
  std::vector<SupportSet> t_hat;
  std::vector<double> beta;       // ||Phi_t L_t|| with the true L_t (A L_t in compressive mode)
  std::vector<double> xi;
  std::vector<SubspaceEvent> events;
  std::vector<Index> rank;
  long detection_time = -1;       // frame at which the change was detected
  long ppca_complete_time = -1;   // frame at which projection PCA stopped
  int ppca_steps = 0;             // steps taken for the first change
  std::vector<double> step_beta_means;  // mean beta after each p-PCA step until the next (complete intervals only)
  double se_final = 0.0;          // SE([P0 P_new], P_hat) after the last frame
  double se_at_complete = -1.0;   // SE right after projection PCA stopped
  bool all_converged = true;
  double nmse = 0.0;
  double error_energy = 0.0;   // ||S - S_hat||_F^2
  double signal_energy = 0.0;  // ||S||_F^2
  double exact_support_rate = 0.0;
  double seconds = 0.0;
};

RunDiagnostics run_scenario(const Scenario& sc, const ScenarioData& data);

struct BenchmarkRow {
  std::string scenario;
  int realizations = 0;
  std::uint64_t seed = 0;
  double nmse = 0.0;  // Monte-Carlo ratio of summed energies
  double exact_support_rate = 0.0;
  double mean_seconds = 0.0;
  std::vector<double> realization_nmse;
  std::vector<RunDiagnostics> runs;  // in realization order
};

// Realization r uses seed derive_seed(seed, r). Runs on up to `threads`
// workers (capped by REPROCS_THREADS); results do not depend on scheduling.
BenchmarkRow run_benchmark(const Scenario& sc, int realizations, std::uint64_t seed, int threads = 0);

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

// Worker count after applying REPROCS_THREADS and hardware limits; requested <= 0 means "max".
int effective_threads(int requested);

// CSV writers: header row, LF line endings, '.' decimal, round-trip precision.
void write_benchmark_csv(std::ostream& os, const std::vector<BenchmarkRow>& rows);
void write_realizations_csv(std::ostream& os, const BenchmarkRow& row);
void write_report_csv(std::ostream& os, const std::vector<MetricReport>& reports, long first_frame = 1);

}  // namespace reprocs
