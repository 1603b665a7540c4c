#pragma once

#include <deque>
#include <memory>
#include <vector>

#include "reprocs/linalg.hpp"
#include "reprocs/operator.hpp"
#include "reprocs/sparse.hpp"
#include "reprocs/support.hpp"
#include "reprocs/types.hpp"

namespace reprocs {

enum class Phase { Detect, PPCA };

// How the low-dimensional subspace estimate is refreshed.
enum class SubspaceUpdate {
  ProjectionPCA,  // detect change, then K projection-PCA steps
  RecursivePCA,   // incremental SVD every alpha frames, rank truncation every d frames
};

// Support threshold omega.
enum class ThresholdRule {
  FrameEnergy,   // q * sqrt(||M_t||^2 / n)
  NoiseInfNorm,  // q * ||Phi_t L_hat_{t-1}||_inf
};

struct EngineParams {
  int alpha = 20;
  int k_min = 3;
  int k_max = 10;
  double b_percent = 95.0;
  double q = 1.0;
  ThresholdRule threshold_rule = ThresholdRule::FrameEnergy;
  SolverConfig solver;

  // Throws std::invalid_argument on out-of-range values.
  void validate() const;
};

// Complete online state. Single owner; mutated one frame at a time.
struct EngineState {
  EngineParams params;
  SubspaceUpdate update = SubspaceUpdate::ProjectionPCA;

  BasisMatrix p_hat;         // current estimate, used to build Phi_{t+1}
  BasisMatrix p_prev_final;  // last completed estimate P_(j-1)
  SingularSpectrum sigma_hat;  // training spectrum (1/sqrt(t_train) scaled), r_hat values
  double sigma_min = 0.0;    // r_hat-th training singular value
  Index r_hat = 0;

  Phase phase = Phase::Detect;
  int j = 0;            // number of detected changes
  int k = 0;            // next projection-PCA step (meaningful in Phase::PPCA)
  long t = 0;           // index of the last processed frame (1-based; t_train after init)
  long t_train = 0;
  long t_hat_j = 0;     // start of the window in which the last change was detected

  std::deque<Vector> buffer;              // most recent L_hat vectors, at most alpha
  std::vector<BasisMatrix> new_history;   // P_new,k for the current change, oldest first
  SupportSet t_prev1;
  SupportSet t_prev2;
  Vector l_prev;                          // L_hat_{t-1}

  // RecursivePCA
  BasisMatrix p_tmp;
  SingularSpectrum sigma_tmp;
  long d = 0;

  // Compressive mode: M_t = A S_t + L~_t with A of size m x n.
  std::shared_ptr<const DenseOperator> measurement;

  bool compressive() const { return measurement != nullptr; }
  Index frame_dim() const { return p_hat.ambient_dim(); }
  Index signal_dim() const { return compressive() ? measurement->cols() : frame_dim(); }
};

enum class SubspaceEvent { None, ChangeDetected, PpcaStep, PpcaComplete, RecursiveUpdate };

struct FrameResult {
  Vector s_hat;       // signal_dim
  SupportSet t_hat;
  Vector l_hat;       // frame_dim (L~_hat in compressive mode)
  bool solver_converged = true;
  Phase phase_snapshot = Phase::Detect;  // phase after this frame
  long t = 0;
  double xi = 0.0;
  bool weighted = false;
  Index rank = 0;     // rank of P_hat after this frame
  SubspaceEvent event = SubspaceEvent::None;
};

// Initial state from sparse-free training frames (columns). In compressive
// mode the training frames are already measured (m-dimensional).
EngineState init_engine(const FrameSequence& training, const EngineParams& params,
                        SubspaceUpdate update = SubspaceUpdate::ProjectionPCA);

// Change the subspace update of a state that has not processed any frame yet
// (e.g. one restored from a training checkpoint). Throws std::logic_error otherwise.
void select_update(EngineState& state, SubspaceUpdate update);

// Switch to compressive measurements M_t = A S_t + L~_t. A must have as many
// rows as the training frames had entries.
void set_compressive(EngineState& state, Matrix a);

// One step of the online separation.
FrameResult process_frame(EngineState& state, const Vector& m);

// Subspace refresh for the current buffer; process_frame calls these on
// cadence. Both return the event that occurred.
SubspaceEvent update_subspace_ppca(EngineState& state);
SubspaceEvent update_subspace_recursive_pca(EngineState& state);

// Relative projection difference used to stop projection PCA:
// ||(P_prev P_prev' - P_cur P_cur') s|| / ||P_prev P_prev' s||, with 0/0 = 0.
double projection_change_ratio(const BasisMatrix& p_prev, const BasisMatrix& p_cur, const Vector& s);

}  // namespace reprocs
