#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "reprocs/linalg.hpp"
#include "reprocs/operator.hpp"
#include "reprocs/support.hpp"
#include "reprocs/types.hpp"

namespace reprocs {

// Geometric variance profile: first, first*ratio, ... (count entries).
std::vector<double> geometric_profile(Index count, double first, double ratio);

// L_t = P_t a_t with independent AR(1) coordinates. Frames are numbered
// t = 1..total_frames; column t-1 of the output holds L_t.
struct LowRankConfig {
  Index n = 100;
  Index r0 = 20;
  Index c_new = 2;
  long t_train = 2000;
  long t_1 = 2005;          // first frame carrying the new directions
  long total_frames = 2080;
  double ar_coeff = 0.1;
  double decay = 0.1;       // f_d: decaying variances scale by exp(-f_d (t - t_1))
  std::vector<double> variances;  // r0 entries; empty means geometric 1e4 * 0.7079^i
  std::vector<double> new_variances{60.0, 50.0};
  Index decaying = 2;       // number of smallest-variance old directions that decay at t_1
  std::uint64_t seed = 0;

  // Throws std::invalid_argument.
  void validate() const;
};

struct LowRankData {
  FrameSequence l;
  BasisMatrix p0;      // n x r0
  BasisMatrix p_new;   // n x c_new
  long t_1 = 0;
  // Old coordinates (indices into p0) whose variance decays after t_1.
  std::vector<Index> decaying;
  // [P0 P_new]: the subspace after the change.
  BasisMatrix p1() const { return p0.append(p_new); }
};

LowRankData gen_lowrank_ar(const LowRankConfig& cfg);

// One contiguous block moving by a lazy +-1 random walk, reflecting at the ends.
struct BlockSupportConfig {
  Index n = 100;
  Index block_len = 9;
  double p_static = 0.8;
  double p_up = 0.1;
  double p_down = 0.1;
  double magnitude = 100.0;
  std::optional<Index> start;  // first index of the block; uniform when unset
  std::uint64_t seed = 0;

  void validate() const;
};

struct SparseData {
  std::vector<SupportSet> supports;
  FrameSequence s;
};

SparseData gen_moving_block(const BlockSupportConfig& cfg, long frames);

// Rectangular foreground block whose horizontal centroid follows a constant
// velocity model with truncated-Gaussian acceleration.
struct MotionBlockConfig {
  Index image_rows = 72;
  Index image_cols = 90;
  Index block_rows = 45;
  Index block_cols = 25;
  double intensity_lo = 170.0;
  double intensity_hi = 230.0;
  double p0 = 27.0;   // initial centroid column
  double v0 = 0.5;    // pixels per frame
  double q_acc = 0.02;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ForegroundData {
  FrameSequence f;                   // zero off the block; images vectorized row-major
  std::vector<SupportSet> supports;
  std::vector<double> centroid;      // continuous centroid column per frame
};

ForegroundData gen_motion_foreground(const MotionBlockConfig& cfg, long frames);

// Draw from N(0, q) conditioned on |x| < 2 sqrt(q) by rejection; 0 when q == 0.
double truncated_gaussian(std::mt19937_64& rng, double q);

struct OverlayData {
  FrameSequence im;
  FrameSequence s;
  Vector mu;  // mean of the first training_frames background columns
};

// Im_t = F_t on T_t and B_t elsewhere; S_t = (F_t - B_t) on T_t.
// training_frames == 0 averages every frame.
OverlayData overlay(const FrameSequence& b, const FrameSequence& f, const std::vector<SupportSet>& supports,
                    long training_frames = 0);

// m x n matrix with iid N(0, 1/m) entries. With orthonormalize the rows (m <= n)
// or columns (m > n) are made orthonormal.
DenseOperator gen_gaussian_operator(Index m, Index n, std::uint64_t seed, bool orthonormalize = false);

}  // namespace reprocs
