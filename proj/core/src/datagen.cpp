#include "reprocs/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/QR>

namespace reprocs {
namespace {

// Independent streams per purpose so that changing one draw count does not
// shift the others.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

Matrix gaussian_matrix(std::mt19937_64& rng, Index rows, Index cols, double stddev) {
  std::normal_distribution<double> nd(0.0, stddev);
  Matrix g(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) g(i, j) = nd(rng);
  return g;
}

// Q factor of a Gaussian matrix; the first k columns of a Haar-random
// orthonormal matrix have the same law as thin Q of an n x k Gaussian.
Matrix orthonormal_columns(std::mt19937_64& rng, Index n, Index k) {
  const Matrix g = gaussian_matrix(rng, n, k, 1.0);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(n, k);
  // Fix the sign ambiguity of QR so Q is uniformly distributed.
  const Matrix r = qr.matrixQR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  for (Index j = 0; j < k; ++j) {
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  }
  return q;
}

}  // namespace

std::vector<double> geometric_profile(Index count, double first, double ratio) {
  std::vector<double> v(static_cast<std::size_t>(std::max<Index>(count, 0)));
  double cur = first;
  for (auto& x : v) {
    x = cur;
    cur *= ratio;
  }
  return v;
}

void LowRankConfig::validate() const {
  if (n < 1 || r0 < 0 || c_new < 0 || r0 + c_new > n) throw std::invalid_argument("require r0 + c_new <= n");
  if (t_train < 0 || t_1 <= t_train) throw std::invalid_argument("require t_1 > t_train");
  if (total_frames < 0) throw std::invalid_argument("negative frame count");
  if (!variances.empty() && static_cast<Index>(variances.size()) != r0) {
    throw std::invalid_argument("variances must have r0 entries");
  }
  if (static_cast<Index>(new_variances.size()) != c_new) throw std::invalid_argument("new_variances must have c_new entries");
  if (decaying < 0 || decaying > r0) throw std::invalid_argument("decaying count out of range");
  if (decay < 0.0) throw std::invalid_argument("negative decay rate");
}

LowRankData gen_lowrank_ar(const LowRankConfig& cfg) {
  cfg.validate();
  constexpr double kDropVariance = 1e-6;

  auto basis_rng = stream(cfg.seed, 1);
  auto coeff_rng = stream(cfg.seed, 2);
  const Index k = cfg.r0 + cfg.c_new;
  const Matrix q = orthonormal_columns(basis_rng, cfg.n, k);

  LowRankData out;
  out.p0 = BasisMatrix::from_orthonormal(q.leftCols(cfg.r0));
  out.p_new = BasisMatrix::from_orthonormal(q.rightCols(cfg.c_new));
  out.t_1 = cfg.t_1;

  std::vector<double> var = cfg.variances.empty() ? geometric_profile(cfg.r0, 1e4, 0.7079) : cfg.variances;
  // The smallest-variance old directions decay; ties resolve to the later index.
  std::vector<Index> order(static_cast<std::size_t>(cfg.r0));
  for (Index i = 0; i < cfg.r0; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return var[a] > var[b]; });
  out.decaying.assign(order.end() - cfg.decaying, order.end());
  std::sort(out.decaying.begin(), out.decaying.end());
  std::vector<bool> decays(static_cast<std::size_t>(cfg.r0), false);
  for (Index i : out.decaying) decays[i] = true;
  for (double v : cfg.new_variances) var.push_back(v);

  std::normal_distribution<double> nd(0.0, 1.0);
  const double ar = cfg.ar_coeff;
  const double innov = 1.0 - ar * ar;
  Vector a = Vector::Zero(k);
  out.l.resize(cfg.n, cfg.total_frames);
  for (long t = 1; t <= cfg.total_frames; ++t) {
    const bool changed = t >= cfg.t_1;
    for (Index i = 0; i < k; ++i) {
      double v = var[i];
      if (i >= cfg.r0) {
        if (!changed) v = 0.0;
      } else if (changed && decays[i]) {
        v *= std::exp(-cfg.decay * double(t - cfg.t_1));
      }
      const double z = nd(coeff_rng);  // always drawn so streams stay aligned
      if (v < kDropVariance) {
        a[i] = 0.0;
        continue;
      }
      // Stationary AR(1) at t = 1 and for each newly started direction.
      const bool fresh = t == 1 || (i >= cfg.r0 && t == cfg.t_1);
      a[i] = fresh ? std::sqrt(v) * z : ar * a[i] + std::sqrt(innov * v) * z;
    }
    out.l.col(t - 1) = q * a;
  }
  return out;
}

void BlockSupportConfig::validate() const {
  if (block_len < 1 || block_len > n) throw std::invalid_argument("block does not fit");
  if (p_static < 0 || p_up < 0 || p_down < 0 || std::abs(p_static + p_up + p_down - 1.0) > 1e-12) {
    throw std::invalid_argument("move probabilities must be nonnegative and sum to 1");
  }
  if (start && (*start < 0 || *start + block_len > n)) throw std::invalid_argument("start position out of range");
}

SparseData gen_moving_block(const BlockSupportConfig& cfg, long frames) {
  cfg.validate();
  auto rng = stream(cfg.seed, 3);
  const Index last = cfg.n - cfg.block_len;
  Index pos = cfg.start ? *cfg.start : std::uniform_int_distribution<Index>(0, last)(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  SparseData out;
  out.s = Matrix::Zero(cfg.n, frames);
  out.supports.reserve(static_cast<std::size_t>(frames));
  for (long t = 0; t < frames; ++t) {
    if (t > 0) {
      const double draw = u(rng);
      int step = 0;
      if (draw >= cfg.p_static) step = draw < cfg.p_static + cfg.p_up ? 1 : -1;
      if (pos + step < 0 || pos + step > last) step = -step;  // reflect
      if (pos + step >= 0 && pos + step <= last) pos += step;
    }
    out.supports.push_back(SupportSet::range(pos, cfg.block_len));
    out.s.col(t).segment(pos, cfg.block_len).setConstant(cfg.magnitude);
  }
  return out;
}

void MotionBlockConfig::validate() const {
  if (block_rows < 1 || block_cols < 1 || block_rows > image_rows || block_cols > image_cols) {
    throw std::invalid_argument("block does not fit in the image");
  }
  if (q_acc < 0.0) throw std::invalid_argument("negative acceleration variance");
  if (intensity_hi < intensity_lo) throw std::invalid_argument("empty intensity range");
  const double half = block_cols / 2.0;
  if (p0 - half < -0.5 || p0 + half > image_cols + 0.5) throw std::invalid_argument("initial block outside image");
}

double truncated_gaussian(std::mt19937_64& rng, double q) {
  if (q <= 0.0) return 0.0;
  const double sd = std::sqrt(q);
  std::normal_distribution<double> nd(0.0, sd);
  for (;;) {
    const double x = nd(rng);
    if (std::abs(x) < 2.0 * sd) return x;
  }
}

ForegroundData gen_motion_foreground(const MotionBlockConfig& cfg, long frames) {
  cfg.validate();
  auto motion_rng = stream(cfg.seed, 4);
  auto pixel_rng = stream(cfg.seed, 5);
  std::uniform_real_distribution<double> intensity(cfg.intensity_lo, cfg.intensity_hi);

  const Index n = cfg.image_rows * cfg.image_cols;
  const Index top = (cfg.image_rows - cfg.block_rows) / 2;
  // Centroid range keeping the block inside the image.
  const double lo = (cfg.block_cols - 1) / 2.0;
  const double hi = cfg.image_cols - 1 - (cfg.block_cols - 1) / 2.0;

  ForegroundData out;
  out.f = Matrix::Zero(n, frames);
  double p = cfg.p0;
  double v = cfg.v0;
  for (long t = 0; t < frames; ++t) {
    if (t > 0) {
      // g_t = G g_{t-1} + [0; n_t], G = [1 1; 0 1]
      p += v;
      v += truncated_gaussian(motion_rng, cfg.q_acc);
      if (p < lo) {
        p = 2 * lo - p;
        v = -v;
      } else if (p > hi) {
        p = 2 * hi - p;
        v = -v;
      }
      p = std::clamp(p, lo, hi);
    }
    out.centroid.push_back(p);
    const auto left = static_cast<Index>(std::lround(p - (cfg.block_cols - 1) / 2.0));
    const Index first_col = std::clamp<Index>(left, 0, cfg.image_cols - cfg.block_cols);
    std::vector<Index> idx;
    idx.reserve(static_cast<std::size_t>(cfg.block_rows * cfg.block_cols));
    for (Index r = top; r < top + cfg.block_rows; ++r) {
      for (Index c = first_col; c < first_col + cfg.block_cols; ++c) {
        const Index i = r * cfg.image_cols + c;
        idx.push_back(i);
        out.f(i, t) = intensity(pixel_rng);
      }
    }
    out.supports.emplace_back(std::move(idx));
  }
  return out;
}

OverlayData overlay(const FrameSequence& b, const FrameSequence& f, const std::vector<SupportSet>& supports,
                    long training_frames) {
  if (b.rows() != f.rows() || b.cols() != f.cols() || static_cast<Index>(supports.size()) != b.cols()) {
    throw std::invalid_argument("overlay: dimension mismatch");
  }
  if (training_frames < 0 || training_frames > b.cols()) throw std::invalid_argument("overlay: bad training count");
  OverlayData out;
  out.im = b;
  out.s = Matrix::Zero(b.rows(), b.cols());
  for (Index t = 0; t < b.cols(); ++t) {
    if (supports[t].bound() > b.rows()) throw std::invalid_argument("overlay: support index out of range");
    for (Index i : supports[t]) {
      out.im(i, t) = f(i, t);
      out.s(i, t) = f(i, t) - b(i, t);
    }
  }
  const Index cols = training_frames == 0 ? b.cols() : training_frames;
  out.mu = cols > 0 ? Vector(b.leftCols(cols).rowwise().mean()) : Vector::Zero(b.rows());
  return out;
}

DenseOperator gen_gaussian_operator(Index m, Index n, std::uint64_t seed, bool orthonormalize) {
  if (m < 1 || n < 1) throw std::invalid_argument("operator dimensions must be positive");
  auto rng = stream(seed, 6);
  Matrix a = gaussian_matrix(rng, m, n, 1.0 / std::sqrt(double(m)));
  if (orthonormalize) {
    if (m <= n) {
      Eigen::HouseholderQR<Matrix> qr(a.transpose());
      a = (qr.householderQ() * Matrix::Identity(n, m)).transpose();
    } else {
      Eigen::HouseholderQR<Matrix> qr(a);
      a = qr.householderQ() * Matrix::Identity(m, n);
    }
  }
  return DenseOperator(std::move(a));
}

}  // namespace reprocs
