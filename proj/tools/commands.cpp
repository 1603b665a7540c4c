#include "commands.hpp"

#include <fstream>
#include <sstream>

#include "reprocs/datagen.hpp"
#include "reprocs/error.hpp"

namespace reprocs::cli {
namespace {

const char* kLakePreset = "lake-like-motion";

std::ofstream open_text(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create " + path.string());
  return out;
}

const char* event_name(SubspaceEvent e) {
  switch (e) {
    case SubspaceEvent::None: return "none";
    case SubspaceEvent::ChangeDetected: return "change_detected";
    case SubspaceEvent::PpcaStep: return "ppca_step";
    case SubspaceEvent::PpcaComplete: return "ppca_complete";
    case SubspaceEvent::RecursiveUpdate: return "recursive_update";
  }
  return "none";
}

void write_run_config(const fs::path& path, const Scenario& sc) {
  Manifest m;
  m["mode"] = sc.compressive ? "compressive" : (sc.update == SubspaceUpdate::RecursivePCA ? "rpca" : "ppca");
  m["alpha"] = std::to_string(sc.params.alpha);
  m["kmin"] = std::to_string(sc.params.k_min);
  m["kmax"] = std::to_string(sc.params.k_max);
  m["b_percent"] = format_double(sc.params.b_percent);
  m["q"] = format_double(sc.params.q);
  write_manifest(path, m);
}

// Supports as written by simulate (0-based indices).
void write_supports(const fs::path& path, const std::vector<SupportSet>& supports, long first_frame) {
  auto out = open_text(path);
  write_supports_header(out);
  for (std::size_t i = 0; i < supports.size(); ++i) write_supports_row(out, first_frame + static_cast<long>(i), supports[i]);
}

std::string simulate_lake(const SimulateOptions& o) {
  // Synthetic stand-in for a 72x90 water background with a moving block foreground.
  MotionBlockConfig mc;
  mc.seed = o.seed;
  const long t_train = 1420;
  const long post = o.post_frames.value_or(80);
  const long total = t_train + post;
  const Index n = mc.image_rows * mc.image_cols;

  LowRankConfig lc;
  lc.n = n;
  lc.t_train = t_train;
  lc.t_1 = t_train + 5;
  lc.total_frames = total;
  lc.seed = o.seed;
  const LowRankData low = gen_lowrank_ar(lc);
  const FrameSequence background = (low.l.array() + 128.0).matrix();

  // Foreground only after training.
  const ForegroundData fg = gen_motion_foreground(mc, post);
  FrameSequence f = FrameSequence::Zero(n, total);
  f.rightCols(post) = fg.f;
  std::vector<SupportSet> supports(static_cast<std::size_t>(t_train));
  supports.insert(supports.end(), fg.supports.begin(), fg.supports.end());
  const OverlayData ov = overlay(background, f, supports, t_train);
  const FrameSequence m = ov.im.colwise() - ov.mu;

  fs::create_directories(o.out_dir);
  write_sequence(o.out_dir / "training.seq", m.leftCols(t_train));
  write_sequence(o.out_dir / "input.seq", m.rightCols(post));
  write_sequence(o.out_dir / "L_true.seq", (background.colwise() - ov.mu).rightCols(post));
  write_sequence(o.out_dir / "S_true.seq", ov.s.rightCols(post));
  write_sequence(o.out_dir / "mu.seq", Matrix(ov.mu));
  write_supports(o.out_dir / "supports.csv",
                 std::vector<SupportSet>(supports.begin() + t_train, supports.end()), t_train + 1);

  Scenario sc;
  sc.params.b_percent = 95.0;
  sc.params.q = 1.0;
  write_run_config(o.out_dir / "run.cfg", sc);

  Manifest man;
  man["scenario"] = kLakePreset;
  man["seed"] = std::to_string(o.seed);
  man["image_rows"] = std::to_string(mc.image_rows);
  man["image_cols"] = std::to_string(mc.image_cols);
  man["n"] = std::to_string(n);
  man["t_train"] = std::to_string(t_train);
  man["t_1"] = std::to_string(lc.t_1);
  man["post_frames"] = std::to_string(post);
  man["block_rows"] = std::to_string(mc.block_rows);
  man["block_cols"] = std::to_string(mc.block_cols);
  man["intensity_lo"] = format_double(mc.intensity_lo);
  man["intensity_hi"] = format_double(mc.intensity_hi);
  man["p0"] = format_double(mc.p0);
  man["v0"] = format_double(mc.v0);
  man["q_acc"] = format_double(mc.q_acc);
  man["b_percent"] = "95";
  man["q"] = "1";
  man["files"] = "training.seq input.seq L_true.seq S_true.seq mu.seq supports.csv run.cfg";
  write_manifest(o.out_dir / "manifest.txt", man);
  return std::string(kLakePreset) + ": n=" + std::to_string(n) + " t_train=" + std::to_string(t_train) +
         " frames=" + std::to_string(post);
}

}  // namespace

void write_supports_header(std::ostream& os) { os << "frame,size,indices\n"; }

void write_supports_row(std::ostream& os, long frame, const SupportSet& t) {
  os << frame << ',' << t.size() << ',';
  bool first = true;
  for (Index i : t) {
    if (!first) os << ' ';
    os << i;
    first = false;
  }
  os << '\n';
}

std::vector<SupportSet> read_supports_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "frame,size,indices") throw FormatError(path.string() + ": bad header");
  std::vector<SupportSet> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw FormatError(path.string() + ": malformed row '" + line + "'");
    std::istringstream idx(line.substr(c2 + 1));
    std::vector<Index> v;
    long long x = 0;
    while (idx >> x) {
      if (x < 0) throw FormatError(path.string() + ": negative index");
      v.push_back(static_cast<Index>(x));
    }
    if (!idx.eof()) throw FormatError(path.string() + ": malformed indices '" + line + "'");
    SupportSet t(std::move(v));
    if (std::to_string(t.size()) != line.substr(c1 + 1, c2 - c1 - 1)) {
      throw FormatError(path.string() + ": size column disagrees with indices");
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<std::string> scenario_names() {
  return {"table1-9-large", "table1-9-small", "table1-27-large", "table1-27-small",
          "table1-9-large-compressive", "table1-9-large-rpca", kLakePreset};
}

Scenario scenario_preset(const std::string& name) {
  for (Index len : {Index(9), Index(27)}) {
    for (double mag : {100.0, 10.0}) {
      Scenario sc = table1_case(len, mag);
      if (name == sc.name) return sc;
    }
  }
  if (name == "table1-9-large-compressive") {
    Scenario sc = table1_case(9, 100.0);
    sc.name = name;
    sc.compressive = true;
    return sc;
  }
  if (name == "table1-9-large-rpca") {
    Scenario sc = table1_case(9, 100.0);
    sc.name = name;
    sc.update = SubspaceUpdate::RecursivePCA;
    return sc;
  }
  throw UsageError("unknown scenario '" + name + "'");
}

std::string cmd_train(const TrainOptions& o) {
  RunConfig cfg;
  if (o.config) cfg = read_run_config(*o.config);
  if (o.b_percent) cfg.params.b_percent = *o.b_percent;
  if (o.alpha) cfg.params.alpha = *o.alpha;
  try {
    cfg.params.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  FrameSequence training = read_sequence(o.input);
  if (training.cols() < 1 || training.rows() < 1) throw FormatError(o.input.string() + ": empty training sequence");
  Vector mu;
  if (o.center) {
    mu = training.rowwise().mean();
    training.colwise() -= mu;
  }
  const EngineState st = init_engine(training, cfg.params);
  save_checkpoint(st, o.out);
  if (o.center) write_sequence(o.out / "mu.seq", Matrix(mu));
  std::ostringstream msg;
  msg << "trained: n=" << st.frame_dim() << " t_train=" << st.t_train << " r_hat=" << st.r_hat
      << " sigma_min=" << format_double(st.sigma_min);
  return msg.str();
}

std::string cmd_separate(const SeparateOptions& o) {
  EngineState st = load_checkpoint(o.ckpt);
  std::optional<Vector> mu;
  if (fs::exists(o.ckpt / "mu.seq")) {
    const Matrix m = read_sequence(o.ckpt / "mu.seq");
    if (m.cols() != 1 || m.rows() != st.frame_dim()) throw FormatError("mu.seq dimension mismatch");
    mu = m.col(0);
  }

  RunConfig cfg;
  cfg.params = st.params;
  if (o.config) {
    cfg = read_run_config(*o.config, cfg);
    if (cfg.params.alpha != st.params.alpha || cfg.params.b_percent != st.params.b_percent) {
      throw UsageError("alpha and b_percent are fixed by the checkpoint");
    }
    st.params = cfg.params;
  }
  if (o.mode) cfg.mode = parse_run_mode(*o.mode);

  const bool fresh = st.t == st.t_train;
  if (cfg.mode == RunMode::RPCA) {
    if (fresh) select_update(st, SubspaceUpdate::RecursivePCA);
    else if (st.update != SubspaceUpdate::RecursivePCA) throw UsageError("checkpoint was run with ppca");
  } else if (st.update != SubspaceUpdate::ProjectionPCA) {
    if (!fresh) throw UsageError("checkpoint was run with rpca");
    select_update(st, SubspaceUpdate::ProjectionPCA);
  }
  if (cfg.mode == RunMode::Compressive) {
    if (!st.compressive()) {
      if (!o.op) throw UsageError("compressive mode requires --operator");
      Matrix a = read_sequence(*o.op);
      if (a.rows() != st.frame_dim()) {
        throw UsageError("operator has " + std::to_string(a.rows()) + " rows, checkpoint expects " +
                         std::to_string(st.frame_dim()));
      }
      set_compressive(st, std::move(a));
    }
  } else if (st.compressive()) {
    throw UsageError("checkpoint is compressive; use --mode compressive");
  }

  SequenceReader reader(o.input);
  if (reader.rows() != st.frame_dim()) {
    throw UsageError("input has " + std::to_string(reader.rows()) + " rows, checkpoint expects " +
                     std::to_string(st.frame_dim()));
  }
  fs::create_directories(o.out_dir);
  SequenceWriter s_out(o.out_dir / "S_hat.seq", st.signal_dim());
  SequenceWriter l_out(o.out_dir / "L_hat.seq", st.frame_dim());
  auto supports = open_text(o.out_dir / "supports.csv");
  auto metrics = open_text(o.out_dir / "metrics.csv");
  write_supports_header(supports);
  metrics << "frame,xi,rank,phase,event,weighted,solver_converged,support_size\n";
  metrics.precision(17);

  Vector frame;
  long unconverged = 0;
  while (reader.next(frame)) {
    if (mu) frame -= *mu;
    const FrameResult r = process_frame(st, frame);
    // Each result is on disk before the next frame is read.
    s_out.append(r.s_hat);
    l_out.append(r.l_hat);
    write_supports_row(supports, r.t, r.t_hat);
    metrics << r.t << ',' << r.xi << ',' << r.rank << ',' << (r.phase_snapshot == Phase::Detect ? "detect" : "ppca")
            << ',' << event_name(r.event) << ',' << (r.weighted ? 1 : 0) << ',' << (r.solver_converged ? 1 : 0) << ','
            << r.t_hat.size() << '\n';
    supports.flush();
    metrics.flush();
    if (!r.solver_converged) ++unconverged;
  }
  s_out.close();
  l_out.close();
  if (o.save_ckpt) save_checkpoint(st, *o.save_ckpt);
  std::ostringstream msg;
  msg << "separated " << reader.frames() << " frames; rank=" << st.p_hat.rank() << " changes=" << st.j
      << " unconverged_solves=" << unconverged;
  return msg.str();
}

std::string cmd_simulate(const SimulateOptions& o) {
  if (o.post_frames && *o.post_frames < 1) throw UsageError("--frames must be positive");
  if (o.scenario == kLakePreset) return simulate_lake(o);
  Scenario sc = scenario_preset(o.scenario);
  if (o.post_frames) sc.post_frames = *o.post_frames;
  const ScenarioData d = generate_scenario(sc, o.seed);

  fs::create_directories(o.out_dir);
  write_sequence(o.out_dir / "training.seq", d.training);
  write_sequence(o.out_dir / "input.seq", d.m);
  write_sequence(o.out_dir / "L_true.seq", d.l);
  write_sequence(o.out_dir / "S_true.seq", d.s);
  write_sequence(o.out_dir / "P_true.seq", d.p1.matrix());
  if (d.a) write_sequence(o.out_dir / "operator.seq", *d.a);
  write_supports(o.out_dir / "supports.csv", d.supports, d.t_train + 1);
  write_run_config(o.out_dir / "run.cfg", sc);

  Manifest man;
  man["scenario"] = sc.name;
  man["seed"] = std::to_string(o.seed);
  man["n"] = std::to_string(sc.n);
  man["r0"] = std::to_string(sc.r0);
  man["c_new"] = std::to_string(sc.c_new);
  man["t_train"] = std::to_string(sc.t_train);
  man["t_1"] = std::to_string(d.t_1);
  man["post_frames"] = std::to_string(sc.post_frames);
  man["block_len"] = std::to_string(sc.block_len);
  man["magnitude"] = format_double(sc.magnitude);
  man["q"] = format_double(sc.params.q);
  man["b_percent"] = format_double(sc.params.b_percent);
  man["alpha"] = std::to_string(sc.params.alpha);
  man["kmin"] = std::to_string(sc.params.k_min);
  man["kmax"] = std::to_string(sc.params.k_max);
  man["compressive"] = sc.compressive ? "1" : "0";
  if (d.a) man["measurements"] = std::to_string(d.a->rows());
  man["files"] = std::string("training.seq input.seq L_true.seq S_true.seq P_true.seq supports.csv run.cfg") +
                 (d.a ? " operator.seq" : "");
  write_manifest(o.out_dir / "manifest.txt", man);
  return sc.name + ": n=" + std::to_string(sc.n) + " t_train=" + std::to_string(sc.t_train) +
         " frames=" + std::to_string(sc.post_frames);
}

std::string cmd_verify(const VerifyOptions& o) {
  const FrameSequence l = read_sequence(o.input);
  if (o.tau < 1) throw UsageError("--tau must be >= 1");
  if (!(o.b_percent > 0.0 && o.b_percent <= 100.0)) throw UsageError("--b must lie in (0, 100]");
  if (l.cols() < 2 * o.tau) throw UsageError("need at least 2 tau frames");
  fs::create_directories(o.out_dir);
  std::ostringstream msg;

  const MetricReport change = verify_slow_subspace_change(l, o.tau, o.b_percent);
  {
    auto out = open_text(o.out_dir / "subspace_change.csv");
    write_report_csv(out, {change}, o.tau + 1);
  }
  msg << "subspace_change mean=" << format_double(change.aggregate);

  if (o.supports) {
    const std::vector<SupportSet> supports = read_supports_csv(*o.supports);
    for (const auto& t : supports) {
      if (t.bound() > l.rows()) throw UsageError("support index exceeds sequence dimension");
    }
    if (supports.size() >= 2) {
      const SupportDynamics d = verify_support_dynamics(supports, l.rows());
      auto out = open_text(o.out_dir / "support_dynamics.csv");
      write_report_csv(out, {d.size, d.added, d.removed}, 2);
      msg << " support_size mean=" << format_double(d.size.aggregate);
    }
    if (o.basis) {
      const Matrix q = read_sequence(*o.basis);
      if (q.rows() != l.rows()) throw UsageError("basis dimension mismatch");
      BasisMatrix p = BasisMatrix::from_orthonormal(q);
      if (!(p.orthonormality_drift() <= 1e-8)) throw FormatError("basis columns are not orthonormal");
      const MetricReport dense = verify_denseness(p, supports);
      auto out = open_text(o.out_dir / "denseness.csv");
      write_report_csv(out, {dense}, 1);
      msg << " denseness max=" << format_double(dense.aggregate);
    }
  } else if (o.basis) {
    throw UsageError("--basis requires --supports");
  }
  return msg.str();
}

std::string cmd_bench(const BenchOptions& o) {
  if (o.realizations < 1) throw UsageError("--realizations must be >= 1");
  if (o.cases.empty()) throw UsageError("no benchmark case given");
  std::vector<BenchmarkRow> rows;
  for (const auto& name : o.cases) {
    if (name == kLakePreset) throw UsageError("bench supports the table1 scenarios only");
    Scenario sc = scenario_preset(name);
    if (o.post_frames) {
      if (*o.post_frames < 1) throw UsageError("--frames must be positive");
      sc.post_frames = *o.post_frames;
    }
    rows.push_back(run_benchmark(sc, o.realizations, o.seed, o.threads));
  }
  {
    auto out = open_text(o.out);
    write_benchmark_csv(out, rows);
  }
  if (o.realizations_out) {
    auto out = open_text(*o.realizations_out);
    bool first = true;
    for (const auto& r : rows) {
      std::ostringstream block;
      write_realizations_csv(block, r);
      std::string text = block.str();
      if (!first) text = text.substr(text.find('\n') + 1);  // one header for the file
      // prefix each row with the scenario name
      std::istringstream lines(text);
      std::string line;
      bool header = first;
      while (std::getline(lines, line)) {
        out << (header ? "scenario" : r.scenario) << ',' << line << '\n';
        header = false;
      }
      first = false;
    }
  }
  std::ostringstream msg;
  for (const auto& r : rows) {
    msg << r.scenario << ": nmse=" << format_double(r.nmse) << " exact_support_rate=" << r.exact_support_rate
        << " realizations=" << r.realizations << '\n';
  }
  std::string s = msg.str();
  if (!s.empty()) s.pop_back();
  return s;
}

std::string cmd_ingest(const IngestOptions& o) {
  const IngestedFrames f = ingest_pgm_dir(o.dir);
  write_sequence(o.out, f.frames);
  return "ingested " + std::to_string(f.frames.cols()) + " frames of " + std::to_string(f.rows) + "x" +
         std::to_string(f.cols);
}

}  // namespace reprocs::cli
