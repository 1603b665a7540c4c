#include "reprocs/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <sstream>
#include <vector>

#include "reprocs/error.hpp"

namespace reprocs {
namespace fs = std::filesystem;

static_assert(std::endian::native == std::endian::little, "sequence files assume a little-endian host");
static_assert(sizeof(double) == 8);

namespace {

constexpr char kMagic[4] = {'R', 'P', 'C', 'S'};

void write_header(std::ostream& os, std::uint64_t n, std::uint64_t t) {
  os.write(kMagic, 4);
  const std::uint32_t version = kSequenceVersion;
  os.write(reinterpret_cast<const char*>(&version), 4);
  os.write(reinterpret_cast<const char*>(&n), 8);
  os.write(reinterpret_cast<const char*>(&t), 8);
}

// Validates the header against the file size; leaves the stream at the payload.
std::pair<Index, Index> read_header(std::ifstream& in, const fs::path& path) {
  if (!in) throw FormatError("cannot open " + path.string());
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t n = 0;
  std::uint64_t t = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), 4);
  in.read(reinterpret_cast<char*>(&n), 8);
  in.read(reinterpret_cast<char*>(&t), 8);
  if (!in) throw FormatError(path.string() + ": truncated header");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path.string() + ": bad magic");
  if (version != kSequenceVersion) throw FormatError(path.string() + ": unsupported version " + std::to_string(version));
  constexpr std::uint64_t kMaxEntries = std::uint64_t(1) << 60;
  if (n > kMaxEntries || t > kMaxEntries || (n != 0 && t > kMaxEntries / n / 8)) {
    throw FormatError(path.string() + ": payload length mismatch");
  }
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (ec || size != kSequenceHeaderBytes + 8 * n * t) throw FormatError(path.string() + ": payload length mismatch");
  return {static_cast<Index>(n), static_cast<Index>(t)};
}

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long long parse_int(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw FormatError("invalid integer for " + key + ": '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw FormatError("invalid unsigned integer for " + key + ": '" + v + "'");
  }
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw FormatError("invalid number for " + key + ": '" + v + "'");
  }
}

const std::string& require(const Manifest& m, const std::string& key) {
  const auto it = m.find(key);
  if (it == m.end()) throw FormatError("checkpoint manifest lacks '" + key + "'");
  return it->second;
}

std::string join_support(const SupportSet& s) {
  std::string out;
  for (Index i : s) {
    if (!out.empty()) out += ' ';
    out += std::to_string(i);
  }
  return out;
}

SupportSet split_support(const std::string& key, const std::string& text) {
  std::istringstream ss(text);
  std::vector<Index> idx;
  std::string tok;
  while (ss >> tok) {
    const long long v = parse_int(key, tok);
    if (v < 0) throw FormatError("negative index in " + key);
    idx.push_back(static_cast<Index>(v));
  }
  return SupportSet(std::move(idx));
}

BasisMatrix load_basis(const fs::path& path, Index n) {
  Matrix q = read_sequence(path);
  if (q.rows() != n && !(q.cols() == 0)) throw FormatError(path.string() + ": basis dimension mismatch");
  if (q.cols() == 0) return BasisMatrix(n);
  const BasisMatrix b = BasisMatrix::from_orthonormal(std::move(q));
  if (!(b.orthonormality_drift() <= 1e-8)) throw FormatError(path.string() + ": basis columns are not orthonormal");
  return b;
}

SingularSpectrum load_spectrum(const fs::path& path) {
  const Matrix v = read_sequence(path);
  if (v.cols() > 1) throw FormatError(path.string() + ": spectrum must be a single column");
  try {
    return v.cols() == 0 ? SingularSpectrum() : SingularSpectrum(Vector(v.col(0)));
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_spectrum(const fs::path& path, const SingularSpectrum& s) {
  if (s.empty()) {
    write_sequence(path, Matrix(0, 0));
  } else {
    write_sequence(path, Matrix(s.values()));
  }
}

}  // namespace

FrameSequence read_sequence(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  const auto [n, t] = read_header(in, path);
  FrameSequence m(n, t);
  if (n * t > 0) in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(8 * n * t));
  if (!in) throw FormatError(path.string() + ": payload length mismatch");
  return m;
}

void write_sequence(const fs::path& path, const FrameSequence& frames) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create " + path.string());
  write_header(out, static_cast<std::uint64_t>(frames.rows()), static_cast<std::uint64_t>(frames.cols()));
  out.write(reinterpret_cast<const char*>(frames.data()), static_cast<std::streamsize>(8 * frames.size()));
  if (!out) throw Error("write failed: " + path.string());
}

SequenceWriter::SequenceWriter(const fs::path& path, Index n) : out_(path, std::ios::binary | std::ios::trunc), n_(n) {
  if (!out_) throw Error("cannot create " + path.string());
  write_header(out_, static_cast<std::uint64_t>(n), 0);
}

SequenceWriter::~SequenceWriter() {
  try {
    close();
  } catch (...) {
  }
}

void SequenceWriter::append(const Vector& frame) {
  if (closed_) throw std::logic_error("append after close");
  if (frame.size() != n_) throw std::invalid_argument("frame dimension mismatch");
  out_.write(reinterpret_cast<const char*>(frame.data()), static_cast<std::streamsize>(8 * n_));
  out_.flush();
  if (!out_) throw Error("sequence write failed");
  ++count_;
}

void SequenceWriter::close() {
  if (closed_) return;
  closed_ = true;
  const auto t = static_cast<std::uint64_t>(count_);
  out_.seekp(16);
  out_.write(reinterpret_cast<const char*>(&t), 8);
  out_.close();
  if (!out_) throw Error("sequence write failed");
}

SequenceReader::SequenceReader(const fs::path& path) : in_(path, std::ios::binary) {
  std::tie(n_, t_) = read_header(in_, path);
}

bool SequenceReader::next(Vector& frame) {
  if (read_ >= t_) return false;
  frame.resize(n_);
  in_.read(reinterpret_cast<char*>(frame.data()), static_cast<std::streamsize>(8 * n_));
  if (!in_) throw FormatError("payload length mismatch");
  ++read_;
  return true;
}

PgmImage read_pgm(const fs::path& path) {
  const std::string data = read_text(path);
  std::size_t pos = 0;
  auto token = [&]() -> std::string {
    for (;;) {
      while (pos < data.size() && std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
      if (pos < data.size() && data[pos] == '#') {
        while (pos < data.size() && data[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    const std::size_t start = pos;
    while (pos < data.size() && !std::isspace(static_cast<unsigned char>(data[pos]))) ++pos;
    return data.substr(start, pos - start);
  };
  if (token() != "P5") throw FormatError(path.string() + ": not a binary PGM (P5)");
  const std::string ws = token();
  const std::string hs = token();
  const std::string ms = token();
  PgmImage img;
  const long long w = parse_int("width", ws);
  const long long h = parse_int("height", hs);
  if (w < 1 || h < 1) throw FormatError(path.string() + ": bad dimensions");
  if (ms != "255") throw FormatError(path.string() + ": maxval must be 255");
  ++pos;  // single whitespace after maxval
  img.rows = h;
  img.cols = w;
  const auto count = static_cast<std::size_t>(w * h);
  if (data.size() < pos || data.size() - pos != count) throw FormatError(path.string() + ": pixel data length mismatch");
  img.pixels.resize(static_cast<Index>(count));
  for (std::size_t i = 0; i < count; ++i) img.pixels[static_cast<Index>(i)] = static_cast<unsigned char>(data[pos + i]);
  return img;
}

void write_pgm(const fs::path& path, Index rows, Index cols, const Vector& pixels) {
  if (pixels.size() != rows * cols) throw std::invalid_argument("pixel count mismatch");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create " + path.string());
  out << "P5\n" << cols << ' ' << rows << "\n255\n";
  for (Index i = 0; i < pixels.size(); ++i) {
    const double v = std::clamp(pixels[i], 0.0, 255.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v))));
  }
  if (!out) throw Error("write failed: " + path.string());
}

IngestedFrames ingest_pgm_dir(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw FormatError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw FormatError("no PGM frames in " + dir.string());
  IngestedFrames out;
  for (std::size_t i = 0; i < files.size(); ++i) {
    PgmImage img = read_pgm(files[i]);
    if (i == 0) {
      out.rows = img.rows;
      out.cols = img.cols;
      out.frames.resize(img.rows * img.cols, static_cast<Index>(files.size()));
    } else if (img.rows != out.rows || img.cols != out.cols) {
      throw FormatError(files[i].string() + ": frame dimensions differ from " + files[0].string());
    }
    out.frames.col(static_cast<Index>(i)) = img.pixels;
  }
  return out;
}

Manifest parse_manifest(const std::string& text) {
  Manifest m;
  std::istringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw FormatError("line " + std::to_string(lineno) + ": empty key");
    if (m.count(key)) throw FormatError("duplicate key: " + key);
    m[key] = trim(t.substr(eq + 1));
  }
  return m;
}

Manifest read_manifest(const fs::path& path) { return parse_manifest(read_text(path)); }

void write_manifest(const fs::path& path, const Manifest& m) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot create " + path.string());
  for (const auto& [k, v] : m) out << k << '=' << v << '\n';
  if (!out) throw Error("write failed: " + path.string());
}

std::string format_double(double x) {
  // Shortest of %.15g / %.16g / %.17g that parses back to x.
  char buf[40];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

RunMode parse_run_mode(const std::string& s) {
  if (s == "ppca") return RunMode::PPCA;
  if (s == "rpca") return RunMode::RPCA;
  if (s == "compressive") return RunMode::Compressive;
  throw FormatError("unknown mode '" + s + "' (expected ppca, rpca or compressive)");
}

std::string to_string(RunMode mode) {
  switch (mode) {
    case RunMode::PPCA: return "ppca";
    case RunMode::RPCA: return "rpca";
    case RunMode::Compressive: return "compressive";
  }
  return "ppca";
}

RunConfig parse_run_config(const std::string& text, RunConfig cfg) {
  const Manifest m = parse_manifest(text);
  for (const auto& [key, v] : m) {
    auto& p = cfg.params;
    if (key == "mode") cfg.mode = parse_run_mode(v);
    else if (key == "alpha") p.alpha = static_cast<int>(parse_int(key, v));
    else if (key == "kmin") p.k_min = static_cast<int>(parse_int(key, v));
    else if (key == "kmax") p.k_max = static_cast<int>(parse_int(key, v));
    else if (key == "b_percent") p.b_percent = parse_real(key, v);
    else if (key == "q") p.q = parse_real(key, v);
    else if (key == "threshold") {
      if (v == "energy") p.threshold_rule = ThresholdRule::FrameEnergy;
      else if (v == "noise") p.threshold_rule = ThresholdRule::NoiseInfNorm;
      else throw FormatError("threshold must be energy or noise");
    } else if (key == "seed") cfg.seed = parse_u64(key, v);
    else if (key == "solver_max_iters") p.solver.max_iters = static_cast<int>(parse_int(key, v));
    else if (key == "solver_rel_tol") p.solver.rel_tol = parse_real(key, v);
    else if (key == "solver_feas_slack") p.solver.feas_slack = parse_real(key, v);
    else if (key == "input") cfg.input = v;
    else if (key == "ckpt") cfg.ckpt = v;
    else if (key == "out_dir") cfg.out_dir = v;
    else if (key == "operator") cfg.op = v;
    else throw FormatError("unknown config key: " + key);
    cfg.given[key] = v;
  }
  try {
    cfg.params.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

RunConfig read_run_config(const fs::path& path, RunConfig base) { return parse_run_config(read_text(path), std::move(base)); }

void save_checkpoint(const EngineState& st, const fs::path& dir) {
  fs::create_directories(dir);
  const Index n = st.frame_dim();
  Manifest m;
  m["format"] = "reprocs-checkpoint";
  m["version"] = "1";
  m["n"] = std::to_string(n);
  m["update"] = st.update == SubspaceUpdate::ProjectionPCA ? "ppca" : "rpca";
  m["phase"] = st.phase == Phase::Detect ? "detect" : "ppca";
  m["j"] = std::to_string(st.j);
  m["k"] = std::to_string(st.k);
  m["t"] = std::to_string(st.t);
  m["t_train"] = std::to_string(st.t_train);
  m["t_hat_j"] = std::to_string(st.t_hat_j);
  m["sigma_min"] = format_double(st.sigma_min);
  m["r_hat"] = std::to_string(st.r_hat);
  m["d"] = std::to_string(st.d);
  m["alpha"] = std::to_string(st.params.alpha);
  m["kmin"] = std::to_string(st.params.k_min);
  m["kmax"] = std::to_string(st.params.k_max);
  m["b_percent"] = format_double(st.params.b_percent);
  m["q"] = format_double(st.params.q);
  m["threshold"] = st.params.threshold_rule == ThresholdRule::FrameEnergy ? "energy" : "noise";
  m["solver_max_iters"] = std::to_string(st.params.solver.max_iters);
  m["solver_rel_tol"] = format_double(st.params.solver.rel_tol);
  m["solver_feas_slack"] = format_double(st.params.solver.feas_slack);
  m["t_prev1"] = join_support(st.t_prev1);
  m["t_prev2"] = join_support(st.t_prev2);
  m["new_history"] = std::to_string(st.new_history.size());
  m["compressive"] = st.compressive() ? "1" : "0";

  write_sequence(dir / "p_hat.seq", st.p_hat.matrix());
  write_sequence(dir / "p_prev_final.seq", st.p_prev_final.matrix());
  save_spectrum(dir / "sigma_hat.seq", st.sigma_hat);
  Matrix buf(n, static_cast<Index>(st.buffer.size()));
  for (std::size_t i = 0; i < st.buffer.size(); ++i) buf.col(static_cast<Index>(i)) = st.buffer[i];
  write_sequence(dir / "buffer.seq", buf);
  write_sequence(dir / "l_prev.seq", Matrix(st.l_prev));
  for (std::size_t i = 0; i < st.new_history.size(); ++i) {
    write_sequence(dir / ("p_new_" + std::to_string(i) + ".seq"), st.new_history[i].matrix());
  }
  if (st.update == SubspaceUpdate::RecursivePCA) {
    write_sequence(dir / "p_tmp.seq", st.p_tmp.matrix());
    save_spectrum(dir / "sigma_tmp.seq", st.sigma_tmp);
  }
  if (st.compressive()) write_sequence(dir / "measurement.seq", st.measurement->matrix());
  // Manifest last: its presence marks a complete checkpoint.
  write_manifest(dir / "manifest.txt", m);
}

EngineState load_checkpoint(const fs::path& dir) {
  const Manifest m = read_manifest(dir / "manifest.txt");
  if (require(m, "format") != "reprocs-checkpoint") throw FormatError("not a checkpoint: " + dir.string());
  if (require(m, "version") != "1") throw FormatError("unsupported checkpoint version");

  EngineState st;
  auto& p = st.params;
  p.alpha = static_cast<int>(parse_int("alpha", require(m, "alpha")));
  p.k_min = static_cast<int>(parse_int("kmin", require(m, "kmin")));
  p.k_max = static_cast<int>(parse_int("kmax", require(m, "kmax")));
  p.b_percent = parse_real("b_percent", require(m, "b_percent"));
  p.q = parse_real("q", require(m, "q"));
  const std::string& rule = require(m, "threshold");
  if (rule != "energy" && rule != "noise") throw FormatError("bad threshold rule");
  p.threshold_rule = rule == "energy" ? ThresholdRule::FrameEnergy : ThresholdRule::NoiseInfNorm;
  p.solver.max_iters = static_cast<int>(parse_int("solver_max_iters", require(m, "solver_max_iters")));
  p.solver.rel_tol = parse_real("solver_rel_tol", require(m, "solver_rel_tol"));
  p.solver.feas_slack = parse_real("solver_feas_slack", require(m, "solver_feas_slack"));
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("checkpoint parameters: ") + e.what());
  }

  const Index n = static_cast<Index>(parse_int("n", require(m, "n")));
  if (n < 1) throw FormatError("checkpoint dimension must be positive");
  const std::string& update = require(m, "update");
  if (update != "ppca" && update != "rpca") throw FormatError("bad update mode");
  st.update = update == "ppca" ? SubspaceUpdate::ProjectionPCA : SubspaceUpdate::RecursivePCA;
  const std::string& phase = require(m, "phase");
  if (phase != "detect" && phase != "ppca") throw FormatError("bad phase");
  st.phase = phase == "detect" ? Phase::Detect : Phase::PPCA;
  st.j = static_cast<int>(parse_int("j", require(m, "j")));
  st.k = static_cast<int>(parse_int("k", require(m, "k")));
  st.t = parse_int("t", require(m, "t"));
  st.t_train = parse_int("t_train", require(m, "t_train"));
  st.t_hat_j = parse_int("t_hat_j", require(m, "t_hat_j"));
  st.sigma_min = parse_real("sigma_min", require(m, "sigma_min"));
  st.r_hat = static_cast<Index>(parse_int("r_hat", require(m, "r_hat")));
  st.d = parse_int("d", require(m, "d"));
  st.t_prev1 = split_support("t_prev1", require(m, "t_prev1"));
  st.t_prev2 = split_support("t_prev2", require(m, "t_prev2"));

  st.p_hat = load_basis(dir / "p_hat.seq", n);
  st.p_prev_final = load_basis(dir / "p_prev_final.seq", n);
  st.sigma_hat = load_spectrum(dir / "sigma_hat.seq");
  if (st.sigma_hat.size() != st.r_hat) throw FormatError("training spectrum length differs from r_hat");
  const Matrix buf = read_sequence(dir / "buffer.seq");
  if (buf.cols() > 0 && buf.rows() != n) throw FormatError("buffer dimension mismatch");
  for (Index c = 0; c < buf.cols(); ++c) st.buffer.emplace_back(buf.col(c));
  const Matrix lp = read_sequence(dir / "l_prev.seq");
  if (lp.rows() != n || lp.cols() != 1) throw FormatError("l_prev dimension mismatch");
  st.l_prev = lp.col(0);
  const long hist = parse_int("new_history", require(m, "new_history"));
  if (hist < 0 || hist > 4) throw FormatError("bad new_history count");
  for (long i = 0; i < hist; ++i) st.new_history.push_back(load_basis(dir / ("p_new_" + std::to_string(i) + ".seq"), n));
  if (st.update == SubspaceUpdate::RecursivePCA) {
    st.p_tmp = load_basis(dir / "p_tmp.seq", n);
    st.sigma_tmp = load_spectrum(dir / "sigma_tmp.seq");
    if (st.sigma_tmp.size() != st.p_tmp.rank()) throw FormatError("p_tmp and sigma_tmp disagree");
  }
  if (require(m, "compressive") == "1") {
    Matrix a = read_sequence(dir / "measurement.seq");
    if (a.rows() != n) throw FormatError("measurement operator dimension mismatch");
    st.measurement = std::make_shared<DenseOperator>(std::move(a));
  }
  return st;
}

}  // namespace reprocs
