#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>

#include "reprocs/datagen.hpp"
#include "reprocs/error.hpp"
#include "reprocs/eval.hpp"
#include "reprocs/io.hpp"
#include "testing.hpp"

namespace reprocs {
namespace {

namespace fs = std::filesystem;
using testing::Gen;
using testing::throws_with;

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("reprocs_io_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path dir_;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

// ---- sequence files ----

using SequenceFile = TempDir;

TEST_F(SequenceFile, RoundTripIsBitwise) {
  Gen g(1);
  Matrix f = g.gaussian(7, 5);
  f(0, 0) = std::numeric_limits<double>::denorm_min();
  f(1, 1) = -0.0;
  f(2, 2) = std::numeric_limits<double>::max();
  write_sequence(path("a.bin"), f);
  const Matrix back = read_sequence(path("a.bin"));
  ASSERT_EQ(back.rows(), 7);
  ASSERT_EQ(back.cols(), 5);
  EXPECT_EQ(std::memcmp(back.data(), f.data(), sizeof(double) * 35), 0);
  EXPECT_EQ(fs::file_size(path("a.bin")), kSequenceHeaderBytes + 8 * 35);
}

TEST_F(SequenceFile, HeaderLayout) {
  write_sequence(path("h.bin"), Matrix::Constant(2, 3, 1.0));
  const std::string b = slurp(path("h.bin"));
  EXPECT_EQ(b.substr(0, 4), "RPCS");
  std::uint32_t version;
  std::uint64_t n, t;
  std::memcpy(&version, b.data() + 4, 4);
  std::memcpy(&n, b.data() + 8, 8);
  std::memcpy(&t, b.data() + 16, 8);
  EXPECT_EQ(version, 1u);
  EXPECT_EQ(n, 2u);
  EXPECT_EQ(t, 3u);
}

TEST_F(SequenceFile, PropertyRoundTrip) {
  testing::for_all(30, 2, [&](Gen& g) {
    const Matrix f = g.gaussian(g.uniform_int(1, 20), g.uniform_int(0, 20)) * g.uniform(1e-6, 1e6);
    write_sequence(path("p.bin"), f);
    const Matrix back = read_sequence(path("p.bin"));
    ASSERT_EQ(back.rows(), f.rows());
    ASSERT_EQ(back.cols(), f.cols());
    EXPECT_TRUE(back == f);
  });
}

TEST_F(SequenceFile, TruncatedPayload) {
  write_sequence(path("t.bin"), Matrix::Ones(3, 4));
  std::string b = slurp(path("t.bin"));
  b.resize(b.size() - 8);
  spit(path("t.bin"), b);
  EXPECT_TRUE(throws_with<FormatError>([&] { read_sequence(path("t.bin")); }, "payload length mismatch"));
  EXPECT_TRUE(throws_with<FormatError>([&] { SequenceReader r(path("t.bin")); }, "payload length mismatch"));
}

TEST_F(SequenceFile, TrailingBytes) {
  write_sequence(path("x.bin"), Matrix::Ones(3, 4));
  spit(path("x.bin"), slurp(path("x.bin")) + "junk");
  EXPECT_TRUE(throws_with<FormatError>([&] { read_sequence(path("x.bin")); }, "payload length mismatch"));
}

TEST_F(SequenceFile, BadMagicAndVersion) {
  write_sequence(path("m.bin"), Matrix::Ones(2, 2));
  std::string b = slurp(path("m.bin"));
  std::string bad_magic = b;
  bad_magic[0] = 'X';
  spit(path("m.bin"), bad_magic);
  EXPECT_TRUE(throws_with<FormatError>([&] { read_sequence(path("m.bin")); }, "bad magic"));
  std::string bad_version = b;
  bad_version[4] = 2;
  spit(path("m.bin"), bad_version);
  EXPECT_TRUE(throws_with<FormatError>([&] { read_sequence(path("m.bin")); }, "unsupported version"));
  spit(path("m.bin"), b.substr(0, 10));
  EXPECT_TRUE(throws_with<FormatError>([&] { read_sequence(path("m.bin")); }, "truncated header"));
  EXPECT_THROW(read_sequence(path("missing.bin")), FormatError);
}

TEST_F(SequenceFile, StreamingWriterAndReader) {
  Gen g(3);
  const Matrix f = g.gaussian(6, 9);
  {
    SequenceWriter w(path("s.bin"), 6);
    for (Index c = 0; c < f.cols(); ++c) w.append(f.col(c));
    EXPECT_EQ(w.frames(), 9);
    EXPECT_THROW(w.append(Vector::Zero(5)), std::invalid_argument);
    w.close();
    EXPECT_THROW(w.append(f.col(0)), std::logic_error);
  }
  EXPECT_TRUE(read_sequence(path("s.bin")) == f);
  SequenceReader r(path("s.bin"));
  EXPECT_EQ(r.rows(), 6);
  EXPECT_EQ(r.frames(), 9);
  Vector v;
  Index c = 0;
  while (r.next(v)) {
    EXPECT_TRUE(v == f.col(c));
    ++c;
  }
  EXPECT_EQ(c, 9);
}

TEST_F(SequenceFile, WriterPatchesCountOnDestruction) {
  {
    SequenceWriter w(path("d.bin"), 2);
    w.append(Vector::Ones(2));
    w.append(Vector::Zero(2));
  }
  EXPECT_EQ(read_sequence(path("d.bin")).cols(), 2);
}

// ---- PGM ----

using Pgm = TempDir;

TEST_F(Pgm, ReadsRowMajorRaster) {
  spit(path("a.pgm"), std::string("P5\n# comment\n2 2\n255\n") + std::string("\x00\xff\x00\xff", 4));
  const PgmImage img = read_pgm(path("a.pgm"));
  EXPECT_EQ(img.rows, 2);
  EXPECT_EQ(img.cols, 2);
  EXPECT_EQ(img.pixels, (Vector(4) << 0, 255, 0, 255).finished());
}

TEST_F(Pgm, WriteReadRoundTrip) {
  const Vector px = (Vector(6) << 0, 12.4, 12.6, 255, 300, -3).finished();
  write_pgm(path("w.pgm"), 2, 3, px);
  const PgmImage img = read_pgm(path("w.pgm"));
  EXPECT_EQ(img.rows, 2);
  EXPECT_EQ(img.cols, 3);
  EXPECT_EQ(img.pixels, (Vector(6) << 0, 12, 13, 255, 255, 0).finished());
}

TEST_F(Pgm, Malformed) {
  spit(path("p2.pgm"), "P2\n2 2\n255\n0 1 2 3\n");
  EXPECT_TRUE(throws_with<FormatError>([&] { read_pgm(path("p2.pgm")); }, "P5"));
  spit(path("mv.pgm"), std::string("P5\n1 1\n65535\n") + std::string(2, '\0'));
  EXPECT_TRUE(throws_with<FormatError>([&] { read_pgm(path("mv.pgm")); }, "maxval"));
  spit(path("short.pgm"), std::string("P5\n2 2\n255\n") + std::string(3, '\0'));
  EXPECT_TRUE(throws_with<FormatError>([&] { read_pgm(path("short.pgm")); }, "length mismatch"));
}

TEST_F(Pgm, IngestDirectory) {
  fs::create_directories(path("frames"));
  for (int i = 0; i < 3; ++i) write_pgm(path("frames") / ("f" + std::to_string(i) + ".pgm"), 2, 2, Vector::Constant(4, 7));
  spit(path("frames") / "notes.txt", "ignored");
  const auto in = ingest_pgm_dir(path("frames"));
  EXPECT_EQ(in.rows, 2);
  EXPECT_EQ(in.cols, 2);
  EXPECT_TRUE(in.frames == Matrix::Constant(4, 3, 7));
}

TEST_F(Pgm, IngestOrderIsLexicographic) {
  fs::create_directories(path("frames"));
  write_pgm(path("frames") / "b.pgm", 1, 1, Vector::Constant(1, 2));
  write_pgm(path("frames") / "a.pgm", 1, 1, Vector::Constant(1, 1));
  write_pgm(path("frames") / "c.pgm", 1, 1, Vector::Constant(1, 3));
  EXPECT_EQ(ingest_pgm_dir(path("frames")).frames, (Matrix(1, 3) << 1, 2, 3).finished());
}

TEST_F(Pgm, IngestErrors) {
  fs::create_directories(path("empty"));
  EXPECT_TRUE(throws_with<FormatError>([&] { ingest_pgm_dir(path("empty")); }, "no PGM frames"));
  fs::create_directories(path("mixed"));
  write_pgm(path("mixed") / "a.pgm", 2, 2, Vector::Zero(4));
  write_pgm(path("mixed") / "b.pgm", 1, 4, Vector::Zero(4));
  EXPECT_TRUE(throws_with<FormatError>([&] { ingest_pgm_dir(path("mixed")); }, "dimensions differ"));
  EXPECT_THROW(ingest_pgm_dir(path("nope")), FormatError);
}

// ---- manifest and config ----

TEST(Manifest, ParseAndErrors) {
  const Manifest m = parse_manifest("# header\na=1\n\nb = two words\n");
  EXPECT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at("a"), "1");
  EXPECT_TRUE(throws_with<FormatError>([] { parse_manifest("a=1\na=2\n"); }, "duplicate key: a"));
  EXPECT_TRUE(throws_with<FormatError>([] { parse_manifest("novalue\n"); }, "expected key=value"));
}

using ManifestFile = TempDir;

TEST_F(ManifestFile, RoundTrip) {
  const Manifest m{{"alpha", "20"}, {"nmse", format_double(1.0 / 7.0)}};
  write_manifest(path("m.txt"), m);
  EXPECT_EQ(read_manifest(path("m.txt")), m);
  EXPECT_EQ(slurp(path("m.txt")).find('\r'), std::string::npos);
}

TEST(FormatDouble, RoundTripProperty) {
  testing::for_all(500, 4, [](Gen& g) {
    const double x = g.normal() * std::pow(10.0, g.uniform_int(-300, 300));
    EXPECT_EQ(std::stod(format_double(x)), x);
  });
  EXPECT_EQ(std::stod(format_double(0.1)), 0.1);
}

TEST(RunConfig, ParsesKnownKeys) {
  const RunConfig c = parse_run_config(
      "mode=rpca\nalpha=30\nkmin=4\nkmax=12\nb_percent=99\nq=0.5\nthreshold=noise\nseed=9\n"
      "solver_max_iters=123\ninput=in.bin\nout_dir=out\n");
  EXPECT_EQ(c.mode, RunMode::RPCA);
  EXPECT_EQ(c.params.alpha, 30);
  EXPECT_EQ(c.params.k_min, 4);
  EXPECT_EQ(c.params.k_max, 12);
  EXPECT_EQ(c.params.b_percent, 99.0);
  EXPECT_EQ(c.params.q, 0.5);
  EXPECT_EQ(c.params.threshold_rule, ThresholdRule::NoiseInfNorm);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.params.solver.max_iters, 123);
  EXPECT_EQ(c.input, "in.bin");
  EXPECT_EQ(c.out_dir, "out");
  EXPECT_FALSE(c.ckpt.has_value());
  EXPECT_EQ(c.given.size(), 11u);
}

TEST(RunConfig, KeepsBaseForMissingKeys) {
  RunConfig base;
  base.params.alpha = 40;
  const RunConfig c = parse_run_config("q=2\n", base);
  EXPECT_EQ(c.params.alpha, 40);
  EXPECT_EQ(c.params.q, 2.0);
}

TEST(RunConfig, Errors) {
  EXPECT_TRUE(throws_with<FormatError>([] { parse_run_config("bogus=1\n"); }, "unknown config key"));
  EXPECT_TRUE(throws_with<FormatError>([] { parse_run_config("alpha=ten\n"); }, "invalid integer"));
  EXPECT_TRUE(throws_with<FormatError>([] { parse_run_config("seed=-1\n"); }, "invalid unsigned"));
  EXPECT_TRUE(throws_with<FormatError>([] { parse_run_config("q=1x\n"); }, "invalid number"));
  EXPECT_TRUE(throws_with<FormatError>([] { parse_run_config("mode=fast\n"); }, "unknown mode"));
  EXPECT_TRUE(throws_with<FormatError>([] { parse_run_config("alpha=0\n"); }, "invalid config"));
}

TEST(RunConfig, ModeNames) {
  for (RunMode m : {RunMode::PPCA, RunMode::RPCA, RunMode::Compressive}) EXPECT_EQ(parse_run_mode(to_string(m)), m);
}

// ---- checkpoints ----

using Checkpoint = TempDir;

void expect_same_state(const EngineState& a, const EngineState& b) {
  EXPECT_EQ(a.update, b.update);
  EXPECT_TRUE(a.p_hat.matrix() == b.p_hat.matrix());
  EXPECT_TRUE(a.p_prev_final.matrix() == b.p_prev_final.matrix());
  EXPECT_TRUE(a.sigma_hat.values() == b.sigma_hat.values());
  EXPECT_EQ(a.sigma_min, b.sigma_min);
  EXPECT_EQ(a.r_hat, b.r_hat);
  EXPECT_EQ(a.phase, b.phase);
  EXPECT_EQ(a.j, b.j);
  EXPECT_EQ(a.k, b.k);
  EXPECT_EQ(a.t, b.t);
  EXPECT_EQ(a.t_train, b.t_train);
  EXPECT_EQ(a.t_hat_j, b.t_hat_j);
  ASSERT_EQ(a.buffer.size(), b.buffer.size());
  for (std::size_t i = 0; i < a.buffer.size(); ++i) EXPECT_TRUE(a.buffer[i] == b.buffer[i]);
  ASSERT_EQ(a.new_history.size(), b.new_history.size());
  for (std::size_t i = 0; i < a.new_history.size(); ++i) EXPECT_TRUE(a.new_history[i].matrix() == b.new_history[i].matrix());
  EXPECT_EQ(a.t_prev1, b.t_prev1);
  EXPECT_EQ(a.t_prev2, b.t_prev2);
  EXPECT_TRUE(a.l_prev == b.l_prev);
  EXPECT_TRUE(a.p_tmp.matrix() == b.p_tmp.matrix());
  EXPECT_EQ(a.d, b.d);
  EXPECT_EQ(a.params.alpha, b.params.alpha);
  EXPECT_EQ(a.params.b_percent, b.params.b_percent);
  EXPECT_EQ(a.params.q, b.params.q);
  EXPECT_EQ(a.params.solver.rel_tol, b.params.solver.rel_tol);
}

TEST_F(Checkpoint, SaveLoadMidPpca) {
  Scenario sc = table1_case(9, 100);
  sc.post_frames = 30;
  const auto d = generate_scenario(sc, 8);
  EngineState st = init_engine(d.training, sc.params);
  for (Index c = 0; c < 30; ++c) process_frame(st, d.m.col(c));
  ASSERT_EQ(st.phase, Phase::PPCA);
  save_checkpoint(st, path("ck"));
  expect_same_state(st, load_checkpoint(path("ck")));
}

TEST_F(Checkpoint, MissingOrCorrupt) {
  EXPECT_THROW(load_checkpoint(path("none")), FormatError);
  const EngineState st = init_engine(Vector::Unit(4, 0).replicate(1, 10), EngineParams{});
  save_checkpoint(st, path("ck"));
  Manifest m = read_manifest(path("ck") / "manifest.txt");
  m["version"] = "7";
  write_manifest(path("ck") / "manifest.txt", m);
  EXPECT_TRUE(throws_with<FormatError>([&] { load_checkpoint(path("ck")); }, "unsupported checkpoint version"));
}

}  // namespace
}  // namespace reprocs
