#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include "reprocs/engine.hpp"
#include "reprocs/types.hpp"

namespace reprocs {

// Binary frame container: "RPCS", u32 version = 1, u64 n, u64 T, then n*T
// little-endian f64 values, column-major (one column per frame).
inline constexpr std::uint32_t kSequenceVersion = 1;
inline constexpr std::size_t kSequenceHeaderBytes = 24;

// Throw FormatError on malformed input.
FrameSequence read_sequence(const std::filesystem::path& path);
void write_sequence(const std::filesystem::path& path, const FrameSequence& frames);

// Appends frames one at a time; the frame count in the header is patched on close().
class SequenceWriter {
 public:
  SequenceWriter(const std::filesystem::path& path, Index n);
  ~SequenceWriter();
  SequenceWriter(const SequenceWriter&) = delete;
  SequenceWriter& operator=(const SequenceWriter&) = delete;

  void append(const Vector& frame);
  void close();
  Index frames() const { return count_; }

 private:
  std::ofstream out_;
  Index n_;
  Index count_ = 0;
  bool closed_ = false;
};

// Reads frames one at a time without loading the payload.
class SequenceReader {
 public:
  explicit SequenceReader(const std::filesystem::path& path);

  Index rows() const { return n_; }
  Index frames() const { return t_; }
  // False once every frame has been read.
  bool next(Vector& frame);

 private:
  std::ifstream in_;
  Index n_ = 0;
  Index t_ = 0;
  Index read_ = 0;
};

struct PgmImage {
  Index rows = 0;
  Index cols = 0;
  Vector pixels;  // row-major raster, values in [0, 255]
};

// Binary PGM (P5) with maxval 255.
PgmImage read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, Index rows, Index cols, const Vector& pixels);

struct IngestedFrames {
  Index rows = 0;
  Index cols = 0;
  FrameSequence frames;
};

// Every *.pgm file of dir in lexicographic order. FormatError on an empty
// directory or mixed dimensions.
IngestedFrames ingest_pgm_dir(const std::filesystem::path& dir);

// Plain-text key=value lines; '#' starts a comment line.
using Manifest = std::map<std::string, std::string>;
Manifest parse_manifest(const std::string& text);
Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

// Round-trip formatting of doubles.
std::string format_double(double x);

enum class RunMode { PPCA, RPCA, Compressive };

struct RunConfig {
  RunMode mode = RunMode::PPCA;
  EngineParams params;
  std::uint64_t seed = 0;
  std::optional<std::string> input;
  std::optional<std::string> ckpt;
  std::optional<std::string> out_dir;
  std::optional<std::string> op;  // measurement matrix file
  // Keys that appeared in the file.
  std::map<std::string, std::string> given;
};

// Recognized keys: mode alpha kmin kmax b_percent q threshold seed solver_max_iters
// solver_rel_tol solver_feas_slack input ckpt out_dir operator. Unknown keys
// and malformed values raise FormatError.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig read_run_config(const std::filesystem::path& path, RunConfig base = {});
RunMode parse_run_mode(const std::string& s);
std::string to_string(RunMode mode);

// Full engine state as a directory of sequence files plus manifest.txt.
void save_checkpoint(const EngineState& state, const std::filesystem::path& dir);
EngineState load_checkpoint(const std::filesystem::path& dir);

}  // namespace reprocs
