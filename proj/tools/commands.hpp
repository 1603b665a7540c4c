#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "reprocs/error.hpp"
#include "reprocs/eval.hpp"
#include "reprocs/io.hpp"
#include "reprocs/support.hpp"

namespace reprocs::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kInternal = 1, kUsage = 2 };

// Usage or input-format problem reported with exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

struct TrainOptions {
  fs::path input;
  fs::path out;
  std::optional<fs::path> config;
  std::optional<double> b_percent;
  std::optional<int> alpha;
  bool center = false;  // subtract the training mean and store it with the checkpoint
};

struct SeparateOptions {
  fs::path ckpt;
  fs::path input;
  fs::path out_dir;
  std::optional<std::string> mode;
  std::optional<fs::path> op;
  std::optional<fs::path> config;
  std::optional<fs::path> save_ckpt;
};

struct SimulateOptions {
  std::string scenario;
  std::uint64_t seed = 0;
  fs::path out_dir;
  std::optional<long> post_frames;
};

struct VerifyOptions {
  fs::path input;
  fs::path out_dir;
  Index tau = 725;
  double b_percent = 95.0;
  std::optional<fs::path> supports;
  std::optional<fs::path> basis;
};

struct BenchOptions {
  std::vector<std::string> cases;
  int realizations = 10;
  std::uint64_t seed = 0;
  fs::path out;
  std::optional<fs::path> realizations_out;
  std::optional<long> post_frames;
  int threads = 0;
};

struct IngestOptions {
  fs::path dir;
  fs::path out;
};

// Each returns a summary line for stdout and throws UsageError / FormatError
// on bad input.
std::string cmd_train(const TrainOptions& o);
std::string cmd_separate(const SeparateOptions& o);
std::string cmd_simulate(const SimulateOptions& o);
std::string cmd_verify(const VerifyOptions& o);
std::string cmd_bench(const BenchOptions& o);
std::string cmd_ingest(const IngestOptions& o);

// Scenario presets accepted by simulate and bench.
std::vector<std::string> scenario_names();
Scenario scenario_preset(const std::string& name);

// supports.csv: header "frame,size,indices", indices space-separated.
void write_supports_header(std::ostream& os);
void write_supports_row(std::ostream& os, long frame, const SupportSet& t);
std::vector<SupportSet> read_supports_csv(const fs::path& path);

}  // namespace reprocs::cli
