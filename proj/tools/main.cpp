#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"
#include "reprocs/error.hpp"

namespace cli = reprocs::cli;

int main(int argc, char** argv) {
  CLI::App app{"reprocs: online sparse + low-rank separation of vector sequences"};
  app.require_subcommand(1);

  cli::TrainOptions train;
  auto* c_train = app.add_subcommand("train", "estimate the initial subspace from sparse-free training frames");
  c_train->add_option("--input", train.input, "training sequence (.seq)")->required();
  c_train->add_option("--out", train.out, "checkpoint directory")->required();
  c_train->add_option("--b", train.b_percent, "energy percent kept by the initial basis (default 95)");
  c_train->add_option("--alpha", train.alpha, "frames per subspace update");
  c_train->add_option("--config", train.config, "key=value run configuration");
  c_train->add_flag("--center", train.center, "subtract the training mean (stored with the checkpoint)");

  cli::SeparateOptions sep;
  auto* c_sep = app.add_subcommand("separate", "separate a sequence into sparse and low-rank parts, frame by frame");
  c_sep->add_option("--ckpt", sep.ckpt, "checkpoint directory from train")->required();
  c_sep->add_option("--input", sep.input, "input sequence (.seq)")->required();
  c_sep->add_option("--out-dir", sep.out_dir, "output directory")->required();
  c_sep->add_option("--mode", sep.mode, "ppca | rpca | compressive");
  c_sep->add_option("--operator", sep.op, "measurement matrix (.seq) for compressive mode");
  c_sep->add_option("--config", sep.config, "key=value run configuration");
  c_sep->add_option("--save-ckpt", sep.save_ckpt, "write the final engine state here");

  cli::SimulateOptions sim;
  auto* c_sim = app.add_subcommand("simulate", "generate a simulated scenario with ground truth");
  c_sim->add_option("--scenario", sim.scenario, "preset name")->required()->check(CLI::IsMember(cli::scenario_names()));
  c_sim->add_option("--seed", sim.seed, "random seed");
  c_sim->add_option("--out-dir", sim.out_dir, "output directory")->required();
  c_sim->add_option("--frames", sim.post_frames, "post-training frames");

  cli::VerifyOptions ver;
  auto* c_ver = app.add_subcommand("verify", "model checks: slow subspace change, denseness, support dynamics");
  c_ver->add_option("--input", ver.input, "low-rank sequence (.seq)")->required();
  c_ver->add_option("--out-dir", ver.out_dir, "output directory")->required();
  c_ver->add_option("--tau", ver.tau, "window length")->capture_default_str();
  c_ver->add_option("--b", ver.b_percent, "energy percent for window bases")->capture_default_str();
  c_ver->add_option("--supports", ver.supports, "supports.csv for support dynamics and denseness");
  c_ver->add_option("--basis", ver.basis, "basis (.seq) for the denseness check");

  cli::BenchOptions bench;
  auto* c_bench = app.add_subcommand("bench", "Monte-Carlo benchmark over simulated scenarios");
  c_bench->add_option("--case", bench.cases, "scenario preset (repeatable)")->required();
  c_bench->add_option("--realizations", bench.realizations, "realizations per case")->capture_default_str();
  c_bench->add_option("--seed", bench.seed, "base seed");
  c_bench->add_option("--out", bench.out, "table CSV")->required();
  c_bench->add_option("--realizations-out", bench.realizations_out, "per-realization CSV");
  c_bench->add_option("--frames", bench.post_frames, "post-training frames");
  c_bench->add_option("--threads", bench.threads, "worker threads (also capped by REPROCS_THREADS)");

  cli::IngestOptions ing;
  auto* c_ing = app.add_subcommand("ingest", "convert a directory of binary PGM frames to a sequence file");
  c_ing->add_option("--dir", ing.dir, "directory of .pgm frames")->required();
  c_ing->add_option("--out", ing.out, "output sequence (.seq)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kUsage;
  }

  try {
    std::string msg;
    if (*c_train) msg = cli::cmd_train(train);
    else if (*c_sep) msg = cli::cmd_separate(sep);
    else if (*c_sim) msg = cli::cmd_simulate(sim);
    else if (*c_ver) msg = cli::cmd_verify(ver);
    else if (*c_bench) msg = cli::cmd_bench(bench);
    else if (*c_ing) msg = cli::cmd_ingest(ing);
    std::cout << msg << '\n';
    return cli::kOk;
  } catch (const cli::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kUsage;
  } catch (const reprocs::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::kUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return cli::kInternal;
  }
}
