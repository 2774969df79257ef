// Batch front end: neurosleep <subcommand> [options]. Run with --help for the list.

#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "neurosleep/app/commands.hpp"
#include "neurosleep/app/run_config.hpp"
#include "neurosleep/errors.hpp"

namespace fs = std::filesystem;
using namespace neurosleep;

int main(int argc, char** argv) {
  CLI::App app{"Event-driven EEG sleep staging"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string profile;
  bool dense_input = false, single_branch = false, no_elif = false;
  std::string out;
  app.add_option("--config", config_path, "YAML run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Seed for every random choice");
  app.add_option("--profile", profile, "Model size profile")->check(CLI::IsMember({"desk", "paper_scale"}));
  app.add_flag("--dense-input", dense_input, "Feed z-scored signal instead of events (A1)");
  app.add_flag("--single-branch", single_branch, "Single EAMR branch (A2)");
  app.add_flag("--no-elif", no_elif, "Drop the ELIF state module (A4)");
  app.add_option("--out", out, "Output directory");

  app::SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  c_synth->add_option("--kind", synth.kind)->check(CLI::IsMember({"labeled", "standard", "constant"}));
  c_synth->add_option("--count", synth.count, "Number of recordings");
  c_synth->add_option("--epochs", synth.epochs, "Epochs per labeled recording");
  c_synth->add_option("--duration", synth.duration, "Seconds per standard or constant recording");
  c_synth->add_option("--value", synth.value, "Level of the constant recording");

  fs::path input;
  auto* c_encode = app.add_subcommand("encode", "Encode an NSIG recording into an NEVT event stream");
  c_encode->add_option("signal", input)->required()->check(CLI::ExistingFile);

  std::optional<fs::path> reference;
  auto* c_recon = app.add_subcommand("reconstruct", "Reconstruct a signal from events and score fidelity");
  c_recon->add_option("events", input)->required()->check(CLI::ExistingFile);
  c_recon->add_option("--signal", reference, "Original NSIG for fidelity scoring")->check(CLI::ExistingFile);

  auto* c_epochs = app.add_subcommand("epochs", "Group an event stream into 30 s epochs");
  c_epochs->add_option("events", input)->required()->check(CLI::ExistingFile);

  auto* c_sweep = app.add_subcommand("sweep", "Grid-search encoder operating points over a corpus");
  c_sweep->add_option("corpus", input, "Directory of NSIG files")->required()->check(CLI::ExistingDirectory);

  fs::path checkpoint;
  auto* c_infer = app.add_subcommand("infer", "Predict sleep stages for one recording");
  c_infer->add_option("input", input, "NSIG or NEVT file")->required()->check(CLI::ExistingFile);
  c_infer->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);

  app::TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Subject-independent cross-validated training");
  c_train->add_option("manifest", train.manifest, "CSV with columns signal,labels")
      ->required()
      ->check(CLI::ExistingFile);
  c_train->add_option("--only-fold", train.only_fold, "Train a single fold");

  std::optional<fs::path> ck_opt;
  bool latency = false;
  auto* c_ops = app.add_subcommand("ops", "Parameter, FLOP and effective-operation report");
  c_ops->add_option("input", input, "NSIG or NEVT sample recording")->required()->check(CLI::ExistingFile);
  c_ops->add_option("--checkpoint", ck_opt)->check(CLI::ExistingFile);
  c_ops->add_flag("--latency", latency, "Also time the forward pass");

  int samples = 100, warmup = 5;
  auto* c_bench = app.add_subcommand("bench", "Forward-pass latency");
  c_bench->add_option("--checkpoint", ck_opt)->check(CLI::ExistingFile);
  c_bench->add_option("--samples", samples);
  c_bench->add_option("--warmup", warmup);

  CLI11_PARSE(app, argc, argv);

  try {
    app::Context ctx;
    ctx.config = config_path.empty() ? app::RunConfig{} : app::load_run_config(config_path);
    if (seed) {
      ctx.config.seed = *seed;
      ctx.config.train.seed = *seed;
    }
    if (!profile.empty()) {
      const auto p = net::parse_profile(profile);
      if (p != ctx.config.model.profile) ctx.config.model = net::ModelConfig::for_profile(p);
    }
    ctx.config.ablations.dense_input |= dense_input;
    ctx.config.ablations.single_branch |= single_branch;
    ctx.config.ablations.no_elif |= no_elif;
    ctx.config.validate();
    ctx.out = !out.empty() ? fs::path(out) : ctx.config.out.value_or(fs::path("."));
    ctx.log = &std::cout;

    if (*c_synth) return app::cmd_synth(ctx, synth);
    if (*c_encode) return app::cmd_encode(ctx, input);
    if (*c_recon) return app::cmd_reconstruct(ctx, input, reference);
    if (*c_epochs) return app::cmd_epochs(ctx, input);
    if (*c_sweep) return app::cmd_sweep(ctx, input);
    if (*c_infer) return app::cmd_infer(ctx, input, checkpoint);
    if (*c_train) return app::cmd_train(ctx, train);
    if (*c_ops) return app::cmd_ops(ctx, input, ck_opt, latency);
    if (*c_bench) return app::cmd_bench(ctx, ck_opt, samples, warmup);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return app::kExitError;
  }
  return app::kExitError;
}
