#pragma once

// Subcommand implementations. Each returns the process exit code and throws on errors;
// every output file is a pure function of inputs, configuration and seed (bench excepted).

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

#include "neurosleep/app/run_config.hpp"

namespace neurosleep::app {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitNoFeasiblePoint = 3;

struct Context {
  RunConfig config;
  std::filesystem::path out = ".";
  std::ostream* log = nullptr;
};

struct SynthArgs {
  std::string kind = "labeled";  // labeled | standard | constant
  int count = 10;
  int epochs = 20;         // labeled: epochs per subject
  double duration = 60.0;  // standard, constant: seconds
  double value = 0.0;      // constant level
};

int cmd_synth(const Context& ctx, const SynthArgs& args);
int cmd_encode(const Context& ctx, const std::filesystem::path& signal);
int cmd_reconstruct(const Context& ctx, const std::filesystem::path& events,
                    const std::optional<std::filesystem::path>& signal);
int cmd_epochs(const Context& ctx, const std::filesystem::path& events);
int cmd_sweep(const Context& ctx, const std::filesystem::path& corpus_dir);
int cmd_infer(const Context& ctx, const std::filesystem::path& input, const std::filesystem::path& checkpoint);

struct TrainArgs {
  std::filesystem::path manifest;  // CSV `signal,labels`, paths relative to the manifest
  std::optional<int> only_fold;
};
int cmd_train(const Context& ctx, const TrainArgs& args);

int cmd_ops(const Context& ctx, const std::filesystem::path& input,
            const std::optional<std::filesystem::path>& checkpoint, bool with_latency);
int cmd_bench(const Context& ctx, const std::optional<std::filesystem::path>& checkpoint, int samples, int warmup);

}  // namespace neurosleep::app
