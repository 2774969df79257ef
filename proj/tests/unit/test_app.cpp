#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "neurosleep/app/commands.hpp"
#include "neurosleep/app/run_config.hpp"
#include "neurosleep/binary_io.hpp"
#include "neurosleep/csv.hpp"
#include "neurosleep/efficiency.hpp"
#include "neurosleep/errors.hpp"
#include "neurosleep/operating_point.hpp"

namespace fs = std::filesystem;
using namespace neurosleep;
using namespace neurosleep::app;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("ns_app_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

Context context(const fs::path& out, std::ostream& log, RunConfig cfg = {}) {
  Context c;
  c.config = std::move(cfg);
  c.out = out;
  c.log = &log;
  return c;
}

std::string slurp(const fs::path& p) { return io::read_file(p); }

}  // namespace

TEST_CASE("config defaults and overrides") {
  const auto d = parse_run_config("");
  CHECK(d.encoder.k_slow == 1.6);
  CHECK(d.thresholds.tau_nmse == 0.16);
  CHECK(d.grid.k_values.size() == 10);
  CHECK(d.train.batch_size == 64);
  CHECK(d.cv_folds == 5);
  const auto c = parse_run_config(R"(
seed: 42
encoder: {k_slow: 2.0, k_fast: 0.8}
model: {profile: paper_scale, window_radius: 3}
train: {lr: 0.01, max_epochs: 4, patience: 2}
ablations: {no_elif: true}
)");
  CHECK(c.seed == 42);
  CHECK(c.train.seed == 42);
  CHECK(c.encoder.k_fast == 0.8);
  CHECK(c.model.profile == net::Profile::paper_scale);
  CHECK(c.model.fused_width == 384);
  CHECK(c.model.window_radius == 3);
  CHECK_FALSE(c.effective_model().use_elif);
}

TEST_CASE("config rejects unknown keys and bad values") {
  CHECK_THROWS_WITH_AS(parse_run_config("encoder: {k_slwo: 1}"), doctest::Contains("encoder.k_slwo"), ParameterError);
  CHECK_THROWS_AS(parse_run_config("colour: red"), ParameterError);
  CHECK_THROWS_AS(parse_run_config("train: {lr: fast}"), ParameterError);
  CHECK_THROWS_AS(parse_run_config("encoder: {k_slow: 1.0, k_fast: 1.0}"), ParameterError);
  CHECK_THROWS_AS(parse_run_config("model: {profile: huge}"), ParameterError);
}

TEST_CASE("encode, reconstruct and epochs on a synthetic signal") {
  TempDir dir("encode");
  std::ostringstream log;
  auto ctx = context(dir.path, log);
  SynthArgs sa;
  sa.kind = "standard";
  sa.count = 1;
  sa.duration = 90;
  CHECK(cmd_synth(ctx, sa) == kExitOk);
  const auto sig = dir.path / "C01.nsig";
  CHECK(cmd_encode(ctx, sig) == kExitOk);
  const auto first = slurp(dir.path / "C01.nevt");
  CHECK(cmd_encode(ctx, sig) == kExitOk);
  CHECK(slurp(dir.path / "C01.nevt") == first);
  CHECK(log.str().find("rho_combined=") != std::string::npos);
  CHECK(cmd_reconstruct(ctx, dir.path / "C01.nevt", sig) == kExitOk);
  const auto fid = csv::parse(slurp(dir.path / "C01_fidelity.csv"), "snr_db,nmse,corr");
  REQUIRE(fid.size() == 1);
  CHECK(csv::to_double(fid[0][2]) > 0.5);
  CHECK(cmd_epochs(ctx, dir.path / "C01.nevt") == kExitOk);
  CHECK(csv::parse(slurp(dir.path / "C01_epochs.csv"), kManifestCsvHeader).size() == 3);
}

TEST_CASE("constant signal encodes to nothing") {
  TempDir dir("constant");
  std::ostringstream log;
  auto ctx = context(dir.path, log);
  SynthArgs sa;
  sa.kind = "constant";
  sa.duration = 60;
  sa.value = 12.5;
  cmd_synth(ctx, sa);
  cmd_encode(ctx, dir.path / "constant.nsig");
  CHECK(load_events(dir.path / "constant.nevt").event_count() == 0);
  CHECK(log.str().find("rho_combined=0\n") != std::string::npos);
}

TEST_CASE("sweep writes the table and honours the exit code") {
  TempDir dir("sweep");
  std::ostringstream log;
  auto ctx = context(dir.path / "out", log);
  SynthArgs sa;
  sa.kind = "standard";
  sa.count = 2;
  sa.duration = 30;
  cmd_synth(context(dir.path / "corpus", log), sa);

  ctx.config.grid.k_values = {0.6, 1.6};
  ctx.config.thresholds.tau_snr = -100;
  ctx.config.thresholds.tau_nmse = 1.0;
  ctx.config.thresholds.tau_corr = -0.99;
  CHECK(cmd_sweep(ctx, dir.path / "corpus") == kExitOk);
  const auto sel = csv::parse(slurp(dir.path / "out" / "operating_point.csv"), "status,k_slow,k_fast,rho_combined");
  REQUIRE(sel.size() == 1);
  CHECK(sel[0][1] == "1.6");
  CHECK(sel[0][2] == "0.6");

  ctx.config.thresholds.tau_snr = 299;
  CHECK(cmd_sweep(ctx, dir.path / "corpus") == kExitNoFeasiblePoint);
  CHECK(parse_sweep_table_csv(slurp(dir.path / "out" / "sweep.csv")).size() == 1);

  fs::create_directories(dir.path / "empty");
  CHECK_THROWS_AS(cmd_sweep(ctx, dir.path / "empty"), ParameterError);
}

TEST_CASE("train, infer and ops round trip") {
  TempDir dir("train");
  std::ostringstream log;
  RunConfig cfg;
  cfg.train.max_epochs = 1;
  cfg.train.patience = 1;
  cfg.model.window_radius = 2;
  auto ctx = context(dir.path / "run", log, cfg);
  SynthArgs sa;
  sa.count = 6;
  sa.epochs = 3;
  cmd_synth(context(dir.path / "data", log, cfg), sa);
  TrainArgs ta;
  ta.manifest = dir.path / "data" / "manifest.csv";
  CHECK(cmd_train(ctx, ta) == kExitOk);
  const auto summary = csv::parse(slurp(dir.path / "run" / "summary.csv"), "fold,accuracy,macro_f1,kappa");
  REQUIRE(summary.size() == 6);
  double acc = 0;
  for (int f = 0; f < 5; ++f) {
    acc += csv::to_double(summary[static_cast<std::size_t>(f)][1]);
    CHECK(fs::exists(dir.path / "run" / ("fold" + std::to_string(f)) / "checkpoint.nckp"));
    CHECK(fs::exists(dir.path / "run" / ("fold" + std::to_string(f)) / "confusion.csv"));
  }
  CHECK(summary[5][0] == "mean");
  CHECK(csv::num(acc / 5) == summary[5][1]);
  const auto folds = slurp(dir.path / "run" / "folds.csv");

  // rerun: identical fold assignment and checkpoints
  auto ctx2 = context(dir.path / "run2", log, cfg);
  ta.only_fold = 0;
  cmd_train(ctx2, ta);
  CHECK(slurp(dir.path / "run2" / "folds.csv") == folds);
  CHECK(slurp(dir.path / "run2" / "fold0" / "checkpoint.nckp") ==
        slurp(dir.path / "run" / "fold0" / "checkpoint.nckp"));

  const auto ck = dir.path / "run" / "fold0" / "checkpoint.nckp";
  CHECK(cmd_infer(ctx, dir.path / "data" / "S001.nsig", ck) == kExitOk);
  const auto rows = csv::parse(slurp(dir.path / "run" / "S001_predictions.csv"),
                               "epoch_index,predicted_stage,prob_W,prob_N1,prob_N2,prob_N3,prob_REM");
  REQUIRE(rows.size() == 3);
  for (const auto& r : rows) {
    double s = 0;
    for (std::size_t k = 2; k < 7; ++k) s += csv::to_double(r[k]);
    CHECK(std::abs(s - 1.0) < 1e-6);
  }

  // event-stream input gives the same predictions
  cmd_encode(ctx, dir.path / "data" / "S001.nsig");
  fs::rename(dir.path / "run" / "S001_predictions.csv", dir.path / "run" / "from_signal.csv");
  cmd_infer(ctx, dir.path / "run" / "S001.nevt", ck);
  CHECK(slurp(dir.path / "run" / "S001_predictions.csv") == slurp(dir.path / "run" / "from_signal.csv"));

  // short recording: header only
  SynthArgs shortsig;
  shortsig.kind = "constant";
  shortsig.duration = 20;
  cmd_synth(context(dir.path / "short", log, cfg), shortsig);
  CHECK(cmd_infer(ctx, dir.path / "short" / "constant.nsig", ck) == kExitOk);
  CHECK(slurp(dir.path / "run" / "constant_predictions.csv") ==
        "epoch_index,predicted_stage,prob_W,prob_N1,prob_N2,prob_N3,prob_REM\n");

  // model mismatch
  auto other = cfg;
  other.model.window_radius = 3;
  auto bad = context(dir.path / "run", log, other);
  CHECK_THROWS_AS(cmd_infer(bad, dir.path / "data" / "S001.nsig", ck), FormatError);

  // ops: A4 reports NA, A1 reports insd 1 and effective == total
  auto a4 = cfg;
  a4.ablations.no_elif = true;
  CHECK(cmd_ops(context(dir.path / "a4", log, a4), dir.path / "data" / "S001.nsig", std::nullopt, false) == kExitOk);
  const auto r4 = parse_ops_report_csv(slurp(dir.path / "a4" / "ops.csv"));
  REQUIRE(r4.size() == 1);
  CHECK_FALSE(r4[0].spike_rate.has_value());
  CHECK(slurp(dir.path / "a4" / "ops.csv").find(",NA,NA,NA\n") != std::string::npos);

  auto a1 = cfg;
  a1.ablations.dense_input = true;
  std::ostringstream log1;
  cmd_ops(context(dir.path / "a1", log1, a1), dir.path / "data" / "S001.nsig", std::nullopt, false);
  const auto r1 = parse_ops_report_csv(slurp(dir.path / "a1" / "ops.csv"));
  CHECK(r1[0].insd == 1.0);
  CHECK(r1[0].effective_ops == r1[0].flops_total);
  CHECK(r1[0].spike_rate.has_value());

  const auto r0path = dir.path / "d0";
  cmd_ops(context(r0path, log, cfg), dir.path / "data" / "S001.nsig", ck, false);
  const auto r0 = parse_ops_report_csv(slurp(r0path / "ops.csv"))[0];
  CHECK(r0.params == net::param_count(cfg.effective_model()));
  CHECK(r0.effective_ops == r0.flops_sparse * r0.insd + r0.flops_dense);

  // dense inference logs insd = 1
  std::ostringstream dlog;
  auto dense_cfg = cfg;
  dense_cfg.ablations.dense_input = true;
  const auto dense_ck = dir.path / "dense.nckp";
  net::save_checkpoint(dense_cfg.effective_model(), net::init_params(dense_cfg.effective_model(), 0), dense_ck);
  cmd_infer(context(dir.path / "dense", dlog, dense_cfg), dir.path / "data" / "S001.nsig", dense_ck);
  CHECK(dlog.str().find("insd=1\n") != std::string::npos);
}

TEST_CASE("train rejects too few subjects") {
  TempDir dir("few");
  std::ostringstream log;
  RunConfig cfg;
  SynthArgs sa;
  sa.count = 3;
  sa.epochs = 2;
  cmd_synth(context(dir.path, log, cfg), sa);
  TrainArgs ta;
  ta.manifest = dir.path / "manifest.csv";
  CHECK_THROWS_AS(cmd_train(context(dir.path / "run", log, cfg), ta), ParameterError);
}
