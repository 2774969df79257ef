#include "neurosleep/app/commands.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "neurosleep/binary_io.hpp"
#include "neurosleep/csv.hpp"
#include "neurosleep/dataset.hpp"
#include "neurosleep/efficiency.hpp"
#include "neurosleep/errors.hpp"
#include "neurosleep/metrics.hpp"
#include "neurosleep/network.hpp"
#include "neurosleep/operating_point.hpp"
#include "neurosleep/s2e.hpp"
#include "neurosleep/training.hpp"

namespace fs = std::filesystem;

namespace neurosleep::app {

namespace {

std::ostream& log(const Context& ctx) {
  static std::ostringstream sink;
  return ctx.log ? *ctx.log : sink;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  io::write_file(path, text);
}

bool is_events_file(const fs::path& p) { return p.extension() == ".nevt"; }

// Epoch batch for inference from either an encoded stream or a raw signal.
PreparedRecording load_input(const Context& ctx, const fs::path& input) {
  const RunConfig& rc = ctx.config;
  if (is_events_file(input)) {
    if (rc.ablations.dense_input) throw ParameterError("dense input needs a signal file, not " + input.string());
    const auto stream = load_events(input);
    PreparedRecording rec;
    rec.subject_id = input.stem().string();
    rec.density = event_density(stream);
    rec.batch = build_epoch_batch(assign_epochs(stream), kEpochSeconds, rc.gap_tolerance);
    return rec;
  }
  const Recording raw = load_signal(input);
  if (raw.duration() < kEpochSeconds) {
    PreparedRecording rec;
    rec.subject_id = raw.subject_id;
    rec.batch.t_b = static_cast<std::size_t>(kEpochSeconds * kTargetFs);
    return rec;
  }
  return prepare_recording(raw, rc.encoder, rc.ablations.dense_input);
}

net::Checkpoint load_matching_checkpoint(const Context& ctx, const fs::path& path) {
  auto ck = net::load_checkpoint(path);
  if (!(ck.config == ctx.config.effective_model())) {
    throw FormatError(path.string() + ": checkpoint model configuration does not match the run configuration");
  }
  return ck;
}

std::vector<fs::path> list_files(const fs::path& dir, const std::string& ext) {
  if (!fs::is_directory(dir)) throw ParameterError(dir.string() + " is not a directory");
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ext) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

int cmd_synth(const Context& ctx, const SynthArgs& args) {
  if (args.count < 1) throw ParameterError("synth: count must be >= 1");
  const auto seed = ctx.config.seed;
  if (args.kind == "labeled") {
    if (args.epochs < 1) throw ParameterError("synth: epochs must be >= 1");
    const auto corpus = synthetic_labeled_corpus(static_cast<std::size_t>(args.count),
                                                 static_cast<std::size_t>(args.epochs), seed);
    std::ostringstream manifest;
    manifest << "signal,labels\n";
    for (const auto& item : corpus) {
      const std::string id = item.recording.subject_id;
      fs::create_directories(ctx.out);
      save_signal(item.recording, ctx.out / (id + ".nsig"));
      save_labels(item.labels, ctx.out / (id + "_labels.csv"));
      manifest << id << ".nsig," << id << "_labels.csv\n";
    }
    write_text(ctx.out / "manifest.csv", manifest.str());
    log(ctx) << "wrote " << corpus.size() << " labeled recordings to " << ctx.out.string() << '\n';
  } else if (args.kind == "standard") {
    const auto corpus = synthetic_standard_corpus(static_cast<std::size_t>(args.count), args.duration, seed);
    fs::create_directories(ctx.out);
    for (const auto& rec : corpus) save_signal(rec, ctx.out / (rec.subject_id + ".nsig"));
    log(ctx) << "wrote " << corpus.size() << " signals to " << ctx.out.string() << '\n';
  } else if (args.kind == "constant") {
    if (!(args.duration > 0)) throw ParameterError("synth: duration must be > 0");
    Recording rec;
    rec.fs = kTargetFs;
    rec.channel = "EEG Fpz-Cz";
    rec.subject_id = "constant";
    rec.samples.assign(static_cast<std::size_t>(std::llround(args.duration * rec.fs)), args.value);
    fs::create_directories(ctx.out);
    save_signal(rec, ctx.out / "constant.nsig");
    log(ctx) << "wrote " << (ctx.out / "constant.nsig").string() << '\n';
  } else {
    throw ParameterError("synth: kind must be labeled, standard or constant");
  }
  return kExitOk;
}

int cmd_encode(const Context& ctx, const fs::path& signal) {
  const Recording rec = preprocess(load_signal(signal));
  const auto stream = encode_ramsdm(rec.samples, ctx.config.encoder, rec.fs);
  const fs::path out = ctx.out / (signal.stem().string() + ".nevt");
  fs::create_directories(ctx.out);
  save_events(stream, out);
  const auto d = event_density(stream);
  log(ctx) << "events slow=" << stream.slow_events.size() << " fast=" << stream.fast_events.size() << '\n'
           << "rho_slow=" << csv::num(d.slow) << " rho_fast=" << csv::num(d.fast)
           << " rho_combined=" << csv::num(d.combined) << '\n'
           << "wrote " << out.string() << '\n';
  return kExitOk;
}

int cmd_reconstruct(const Context& ctx, const fs::path& events, const std::optional<fs::path>& signal) {
  const auto stream = load_events(events);
  Recording rec;
  rec.fs = stream.fs;
  rec.channel = "reconstruction";
  rec.subject_id = events.stem().string();
  rec.samples = reconstruct(stream);
  fs::create_directories(ctx.out);
  const fs::path out = ctx.out / (events.stem().string() + "_recon.nsig");
  save_signal(rec, out);
  log(ctx) << "wrote " << out.string() << '\n';
  if (signal) {
    const Recording ref = preprocess(load_signal(*signal));
    if (ref.samples.size() != rec.samples.size()) {
      throw ParameterError("reconstruct: signal and event stream lengths differ");
    }
    const auto f = fidelity(ref.samples, rec.samples);
    std::ostringstream ss;
    ss << "snr_db,nmse,corr\n" << csv::num(f.snr_db) << ',' << csv::num(f.nmse) << ',' << csv::num(f.corr) << '\n';
    write_text(ctx.out / (events.stem().string() + "_fidelity.csv"), ss.str());
    log(ctx) << "snr_db=" << csv::num(f.snr_db) << " nmse=" << csv::num(f.nmse) << " corr=" << csv::num(f.corr)
             << '\n';
  }
  return kExitOk;
}

int cmd_epochs(const Context& ctx, const fs::path& events) {
  const auto stream = load_events(events);
  const auto batch = build_epoch_batch(assign_epochs(stream), kEpochSeconds, ctx.config.gap_tolerance);
  const fs::path out = ctx.out / (events.stem().string() + "_epochs.csv");
  write_text(out, batch_manifest_csv(batch));
  log(ctx) << batch.size() << " epochs; wrote " << out.string() << '\n';
  return kExitOk;
}

int cmd_sweep(const Context& ctx, const fs::path& corpus_dir) {
  const auto files = list_files(corpus_dir, ".nsig");
  if (files.empty()) throw ParameterError("sweep: no .nsig files in " + corpus_dir.string());
  std::vector<std::vector<double>> signals;
  for (const auto& f : files) signals.push_back(preprocess(load_signal(f)).samples);
  const auto result = grid_search(signals, ctx.config.grid, ctx.config.thresholds, ctx.config.encoder);
  write_text(ctx.out / "sweep.csv", sweep_table_csv(result.table));
  std::ostringstream sel;
  sel << "status,k_slow,k_fast,rho_combined\n";
  if (result.selected) {
    sel << "selected," << csv::num(result.selected->k_slow) << ',' << csv::num(result.selected->k_fast) << ','
        << csv::num(result.selected->rho) << '\n';
    log(ctx) << "selected k_slow=" << csv::num(result.selected->k_slow)
             << " k_fast=" << csv::num(result.selected->k_fast) << " rho=" << csv::num(result.selected->rho) << '\n';
  } else {
    sel << "no_feasible_point,NA,NA,NA\n";
    log(ctx) << "no feasible operating point\n";
  }
  write_text(ctx.out / "operating_point.csv", sel.str());
  return result.selected ? kExitOk : kExitNoFeasiblePoint;
}

int cmd_infer(const Context& ctx, const fs::path& input, const fs::path& checkpoint) {
  const auto ck = load_matching_checkpoint(ctx, checkpoint);
  const PreparedRecording rec = load_input(ctx, input);
  std::ostringstream ss;
  ss << "epoch_index,predicted_stage,prob_W,prob_N1,prob_N2,prob_N3,prob_REM\n";
  if (rec.batch.size() > 0) {
    if (rec.batch.t_b != static_cast<std::size_t>(ck.config.epoch_samples)) {
      throw FormatError("infer: epoch length differs from the checkpoint's");
    }
    const auto pred = predict(ck.params, ck.config, rec);
    for (std::size_t e = 0; e < rec.batch.size(); ++e) {
      ss << rec.batch.epoch_indices[e] << ',' << stage_name(static_cast<Stage>(pred.stages[e]));
      for (Eigen::Index k = 0; k < pred.probs[e].size(); ++k) ss << ',' << csv::num(pred.probs[e][k]);
      ss << '\n';
    }
    log(ctx) << "insd=" << csv::num(measure_insd(rec.batch)) << '\n';
  } else {
    log(ctx) << "recording holds no complete epoch\n";
  }
  const fs::path out = ctx.out / (input.stem().string() + "_predictions.csv");
  write_text(out, ss.str());
  log(ctx) << "wrote " << out.string() << '\n';
  return kExitOk;
}

int cmd_train(const Context& ctx, const TrainArgs& args) {
  const RunConfig& rc = ctx.config;
  const auto model = rc.effective_model();
  const auto rows = csv::parse(io::read_file(args.manifest), "signal,labels");
  const fs::path base = args.manifest.parent_path();
  std::vector<PreparedRecording> data;
  for (const auto& r : rows) {
    if (r.size() != 2) throw FormatError(args.manifest.string() + ": expected 2 columns");
    const auto raw = load_signal(base / r[0]);
    const auto labels = load_labels(base / r[1]);
    data.push_back(prepare_recording(raw, rc.encoder, rc.ablations.dense_input, &labels));
    data.back().batch.mask = validity_mask(data.back().batch.anchors, kEpochSeconds, rc.gap_tolerance);
  }
  std::vector<std::string> subjects;
  for (const auto& d : data) subjects.push_back(d.subject_id);
  const auto plan = cv_split(subjects, rc.cv_folds, rc.cv_val_fraction, rc.seed);
  write_text(ctx.out / "folds.csv", cv_plan_csv(plan));

  auto select = [&](const std::vector<std::string>& ids) {
    std::vector<PreparedRecording> out;
    for (const auto& d : data) {
      if (std::find(ids.begin(), ids.end(), d.subject_id) != ids.end()) out.push_back(d);
    }
    return out;
  };

  std::ostringstream summary;
  summary << "fold,accuracy,macro_f1,kappa\n";
  double sum_acc = 0, sum_f1 = 0, sum_kappa = 0;
  int n_folds = 0;
  for (int f = 0; f < rc.cv_folds; ++f) {
    if (args.only_fold && *args.only_fold != f) continue;
    const auto& fold = plan.folds[static_cast<std::size_t>(f)];
    const auto tr = select(fold.train);
    const auto va = select(fold.val);
    const auto te = select(fold.test);
    log(ctx) << "fold " << f << ": train " << fold.train.size() << " val " << fold.val.size() << " test "
             << fold.test.size() << " subjects\n";
    const auto result = train(tr, va, model, rc.train, [&](const HistoryRow& h) {
      log(ctx) << "  epoch " << h.epoch << " loss " << csv::num(h.train_loss) << " val_acc "
               << csv::num(h.val_accuracy) << '\n';
    });
    std::vector<int> pred, truth;
    for (const auto& rec : te) {
      const auto p = predict(result.best, model, rec);
      pred.insert(pred.end(), p.stages.begin(), p.stages.end());
      truth.insert(truth.end(), rec.labels.begin(), rec.labels.end());
    }
    const auto report = evaluate(pred, truth);
    const fs::path dir = ctx.out / ("fold" + std::to_string(f));
    fs::create_directories(dir);
    net::save_checkpoint(model, result.best, dir / "checkpoint.nckp");
    write_text(dir / "history.csv", history_csv(result.history));
    write_text(dir / "confusion.csv", confusion_csv(report));
    write_text(dir / "per_class.csv", per_class_csv(report));
    summary << f << ',' << csv::num(report.accuracy) << ',' << csv::num(report.macro_f1) << ','
            << csv::num(report.kappa) << '\n';
    sum_acc += report.accuracy;
    sum_f1 += report.macro_f1;
    sum_kappa += report.kappa;
    ++n_folds;
    log(ctx) << "fold " << f << " accuracy " << csv::num(report.accuracy) << " macro_f1 "
             << csv::num(report.macro_f1) << " kappa " << csv::num(report.kappa) << '\n';
  }
  if (n_folds == 0) throw ParameterError("train: no fold selected");
  summary << "mean," << csv::num(sum_acc / n_folds) << ',' << csv::num(sum_f1 / n_folds) << ','
          << csv::num(sum_kappa / n_folds) << '\n';
  write_text(ctx.out / "summary.csv", summary.str());
  return kExitOk;
}

namespace {

net::ModelParams params_for(const Context& ctx, const std::optional<fs::path>& checkpoint) {
  if (checkpoint) return load_matching_checkpoint(ctx, *checkpoint).params;
  return net::init_params(ctx.config.effective_model(), ctx.config.seed);
}

}  // namespace

int cmd_ops(const Context& ctx, const fs::path& input, const std::optional<fs::path>& checkpoint,
            bool with_latency) {
  const auto model = ctx.config.effective_model();
  const auto params = params_for(ctx, checkpoint);
  const PreparedRecording rec = load_input(ctx, input);
  if (rec.batch.size() == 0) throw ParameterError("ops: input holds no complete epoch");
  const double insd = measure_insd(rec.batch);
  std::optional<double> spikes;
  if (model.use_elif) {
    const auto pred = predict(params, model, rec);
    spikes = net::spike_rate(pred.states, model.fire_threshold);
  }
  std::optional<LatencyStats> latency;
  if (with_latency) latency = bench_latency(params, model, 20, 2, ctx.config.seed);
  const std::vector<OpsReport> rows{make_ops_report(model, insd, spikes, latency)};
  write_text(ctx.out / "ops.csv", ops_report_csv(rows));
  const auto& r = rows.front();
  log(ctx) << "params=" << r.params << " flops_total=" << csv::num(r.flops_total)
           << " effective_ops=" << csv::num(r.effective_ops) << " insd=" << csv::num(r.insd)
           << " spike_rate=" << (r.spike_rate ? csv::num(*r.spike_rate) : "NA") << '\n';
  return kExitOk;
}

int cmd_bench(const Context& ctx, const std::optional<fs::path>& checkpoint, int samples, int warmup) {
  const auto model = ctx.config.effective_model();
  const auto params = params_for(ctx, checkpoint);
  const auto stats = bench_latency(params, model, samples, warmup, ctx.config.seed);
  std::ostringstream ss;
  ss << "profile,samples,latency_ms_median,latency_ms_p90\n"
     << net::profile_name(model.profile) << ',' << samples << ',' << csv::num(stats.median_ms) << ','
     << csv::num(stats.p90_ms) << '\n';
  write_text(ctx.out / "bench.csv", ss.str());
  log(ctx) << "latency median " << csv::num(stats.median_ms) << " ms, p90 " << csv::num(stats.p90_ms) << " ms\n";
  return kExitOk;
}

}  // namespace neurosleep::app
