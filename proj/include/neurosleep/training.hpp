#pragma once

// Batched train-mode forward/backward over windows of epochs, AdamW, the early-stopped
// training loop and subject-independent cross-validation.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "neurosleep/dataset.hpp"
#include "neurosleep/metrics.hpp"
#include "neurosleep/params.hpp"

namespace neurosleep {

enum class Monitor : std::uint8_t { val_accuracy, val_loss };

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  int batch_size = 64;
  // Consecutive centres of one recording kept together in a minibatch so their windows
  // share epoch encodings.
  int block_size = 32;
  int max_epochs = 50;
  int patience = 8;
  std::uint64_t seed = 0;
  Monitor monitor = Monitor::val_accuracy;
  std::vector<double> class_weights;  // empty: unweighted
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

struct Sample {
  std::size_t recording = 0;
  std::size_t center = 0;  // batch position within the recording
};

struct LossGrad {
  double loss = 0.0;
  net::ModelParams grad;
  // Batch statistics per branch (biased variance) over `bn_count` positions.
  std::vector<net::Vec> bn_mean;
  std::vector<net::Vec> bn_var;
  std::size_t bn_count = 0;
};

// Mean (optionally class-weighted) cross-entropy of the centre predictions and its gradient.
// Batch normalisation uses statistics over the distinct epochs the windows touch.
// NumericError if the loss is not finite.
LossGrad loss_and_grad(const net::ModelParams& p, const net::ModelConfig& cfg,
                       std::span<const PreparedRecording> data, std::span<const Sample> batch,
                       std::span<const double> class_weights = {});
// Loss only; same value as loss_and_grad().loss.
double batch_loss(const net::ModelParams& p, const net::ModelConfig& cfg,
                  std::span<const PreparedRecording> data, std::span<const Sample> batch,
                  std::span<const double> class_weights = {});

void update_running_stats(net::ModelParams& p, const LossGrad& lg);

struct AdamState {
  net::ModelParams m;
  net::ModelParams v;
  long step = 0;

  static AdamState zeros(const net::ModelConfig& cfg);
};

// Decoupled weight decay then the bias-corrected Adam update, on learnable tensors only.
void adamw_step(net::ModelParams& p, const net::ModelParams& grad, AdamState& state, const TrainConfig& cfg);

class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}
  // Records one epoch's metric (higher is better); true when training should stop.
  bool update(double metric);
  bool last_improved() const { return last_improved_; }
  double best() const { return best_; }

 private:
  int patience_;
  int stale_ = 0;
  bool seen_ = false;
  bool last_improved_ = false;
  double best_ = 0.0;
};

struct HistoryRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double best_so_far = 0.0;
};

inline constexpr const char* kHistoryCsvHeader = "epoch,train_loss,val_accuracy,best_so_far";
std::string history_csv(std::span<const HistoryRow> rows);

struct TrainResult {
  net::ModelParams best;  // binary32-rounded snapshot with the best validation score
  std::vector<HistoryRow> history;
  int best_epoch = 0;
};

std::vector<std::vector<Sample>> make_minibatches(std::span<const PreparedRecording> data,
                                                  const TrainConfig& cfg, int epoch);

using ProgressFn = std::function<void(const HistoryRow&)>;

TrainResult train(std::span<const PreparedRecording> train_set, std::span<const PreparedRecording> val_set,
                  const net::ModelConfig& model, const TrainConfig& cfg, const ProgressFn& progress = {});

struct Prediction {
  std::vector<int> stages;
  std::vector<net::Vec> probs;
  std::vector<net::Vec> states;  // ELIF states over valid chain steps, for spike statistics
};

// Eval-mode predictions for every epoch of the recording.
Prediction predict(const net::ModelParams& p, const net::ModelConfig& cfg, const PreparedRecording& rec);

struct CvFold {
  std::vector<std::string> train;
  std::vector<std::string> val;
  std::vector<std::string> test;
};

struct CvPlan {
  int n_folds = 5;
  double val_fraction = 0.15;
  std::uint64_t seed = 0;
  std::map<std::string, int> subject_to_fold;
  std::vector<CvFold> folds;
};

// Seeded shuffle, round-robin fold assignment, then ceil(val_fraction * |train|) of each
// fold's training subjects moved to validation. Duplicated ids count once.
CvPlan cv_split(std::span<const std::string> subjects, int n_folds = 5, double val_fraction = 0.15,
                std::uint64_t seed = 0);

// `fold,subject,role` rows for every (fold, subject) pair.
std::string cv_plan_csv(const CvPlan& plan);

}  // namespace neurosleep
