#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "neurosleep/errors.hpp"
#include "neurosleep/training.hpp"

using namespace neurosleep;

namespace {

PreparedRecording random_recording(std::mt19937_64& rng, std::size_t n_epochs, std::size_t t_b, bool dense,
                                   const std::string& id = "R") {
  PreparedRecording rec;
  rec.subject_id = id;
  rec.batch.t_b = t_b;
  std::uniform_real_distribution<double> u(0, 1);
  std::normal_distribution<double> g(0, 1);
  for (std::size_t e = 0; e < n_epochs; ++e) {
    if (dense) {
      std::vector<double> x(t_b);
      for (auto& v : x) v = g(rng);
      rec.batch.rasters.push_back(dense_raster(x));
    } else {
      Raster r;
      r.length = t_b;
      r.cells.assign(2 * t_b, 0.0f);
      for (auto& c : r.cells) {
        const double v = u(rng);
        c = v < 0.1 ? 1.0f : (v < 0.2 ? -1.0f : 0.0f);
      }
      rec.batch.rasters.push_back(r);
    }
    rec.batch.anchors.push_back((static_cast<double>(e) + 0.5) * 30);
    rec.batch.mask.push_back(1);
    rec.batch.epoch_indices.push_back(e);
    rec.labels.push_back(static_cast<int>(e % 5));
  }
  return rec;
}

// Worst relative error between analytic and central-difference gradients over a sample
// of entries in every learnable tensor.
double gradient_error(const net::ModelConfig& cfg, std::span<const PreparedRecording> data,
                      std::span<const Sample> batch, std::size_t per_tensor) {
  auto p = net::init_params(cfg, 1);
  for (auto& b : p.branches) {
    b.beta.setConstant(0.1);
    b.gamma.setConstant(1.3);
  }
  const auto lg = loss_and_grad(p, cfg, data, batch);
  auto views = net::tensor_views(p);
  auto grads = net::tensor_views(const_cast<net::ModelParams&>(lg.grad));
  std::mt19937_64 rng(3);
  double worst = 0;
  for (std::size_t i = 0; i < views.size(); ++i) {
    if (!views[i].learnable) continue;
    std::vector<std::size_t> idx(views[i].size);
    for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = j;
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(std::min(idx.size(), per_tensor));
    for (std::size_t j : idx) {
      double& v = views[i].data[j];
      const double old = v;
      const double eps = 1e-5;
      v = old + eps;
      const double lp = batch_loss(p, cfg, data, batch);
      v = old - eps;
      const double lm = batch_loss(p, cfg, data, batch);
      v = old;
      const double num = (lp - lm) / (2 * eps);
      const double an = grads[i].data[j];
      worst = std::max(worst, std::abs(an - num) / std::max({std::abs(an), std::abs(num), 1e-6}));
    }
  }
  return worst;
}

net::ModelConfig tiny_config() {
  net::ModelConfig c;
  c.epoch_samples = 120;
  c.window_radius = 1;
  return c;
}

}  // namespace

TEST_CASE("analytic gradients match finite differences across variants") {
  std::mt19937_64 rng(21);
  const std::vector<Sample> batch{{0, 0}, {0, 1}, {0, 2}, {1, 1}};
  for (int variant = 0; variant < 7; ++variant) {
    auto cfg = tiny_config();
    const bool dense = variant == 4;
    if (variant == 1) cfg.pooling = net::TokenPooling::mean;
    if (variant == 2) cfg.use_elif = false;
    if (variant == 3) cfg.single_branch = true;
    if (variant == 4) cfg.dense_input = true;
    if (variant == 5) cfg.gate_bypass = true;
    std::vector<PreparedRecording> data{random_recording(rng, 4, 120, dense, "A"),
                                        random_recording(rng, 3, 120, dense, "B")};
    if (variant == 6) data[0].batch.mask[1] = 0;
    CAPTURE(variant);
    CHECK(gradient_error(cfg, data, batch, 6) < 1e-4);
  }
}

TEST_CASE("class weights scale the loss") {
  std::mt19937_64 rng(4);
  const auto cfg = tiny_config();
  const std::vector<PreparedRecording> data{random_recording(rng, 3, 120, false)};
  const auto p = net::init_params(cfg, 2);
  const std::vector<Sample> batch{{0, 0}, {0, 1}, {0, 2}};
  const std::vector<double> twos(5, 2.0);
  CHECK(batch_loss(p, cfg, data, batch, twos) == doctest::Approx(batch_loss(p, cfg, data, batch)).epsilon(1e-12));
  CHECK(loss_and_grad(p, cfg, data, batch).loss == batch_loss(p, cfg, data, batch));
}

TEST_CASE("adamw first step") {
  const auto cfg = tiny_config();
  auto p = net::init_params(cfg, 3);
  const auto before = p;
  auto g = net::zero_params(cfg);
  g.head_b << 0.5, -2.0, 0.0, 1e-3, 4.0;
  TrainConfig tc;
  tc.lr = 0.01;
  tc.weight_decay = 0.1;
  auto st = AdamState::zeros(cfg);
  adamw_step(p, g, st, tc);
  for (int k = 0; k < 5; ++k) {
    // bias-corrected moments after one step are g and g^2
    const double gk = g.head_b(k);
    const double want = before.head_b(k) * (1 - 0.01 * 0.1) - 0.01 * gk / (std::abs(gk) + 1e-8);
    CHECK(p.head_b(k) == doctest::Approx(want).epsilon(1e-12));
  }
  // zero gradient: decay only; buffers untouched
  CHECK(p.head_w(0, 0) == doctest::Approx(before.head_w(0, 0) * 0.999).epsilon(1e-15));
  CHECK(p.branches[0].running_var == before.branches[0].running_var);
  CHECK(st.step == 1);
}

TEST_CASE("early stopping counts stale epochs") {
  EarlyStopper s(2);
  CHECK_FALSE(s.update(0.5));
  CHECK(s.last_improved());
  CHECK_FALSE(s.update(0.6));
  CHECK_FALSE(s.update(0.6));
  CHECK_FALSE(s.last_improved());
  CHECK(s.update(0.55));
  CHECK(s.best() == 0.6);
}

TEST_CASE("cross-validation plan") {
  std::vector<std::string> subjects;
  for (int i = 0; i < 23; ++i) subjects.push_back("S" + std::to_string(i));
  const auto plan = cv_split(subjects, 5, 0.15, 9);
  std::multiset<std::string> tested;
  for (const auto& f : plan.folds) {
    tested.insert(f.test.begin(), f.test.end());
    const std::size_t rest = 23 - f.test.size();
    CHECK(f.val.size() == static_cast<std::size_t>(std::ceil(0.15 * static_cast<double>(rest))));
    CHECK(f.train.size() + f.val.size() + f.test.size() == 23);
    for (const auto& s : f.val) {
      CHECK(std::find(f.train.begin(), f.train.end(), s) == f.train.end());
      CHECK(std::find(f.test.begin(), f.test.end(), s) == f.test.end());
    }
    CHECK(f.test.size() >= 4);
    CHECK(f.test.size() <= 5);
  }
  CHECK(tested.size() == 23);
  CHECK(std::set<std::string>(tested.begin(), tested.end()).size() == 23);
  CHECK(cv_plan_csv(plan) == cv_plan_csv(cv_split(subjects, 5, 0.15, 9)));
  CHECK(cv_plan_csv(plan) != cv_plan_csv(cv_split(subjects, 5, 0.15, 10)));

  const std::vector<std::string> five{"a", "b", "c", "d", "e"};
  for (const auto& f : cv_split(five, 5).folds) CHECK(f.test.size() == 1);
  const std::vector<std::string> four{"a", "b", "c", "d"};
  CHECK_THROWS_AS(cv_split(four, 5), ParameterError);
}

TEST_CASE("minibatches cover every centre once") {
  std::mt19937_64 rng(5);
  std::vector<PreparedRecording> data;
  for (int i = 0; i < 7; ++i) data.push_back(random_recording(rng, 10 + static_cast<std::size_t>(i), 20, false));
  TrainConfig tc;
  tc.batch_size = 16;
  tc.block_size = 4;
  const auto b = make_minibatches(data, tc, 2);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::size_t total = 0;
  for (const auto& mb : b) {
    CHECK(mb.size() <= 16);
    for (const auto& s : mb) seen.insert({s.recording, s.center});
    total += mb.size();
  }
  std::size_t want = 0;
  for (const auto& d : data) want += d.batch.size();
  CHECK(total == want);
  CHECK(seen.size() == want);
  const auto again = make_minibatches(data, tc, 2);
  CHECK(again.size() == b.size());
  CHECK(again[0][0].recording == b[0][0].recording);
}

TEST_CASE("training loop is deterministic and records history") {
  std::mt19937_64 rng(6);
  std::vector<PreparedRecording> tr, va;
  for (int i = 0; i < 3; ++i) tr.push_back(random_recording(rng, 5, 120, false, "T" + std::to_string(i)));
  va.push_back(random_recording(rng, 5, 120, false, "V"));
  TrainConfig tc;
  tc.max_epochs = 2;
  tc.patience = 2;
  tc.batch_size = 8;
  tc.block_size = 4;
  const auto cfg = tiny_config();
  const auto a = train(tr, va, cfg, tc);
  const auto b = train(tr, va, cfg, tc);
  CHECK(a.history.size() == 2);
  CHECK(history_csv(a.history) == history_csv(b.history));
  CHECK(net::params_equal(a.best, b.best));
  CHECK(a.history.back().best_so_far >= a.history.front().val_accuracy);
  const auto pred = predict(a.best, cfg, va[0]);
  CHECK(pred.stages.size() == 5);
  for (const auto& pr : pred.probs) CHECK(std::abs(pr.sum() - 1.0) < 1e-6);
}

TEST_CASE("train config validation") {
  TrainConfig tc;
  tc.batch_size = 0;
  CHECK_THROWS_AS(tc.validate(), ParameterError);
  tc = {};
  tc.class_weights = {1, 2};
  CHECK_THROWS_AS(tc.validate(), ParameterError);
}
