#include <doctest.h>

#include <cmath>
#include <random>

#include "neurosleep/errors.hpp"
#include "neurosleep/network.hpp"

using namespace neurosleep;
using namespace neurosleep::net;

namespace {

Raster random_raster(std::mt19937_64& rng, std::size_t t_b, double density = 0.2) {
  Raster r;
  r.length = t_b;
  r.cells.assign(2 * t_b, 0.0f);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& c : r.cells) {
    const double v = u(rng);
    if (v < density / 2) c = 1.0f;
    else if (v < density) c = -1.0f;
  }
  return r;
}

ModelConfig small_config() {
  ModelConfig c;
  c.epoch_samples = 200;
  c.window_radius = 2;
  return c;
}

ModelParams scalar_attention() {
  ModelParams p;
  p.wq = p.wk = p.wv = p.wo = Mat::Ones(1, 1);
  return p;
}

}  // namespace

TEST_CASE("polarity expansion splits signs") {
  Raster r;
  r.length = 3;
  r.cells = {1, 0, -1, 0, 0, 0};
  const Mat e = polarity_expand(r);
  CHECK(e.row(0) == (Eigen::RowVectorXd(3) << 1, 0, 0).finished());
  CHECK(e.row(1) == (Eigen::RowVectorXd(3) << 0, 0, 1).finished());
  CHECK(e.bottomRows(2).isZero(0));

  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = random_raster(rng, 50, 0.5);
    const Mat ex = polarity_expand(s);
    CHECK(ex.minCoeff() >= 0.0);
    for (std::size_t t = 0; t < 50; ++t) {
      CHECK(ex(0, static_cast<Eigen::Index>(t)) - ex(1, static_cast<Eigen::Index>(t)) == s.at(0, t));
      CHECK(ex(2, static_cast<Eigen::Index>(t)) - ex(3, static_cast<Eigen::Index>(t)) == s.at(1, t));
    }
  }
  r.cells[1] = 2;
  CHECK_THROWS_AS(polarity_expand(r), FormatError);
}

TEST_CASE("zero input through zero shifts gives a zero map") {
  const auto cfg = small_config();
  auto p = init_params(cfg, 3);
  for (auto& b : p.branches) b.beta.setZero();
  p.fuse_b.setZero();
  const Mat out = eamr_forward(Mat::Zero(4, 200), p, cfg);
  CHECK(out.isZero(0));
}

TEST_CASE("unit impulse keeps width one through centred kernels") {
  auto cfg = small_config();
  cfg.gate_bypass = true;
  auto p = init_params(cfg, 3);
  for (int b = 0; b < cfg.n_branches(); ++b) {
    auto& br = p.branches[static_cast<std::size_t>(b)];
    const int k = cfg.branch_kernel(b);
    br.dw.setZero();
    br.dw(0, k / 2) = 1.0;
    br.pw.setZero();
    br.pw(0, 0) = 1.0;
    br.gamma.setOnes();
    br.beta.setZero();
    br.running_mean.setZero();
    br.running_var.setConstant(1.0 - kBnEps);
  }
  p.fuse_w.setOnes();
  p.fuse_b.setZero();
  Mat e = Mat::Zero(4, 200);
  e(0, 50) = 1.0;
  const Mat out = eamr_forward(e, p, cfg);
  // GELU(1) per branch on channel 0, summed by the all-ones fusion row.
  const double gelu1 = 0.5 * (1.0 + std::erf(1.0 / std::sqrt(2.0)));
  for (Eigen::Index t = 0; t < 200; ++t) {
    if (t == 50) {
      CHECK(out(0, t) == doctest::Approx(3 * gelu1).epsilon(1e-12));
    } else {
      CHECK(out.col(t).isZero(0));
    }
  }
}

TEST_CASE("gate is bounded and bypass is the identity") {
  auto cfg = small_config();
  const auto p = init_params(cfg, 4);
  std::mt19937_64 rng(2);
  const Mat h = Mat::Random(cfg.fused_width, 200);
  const Vec g = channel_gate(h, p, cfg);
  CHECK(g.minCoeff() > 0.0);
  CHECK(g.maxCoeff() < 1.0);
  cfg.gate_bypass = true;
  CHECK(channel_gate(h, p, cfg) == Vec::Ones(cfg.fused_width));
}

TEST_CASE("attention pooling examples") {
  auto cfg = small_config();
  auto p = init_params(cfg, 5);
  const Vec col = Vec::LinSpaced(cfg.fused_width, -1, 1);
  const Mat flat = col.replicate(1, 40);
  const auto r = tokenize_epoch(flat, p, cfg);
  CHECK((r.u - col).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));

  const auto one = tokenize_epoch(Mat(col), p, cfg);
  CHECK(one.u == col);

  // C = 1 scorer: score = 2 tanh(h), columns chosen so the scores are (0, ln 3).
  ModelParams q;
  q.tok_w = Mat::Ones(1, 1);
  q.tok_b = Vec::Zero(1);
  q.tok_v = Vec::Constant(1, 2.0);
  Mat two(1, 2);
  two << 0.0, std::atanh(std::log(3.0) / 2);
  const auto w = tokenize_epoch(two, q, cfg);
  CHECK(w.weights(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(w.weights(1) == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(w.u(0) == doctest::Approx(0.75 * two(0, 1)).epsilon(1e-12));
}

TEST_CASE("attention masks") {
  const std::vector<std::uint8_t> ones3{1, 1, 1};
  const Mat m0 = build_attention_mask(3, 0, ones3);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK((m0(i, j) == 0.0) == (i == j));
  const Mat m1 = build_attention_mask(3, 2, std::vector<std::uint8_t>{1, 1, 0});
  for (int i = 0; i < 3; ++i) {
    CHECK(m1(i, 2) == kMasked);
    CHECK(m1(i, 0) == 0.0);
  }
  const Mat band = build_attention_mask(5, 1, std::vector<std::uint8_t>(5, 1));
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 5; ++j) CHECK((band(i, j) == 0.0) == (std::abs(i - j) <= 1));
  // an invalid epoch with no valid neighbour still sees itself
  const Mat lone = build_attention_mask(3, 0, std::vector<std::uint8_t>{1, 0, 1});
  CHECK(lone(1, 1) == 0.0);
}

TEST_CASE("scalar attention hand example") {
  Mat u(2, 1);
  u << 1.0, 2.0;
  const auto r = ltam_forward(u, build_attention_mask(2, 1, std::vector<std::uint8_t>{1, 1}), scalar_attention());
  const double a0 = 1.0 / (1.0 + std::exp(1.0));
  CHECK(std::abs(r.alpha(0, 0) - 0.2689) < 1e-4);
  CHECK(std::abs(r.alpha(0, 1) - 0.7311) < 1e-4);
  CHECK(r.alpha(0, 0) == doctest::Approx(a0).epsilon(1e-12));
  CHECK(r.z(0, 0) == doctest::Approx(1.0 + a0 * 1 + (1 - a0) * 2).epsilon(1e-12));
}

TEST_CASE("attention rows are distributions over the visible set") {
  const auto cfg = small_config();
  const auto p = init_params(cfg, 6);
  const Mat tokens = Mat::Random(7, cfg.fused_width) * 3.0;
  const std::vector<std::uint8_t> m{1, 0, 1, 1, 0, 1, 1};
  const Mat mask = build_attention_mask(7, 2, m);
  const auto r = ltam_forward(tokens, mask, p);
  for (int i = 0; i < 7; ++i) {
    CHECK(std::abs(r.alpha.row(i).sum() - 1.0) < 1e-6);
    for (int j = 0; j < 7; ++j) {
      if (mask(i, j) == kMasked) CHECK(r.alpha(i, j) == 0.0);
      CHECK(r.alpha(i, j) >= 0.0);
    }
  }
  // Row 0 of a radius-0 mask sees only itself: context is exactly its value vector.
  const auto single = ltam_forward(tokens, build_attention_mask(7, 0, std::vector<std::uint8_t>(7, 1)), p);
  CHECK(single.alpha.row(0) == Eigen::RowVectorXd::Unit(7, 0));
  const Vec v0 = p.wv * tokens.row(0).transpose();
  const Vec z0 = tokens.row(0).transpose() + p.wo * v0;
  CHECK((single.z.row(0).transpose() - z0).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("elif hand trace and reset") {
  ElifState s;
  const Vec one = Vec::Ones(1);
  const double h_want[] = {1.0, 1.5, 1.75};
  const double bar_want[] = {1.0, 0.75, 1.75 / 3};
  for (int i = 0; i < 3; ++i) {
    const Vec bar = elif_step(s, one, true, 0.5);
    CHECK(std::abs(s.h(0) - h_want[i]) < 1e-12);
    CHECK(std::abs(bar(0) - bar_want[i]) < 1e-12);
  }
  ElifState a, b;
  elif_step(a, Vec::Constant(1, 7.0), true, 0.5);
  elif_step(a, Vec::Constant(1, -3.0), true, 0.5);
  const Vec after_a = elif_step(a, one, false, 0.5);
  const Vec after_b = elif_step(b, one, false, 0.5);
  CHECK(after_a == after_b);
  CHECK(a.h == b.h);
  CHECK(a.n == 1);
  CHECK(after_a(0) == 1.0);
}

TEST_CASE("elif closed form for constant input") {
  for (double lambda : {0.5, 0.9, 0.99}) {
    ElifState s;
    const Vec z = Vec::Constant(3, 0.7);
    for (int i = 0; i <= 50; ++i) {
      elif_step(s, z, true, lambda);
      const double want = 0.7 * (1 - std::pow(lambda, i + 1)) / (1 - lambda);
      CHECK(std::abs(s.h(0) - want) / want < 1e-9);
    }
  }
  ElifState zero;
  for (int i = 0; i < 5; ++i) CHECK(elif_step(zero, Vec::Zero(2), i != 2, 0.9).isZero(0));
}

TEST_CASE("classifier examples") {
  ModelParams p;
  p.head_w = Mat::Zero(5, 3);
  p.head_b = Vec::Zero(5);
  const auto u = classify(Vec::Ones(3), p);
  for (int k = 0; k < 5; ++k) CHECK(u.probs(k) == doctest::Approx(0.2).epsilon(1e-15));
  p.head_b(0) = 10;
  const auto w = classify(Vec::Ones(3), p);
  CHECK(w.stage == 0);
  CHECK(w.probs(0) > 0.99);
  p.head_b << 1, 2, 3, 4, 5;
  double z = 0;
  for (int k = 1; k <= 5; ++k) z += std::exp(k);
  const auto c = classify(Vec::Zero(3), p);
  CHECK(c.probs(4) == doctest::Approx(std::exp(5.0) / z).epsilon(1e-12));
  CHECK(std::abs(c.probs(4) - 0.6364) < 1e-4);
  CHECK(c.stage == 4);
}

TEST_CASE("spike rate counts threshold crossings") {
  std::vector<Vec> zeros{Vec::Zero(4)};
  CHECK(spike_rate(zeros, 1.0) == 0.0);
  std::vector<Vec> sat{Vec::Constant(3, -2.0), Vec::Constant(3, 2.0)};
  CHECK(spike_rate(sat, 1.0) == 1.0);
  Vec a(2), b(2);
  a << 2, 0;
  b << 0, 2;
  std::vector<Vec> mixed{a, b};
  CHECK(spike_rate(mixed, 1.0) == 0.5);
  CHECK_THROWS_AS(spike_rate(std::vector<Vec>{}, 1.0), MetricError);
}

TEST_CASE("window forward locality and determinism") {
  const auto cfg = small_config();
  const auto p = init_params(cfg, 7);
  std::mt19937_64 rng(8);
  std::vector<Raster> rasters;
  for (int i = 0; i < 9; ++i) rasters.push_back(random_raster(rng, 200));
  std::vector<std::uint8_t> mask(9, 1);
  const auto w = make_window(rasters, mask, 4, cfg.window_radius);
  const auto base = forward(w, p, cfg);
  CHECK(forward(w, p, cfg).center.logits == base.center.logits);

  auto far = rasters;
  far[0] = random_raster(rng, 200);
  far[8] = random_raster(rng, 200);
  CHECK(forward(make_window(far, mask, 4, cfg.window_radius), p, cfg).center.logits == base.center.logits);

  // Only the centre valid: neighbours cannot matter.
  std::vector<std::uint8_t> lone(9, 0);
  lone[4] = 1;
  const auto a = forward(make_window(rasters, lone, 4, cfg.window_radius), p, cfg);
  auto other = rasters;
  for (int i : {2, 3, 5, 6}) other[static_cast<std::size_t>(i)] = random_raster(rng, 200);
  const auto b = forward(make_window(other, lone, 4, cfg.window_radius), p, cfg);
  CHECK(a.center.logits == b.center.logits);

  const auto edge = make_window(rasters, mask, 0, cfg.window_radius);
  CHECK(edge.slots[0] == nullptr);
  CHECK(edge.mask[0] == 0);
  CHECK(edge.mask[2] == 1);
}

TEST_CASE("identical epochs give identical value vectors") {
  const auto cfg = small_config();
  const auto p = init_params(cfg, 9);
  std::mt19937_64 rng(10);
  const auto r = random_raster(rng, 200);
  std::vector<Raster> same(5, r);
  const auto out = forward(make_window(same, std::vector<std::uint8_t>(5, 1), 2, cfg.window_radius), p, cfg);
  const Vec u = out.tokens.row(0).transpose();
  const Vec want = u + p.wo * (p.wv * u);
  for (int i = 0; i < 5; ++i) CHECK((out.attention.z.row(i).transpose() - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("parameter budgets") {
  CHECK(param_count(ModelConfig{}) == 4327);
  const auto big = ModelConfig::for_profile(Profile::paper_scale);
  const auto n = param_count(big);
  CHECK(n >= 792000);
  CHECK(n <= 1072000);
  for (auto cfg : {ModelConfig{}, big}) {
    auto p = zero_params(cfg);
    std::size_t counted = 0;
    for (const auto& v : tensor_views(p)) {
      if (v.learnable) counted += v.size;
    }
    CHECK(counted == param_count(cfg));
  }
  ModelConfig a2;
  a2.single_branch = true;
  auto p = zero_params(a2);
  CHECK(p.branches.size() == 1);
  CHECK(p.branches[0].pw.rows() == 24);
  CHECK(p.branches[0].dw.cols() == 15);
}

TEST_CASE("checkpoint round trip and rejection") {
  auto cfg = small_config();
  auto p = init_params(cfg, 11);
  CHECK(params_equal(p, init_params(cfg, 11)));
  CHECK_FALSE(params_equal(p, init_params(cfg, 12)));
  const std::string bytes = encode_checkpoint(cfg, p);
  const auto ck = decode_checkpoint(bytes);
  CHECK(ck.config == cfg);
  CHECK(params_equal(ck.params, p));
  CHECK(encode_checkpoint(ck.config, ck.params) == bytes);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(bytes + "z"), FormatError);
  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
}
