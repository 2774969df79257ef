#include "neurosleep/network.hpp"

#include <cmath>

#include "eamr_kernels.hpp"
#include "neurosleep/errors.hpp"

namespace neurosleep::net {

using detail::SparseInput;

namespace {

void check_input(const SparseInput& e, const ModelConfig& cfg) {
  if (e.length < 1) throw InternalError("EAMR input is empty");
  (void)cfg;
}

// Branch outputs before normalisation: one w x T block per branch.
std::vector<Mat> branch_projections(const SparseInput& e, const ModelParams& p) {
  std::vector<Mat> out;
  Mat d;
  for (const auto& br : p.branches) {
    detail::depthwise(e, br.dw, d);
    out.push_back(br.pw * d);
  }
  return out;
}

// BN with the given per-channel statistics, GELU, concatenation, fusion and gate.
Mat finish_eamr(std::vector<Mat>& proj, const std::vector<Vec>& mean, const std::vector<Vec>& var,
                const ModelParams& p, const ModelConfig& cfg) {
  const int w = cfg.branch_channels();
  const Eigen::Index n = proj.front().cols();
  Mat a(cfg.concat_width(), n);
  for (std::size_t b = 0; b < proj.size(); ++b) {
    const auto& br = p.branches[b];
    for (int c = 0; c < w; ++c) {
      const double inv = 1.0 / std::sqrt(var[b][c] + kBnEps);
      const double* src = proj[b].row(c).data();
      double* dst = a.row(static_cast<Eigen::Index>(b) * w + c).data();
      for (Eigen::Index t = 0; t < n; ++t) {
        dst[t] = detail::gelu(br.gamma[c] * ((src[t] - mean[b][c]) * inv) + br.beta[c]);
      }
    }
  }
  Mat h = p.fuse_w * a;
  h.colwise() += p.fuse_b;
  const Vec g = channel_gate(h, p, cfg);
  for (Eigen::Index c = 0; c < h.rows(); ++c) h.row(c) *= g[c];
  return h;
}

Mat eamr_eval(const SparseInput& e, const ModelParams& p, const ModelConfig& cfg) {
  check_input(e, cfg);
  auto proj = branch_projections(e, p);
  std::vector<Vec> mean, var;
  for (const auto& br : p.branches) {
    mean.push_back(br.running_mean);
    var.push_back(br.running_var);
  }
  return finish_eamr(proj, mean, var, p, cfg);
}

Vec encode_one(const Raster& r, const ModelParams& p, const ModelConfig& cfg) {
  if (static_cast<int>(r.length) != cfg.epoch_samples) {
    throw InternalError("raster length does not match the model's epoch length");
  }
  return tokenize_epoch(eamr_eval(detail::expand_sparse(r), p, cfg), p, cfg).u;
}

}  // namespace

Mat polarity_expand(const Raster& s) {
  const auto e = detail::expand_sparse(s);
  Mat out = Mat::Zero(4, static_cast<Eigen::Index>(s.length));
  for (int c = 0; c < 4; ++c) {
    for (const auto& [t, v] : e.rows[c]) out(c, t) = v;
  }
  return out;
}

Mat eamr_forward(const Mat& e, const ModelParams& p, const ModelConfig& cfg) {
  return eamr_eval(detail::sparse_from_dense(e), p, cfg);
}

Mat eamr_forward(const Mat& e, ModelParams& p, const ModelConfig& cfg, Mode mode) {
  if (mode == Mode::eval) return eamr_forward(e, static_cast<const ModelParams&>(p), cfg);
  const auto sparse = detail::sparse_from_dense(e);
  check_input(sparse, cfg);
  auto proj = branch_projections(sparse, p);
  std::vector<Vec> mean, var;
  const double n = static_cast<double>(e.cols());
  for (std::size_t b = 0; b < proj.size(); ++b) {
    const Vec mu = proj[b].rowwise().mean();
    const Vec v = (proj[b].colwise() - mu).array().square().matrix().rowwise().sum() / n;
    auto& br = p.branches[b];
    const double unbias = n > 1 ? n / (n - 1) : 1.0;
    br.running_mean = (1 - kBnMomentum) * br.running_mean + kBnMomentum * mu;
    br.running_var = (1 - kBnMomentum) * br.running_var + kBnMomentum * unbias * v;
    mean.push_back(mu);
    var.push_back(v);
  }
  return finish_eamr(proj, mean, var, p, cfg);
}

Vec channel_gate(const Mat& h, const ModelParams& p, const ModelConfig& cfg) {
  if (cfg.gate_bypass) return Vec::Ones(h.rows());
  const Vec m = h.rowwise().mean();
  Vec a = p.gate_w1 * m + p.gate_b1;
  for (Eigen::Index i = 0; i < a.size(); ++i) a[i] = detail::gelu(a[i]);
  Vec o = p.gate_w2 * a + p.gate_b2;
  for (Eigen::Index i = 0; i < o.size(); ++i) o[i] = detail::sigmoid(o[i]);
  return o;
}

TokenizeResult tokenize_epoch(const Mat& h_tilde, const ModelParams& p, const ModelConfig& cfg) {
  const Eigen::Index n = h_tilde.cols();
  TokenizeResult r;
  if (cfg.pooling == TokenPooling::mean) {
    r.weights = Vec::Constant(n, 1.0 / static_cast<double>(n));
    r.u = h_tilde.rowwise().mean();
    return r;
  }
  Mat z = p.tok_w * h_tilde;
  z.colwise() += p.tok_b;
  z = z.array().tanh();
  const Vec scores = z.transpose() * p.tok_v;
  r.weights = detail::softmax(scores);
  r.u = h_tilde * r.weights;
  return r;
}

Mat build_attention_mask(int n, int radius, std::span<const std::uint8_t> m) {
  if (static_cast<int>(m.size()) != n) throw ParameterError("attention mask: length mismatch");
  Mat out = Mat::Constant(n, n, kMasked);
  for (int i = 0; i < n; ++i) {
    bool any = false;
    for (int j = std::max(0, i - radius); j <= std::min(n - 1, i + radius); ++j) {
      if (m[static_cast<std::size_t>(j)]) {
        out(i, j) = 0.0;
        any = true;
      }
    }
    if (!any) out(i, i) = 0.0;
  }
  return out;
}

LtamResult ltam_forward(const Mat& tokens, const Mat& mask, const ModelParams& p) {
  const Eigen::Index n = tokens.rows();
  if (mask.rows() != n || mask.cols() != n) throw InternalError("ltam: mask shape mismatch");
  const Mat q = tokens * p.wq.transpose();
  const Mat k = tokens * p.wk.transpose();
  const Mat v = tokens * p.wv.transpose();
  const double scale = 1.0 / std::sqrt(static_cast<double>(p.wq.rows()));
  const Mat logits = (q * k.transpose()) * scale + mask;
  LtamResult r;
  r.alpha.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r.alpha.row(i) = detail::softmax(logits.row(i).transpose()).transpose();
  }
  r.z = tokens + (r.alpha * v) * p.wo.transpose();
  return r;
}

Vec elif_step(ElifState& s, const Vec& z, bool valid, double leak) {
  if (s.h.size() != z.size()) {
    s.h = Vec::Zero(z.size());
    s.n = 0;
  }
  if (!valid) {
    s.h.setZero();
    s.n = 0;
  }
  s.h = leak * s.h + z;
  s.n += 1;
  return s.h / static_cast<double>(std::max(s.n, 1L));
}

Classification classify(const Vec& h_bar, const ModelParams& p) {
  Classification c;
  c.logits = p.head_w * h_bar + p.head_b;
  c.probs = detail::softmax(c.logits);
  c.probs.maxCoeff(&c.stage);
  return c;
}

double spike_rate(std::span<const Vec> states, double theta) {
  std::size_t total = 0;
  std::size_t fired = 0;
  for (const Vec& h : states) {
    total += static_cast<std::size_t>(h.size());
    for (Eigen::Index i = 0; i < h.size(); ++i) fired += std::abs(h[i]) >= theta ? 1 : 0;
  }
  if (total == 0) throw MetricError("spike_rate: no valid epochs");
  return static_cast<double>(fired) / static_cast<double>(total);
}

Window make_window(std::span<const Raster> rasters, std::span<const std::uint8_t> mask,
                   std::size_t center, int radius) {
  if (rasters.size() != mask.size()) throw ParameterError("make_window: mask length mismatch");
  if (center >= rasters.size()) throw ParameterError("make_window: centre out of range");
  Window w;
  const auto c = static_cast<long>(center);
  for (long e = c - radius; e <= c + radius; ++e) {
    const bool present = e >= 0 && e < static_cast<long>(rasters.size());
    w.slots.push_back(present ? &rasters[static_cast<std::size_t>(e)] : nullptr);
    w.mask.push_back(present ? mask[static_cast<std::size_t>(e)] : 0);
  }
  return w;
}

namespace {

ForwardResult window_forward(Mat tokens, std::span<const std::uint8_t> mask, const ModelParams& p,
                             const ModelConfig& cfg) {
  const int n = static_cast<int>(tokens.rows());
  const int c = n / 2;
  ForwardResult r;
  r.attention = ltam_forward(tokens, build_attention_mask(n, cfg.window_radius, mask), p);
  r.tokens = std::move(tokens);
  const Mat& z = r.attention.z;
  if (!cfg.use_elif) {
    r.center = classify(z.row(c).transpose(), p);
    r.chain_logits.push_back(r.center.logits);
    return r;
  }
  ElifState st;
  st.h = Vec::Zero(z.cols());
  for (int j = 0; j < c; ++j) {
    if (!mask[static_cast<std::size_t>(j)]) {
      st.h.setZero();
      st.n = 0;
      continue;
    }
    const Vec hb = elif_step(st, z.row(j).transpose(), true, cfg.leak);
    r.chain_logits.push_back(classify(hb, p).logits);
    r.states.push_back(st.h);
  }
  const Vec hb = elif_step(st, z.row(c).transpose(), mask[static_cast<std::size_t>(c)] != 0, cfg.leak);
  r.states.push_back(st.h);
  r.center = classify(hb, p);
  r.chain_logits.push_back(r.center.logits);
  return r;
}

}  // namespace

ForwardResult forward(const Window& window, const ModelParams& p, const ModelConfig& cfg) {
  const int n = cfg.slots();
  if (static_cast<int>(window.slots.size()) != n || window.mask.size() != window.slots.size()) {
    throw ParameterError("forward: window must hold 2L + 1 slots");
  }
  Mat tokens = Mat::Zero(n, cfg.fused_width);
  std::vector<std::uint8_t> mask = window.mask;
  for (int j = 0; j < n; ++j) {
    const Raster* r = window.slots[static_cast<std::size_t>(j)];
    if (r == nullptr) {
      mask[static_cast<std::size_t>(j)] = 0;
      continue;
    }
    tokens.row(j) = encode_one(*r, p, cfg).transpose();
  }
  return window_forward(std::move(tokens), mask, p, cfg);
}

Mat encode_tokens(std::span<const Raster> rasters, const ModelParams& p, const ModelConfig& cfg) {
  Mat out(static_cast<Eigen::Index>(rasters.size()), cfg.fused_width);
  for (std::size_t i = 0; i < rasters.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = encode_one(rasters[i], p, cfg).transpose();
  }
  return out;
}

ForwardResult forward_from_tokens(const Mat& tokens, std::span<const std::uint8_t> mask,
                                  std::size_t center, const ModelParams& p, const ModelConfig& cfg) {
  if (static_cast<std::size_t>(tokens.rows()) != mask.size()) {
    throw ParameterError("forward_from_tokens: mask length mismatch");
  }
  if (center >= mask.size()) throw ParameterError("forward_from_tokens: centre out of range");
  const int n = cfg.slots();
  Mat win = Mat::Zero(n, tokens.cols());
  std::vector<std::uint8_t> wmask(static_cast<std::size_t>(n), 0);
  const long c = static_cast<long>(center);
  for (int j = 0; j < n; ++j) {
    const long e = c - cfg.window_radius + j;
    if (e < 0 || e >= tokens.rows()) continue;
    win.row(j) = tokens.row(e);
    wmask[static_cast<std::size_t>(j)] = mask[static_cast<std::size_t>(e)];
  }
  return window_forward(std::move(win), wmask, p, cfg);
}

}  // namespace neurosleep::net
