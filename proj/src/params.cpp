#include "neurosleep/params.hpp"

#include <cmath>
#include <random>

#include "neurosleep/errors.hpp"

namespace neurosleep::net {

std::string_view profile_name(Profile p) {
  return p == Profile::paper_scale ? "paper_scale" : "desk";
}

Profile parse_profile(std::string_view name) {
  if (name == "desk") return Profile::desk;
  if (name == "paper_scale") return Profile::paper_scale;
  throw ParameterError("unknown profile '" + std::string(name) + "' (desk|paper_scale)");
}

ModelConfig ModelConfig::for_profile(Profile p) {
  ModelConfig c;
  c.profile = p;
  if (p == Profile::paper_scale) {
    c.branch_width = 128;
    c.fused_width = 384;
    c.attn_dim = 384;
  }
  return c;
}

void ModelConfig::validate() const {
  for (int k : kernel_sizes) {
    if (k < 1 || k % 2 == 0) throw ParameterError("model: kernel sizes must be odd and >= 1");
  }
  if (branch_width < 1 || fused_width < 1 || attn_dim < 1) {
    throw ParameterError("model: widths must be >= 1");
  }
  if (gate_reduction < 1 || fused_width % gate_reduction != 0) {
    throw ParameterError("model: gate_reduction must divide fused_width");
  }
  if (window_radius < 0) throw ParameterError("model: window_radius must be >= 0");
  if (!(leak > 0 && leak < 1)) throw ParameterError("model: leak must be in (0, 1)");
  if (!std::isfinite(fire_threshold)) throw ParameterError("model: fire_threshold must be finite");
  if (n_classes < 2) throw ParameterError("model: n_classes must be >= 2");
  if (epoch_samples < 1) throw ParameterError("model: epoch_samples must be >= 1");
}

std::vector<TensorView> tensor_views(ModelParams& p) {
  std::vector<TensorView> out;
  auto add_mat = [&](std::string name, Mat& m, bool learnable = true) {
    out.push_back({std::move(name), {static_cast<int>(m.rows()), static_cast<int>(m.cols())}, m.data(),
                   static_cast<std::size_t>(m.size()), learnable});
  };
  auto add_vec = [&](std::string name, Vec& v, bool learnable = true) {
    out.push_back({std::move(name), {static_cast<int>(v.size())}, v.data(),
                   static_cast<std::size_t>(v.size()), learnable});
  };
  for (std::size_t b = 0; b < p.branches.size(); ++b) {
    auto& br = p.branches[b];
    const std::string pre = "eamr.branch" + std::to_string(b) + ".";
    add_mat(pre + "dw", br.dw);
    add_mat(pre + "pw", br.pw);
    add_vec(pre + "bn.gamma", br.gamma);
    add_vec(pre + "bn.beta", br.beta);
    add_vec(pre + "bn.running_mean", br.running_mean, false);
    add_vec(pre + "bn.running_var", br.running_var, false);
  }
  add_mat("eamr.fuse.weight", p.fuse_w);
  add_vec("eamr.fuse.bias", p.fuse_b);
  add_mat("eamr.gate.w1", p.gate_w1);
  add_vec("eamr.gate.b1", p.gate_b1);
  add_mat("eamr.gate.w2", p.gate_w2);
  add_vec("eamr.gate.b2", p.gate_b2);
  add_mat("tokenizer.weight", p.tok_w);
  add_vec("tokenizer.bias", p.tok_b);
  add_vec("tokenizer.score", p.tok_v);
  add_mat("ltam.wq", p.wq);
  add_mat("ltam.wk", p.wk);
  add_mat("ltam.wv", p.wv);
  add_mat("ltam.wo", p.wo);
  add_mat("head.weight", p.head_w);
  add_vec("head.bias", p.head_b);
  return out;
}

ModelParams zero_params(const ModelConfig& cfg) {
  cfg.validate();
  const int w = cfg.branch_channels();
  const int c = cfg.fused_width;
  const int h = cfg.gate_hidden();
  const int d = cfg.attn_dim;
  ModelParams p;
  for (int b = 0; b < cfg.n_branches(); ++b) {
    BranchParams br;
    br.dw = Mat::Zero(4, cfg.branch_kernel(b));
    br.pw = Mat::Zero(w, 4);
    br.gamma = Vec::Zero(w);
    br.beta = Vec::Zero(w);
    br.running_mean = Vec::Zero(w);
    br.running_var = Vec::Zero(w);
    p.branches.push_back(std::move(br));
  }
  p.fuse_w = Mat::Zero(c, cfg.concat_width());
  p.fuse_b = Vec::Zero(c);
  p.gate_w1 = Mat::Zero(h, c);
  p.gate_b1 = Vec::Zero(h);
  p.gate_w2 = Mat::Zero(c, h);
  p.gate_b2 = Vec::Zero(c);
  p.tok_w = Mat::Zero(c, c);
  p.tok_b = Vec::Zero(c);
  p.tok_v = Vec::Zero(c);
  p.wq = Mat::Zero(d, c);
  p.wk = Mat::Zero(d, c);
  p.wv = Mat::Zero(d, c);
  p.wo = Mat::Zero(c, d);
  p.head_w = Mat::Zero(cfg.n_classes, c);
  p.head_b = Vec::Zero(cfg.n_classes);
  return p;
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = zero_params(cfg);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto fill = [&](double* data, Eigen::Index n, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < n; ++i) data[i] = static_cast<float>(bound * unit(rng));
  };
  for (int b = 0; b < cfg.n_branches(); ++b) {
    auto& br = p.branches[static_cast<std::size_t>(b)];
    fill(br.dw.data(), br.dw.size(), cfg.branch_kernel(b));
    fill(br.pw.data(), br.pw.size(), 4);
    br.gamma.setOnes();
    br.running_var.setOnes();
  }
  const int c = cfg.fused_width;
  fill(p.fuse_w.data(), p.fuse_w.size(), cfg.concat_width());
  fill(p.fuse_b.data(), p.fuse_b.size(), cfg.concat_width());
  fill(p.gate_w1.data(), p.gate_w1.size(), c);
  fill(p.gate_b1.data(), p.gate_b1.size(), c);
  fill(p.gate_w2.data(), p.gate_w2.size(), cfg.gate_hidden());
  fill(p.gate_b2.data(), p.gate_b2.size(), cfg.gate_hidden());
  fill(p.tok_w.data(), p.tok_w.size(), c);
  fill(p.tok_b.data(), p.tok_b.size(), c);
  fill(p.tok_v.data(), p.tok_v.size(), c);
  fill(p.wq.data(), p.wq.size(), c);
  fill(p.wk.data(), p.wk.size(), c);
  fill(p.wv.data(), p.wv.size(), c);
  fill(p.wo.data(), p.wo.size(), cfg.attn_dim);
  fill(p.head_w.data(), p.head_w.size(), c);
  fill(p.head_b.data(), p.head_b.size(), c);
  return p;
}

std::size_t param_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t w = static_cast<std::size_t>(cfg.branch_channels());
  const std::size_t c = static_cast<std::size_t>(cfg.fused_width);
  const std::size_t h = static_cast<std::size_t>(cfg.gate_hidden());
  const std::size_t d = static_cast<std::size_t>(cfg.attn_dim);
  const std::size_t k = static_cast<std::size_t>(cfg.n_classes);
  std::size_t n = 0;
  for (int b = 0; b < cfg.n_branches(); ++b) {
    n += 4 * static_cast<std::size_t>(cfg.branch_kernel(b)) + 4 * w + 2 * w;
  }
  n += c * static_cast<std::size_t>(cfg.concat_width()) + c;  // fusion
  n += h * c + h + c * h + c;                                 // gate
  n += c * c + c + c;                                         // tokenizer
  n += 3 * d * c + c * d;                                     // attention
  n += k * c + k;                                             // head
  return n;
}

bool params_equal(const ModelParams& a, const ModelParams& b) {
  auto va = tensor_views(const_cast<ModelParams&>(a));
  auto vb = tensor_views(const_cast<ModelParams&>(b));
  if (va.size() != vb.size()) return false;
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (va[i].shape != vb[i].shape) return false;
    for (std::size_t j = 0; j < va[i].size; ++j) {
      if (va[i].data[j] != vb[i].data[j]) return false;
    }
  }
  return true;
}

void round_to_float(ModelParams& p) {
  for (auto& t : tensor_views(p)) {
    for (double& v : t.values()) v = static_cast<float>(v);
  }
}

}  // namespace neurosleep::net
