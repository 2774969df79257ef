#include "neurosleep/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "eamr_kernels.hpp"
#include "neurosleep/csv.hpp"
#include "neurosleep/errors.hpp"
#include "neurosleep/network.hpp"

namespace neurosleep {

using net::Mat;
using net::ModelConfig;
using net::ModelParams;
using net::Vec;

void TrainConfig::validate() const {
  if (!(lr > 0)) throw ParameterError("train: lr must be > 0");
  if (!(weight_decay >= 0)) throw ParameterError("train: weight_decay must be >= 0");
  if (batch_size < 1) throw ParameterError("train: batch_size must be >= 1");
  if (block_size < 1 || block_size > batch_size) {
    throw ParameterError("train: block_size must be in [1, batch_size]");
  }
  if (max_epochs < 1) throw ParameterError("train: max_epochs must be >= 1");
  if (patience < 1 || patience > max_epochs) throw ParameterError("train: patience must be in [1, max_epochs]");
  if (!class_weights.empty()) {
    if (class_weights.size() != static_cast<std::size_t>(kNumStages)) {
      throw ParameterError("train: class_weights needs one weight per stage");
    }
    for (double w : class_weights) {
      if (!(w > 0)) throw ParameterError("train: class weights must be > 0");
    }
  }
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && eps > 0)) {
    throw ParameterError("train: invalid Adam constants");
  }
}

namespace {

// Everything the backward pass needs from one distinct epoch of the batch.
struct EpochWork {
  std::size_t rec = 0;
  std::size_t pos = 0;
  net::detail::SparseInput input;
  std::vector<Mat> xhat;  // per branch; holds the projection until normalised
  Mat a;                  // GELU outputs, concatenated branches
  Mat gp;                 // GELU derivatives, later dY
  Mat h;                  // fused map before gating
  Vec m, a1, ga, ga_d, g;
  Mat q;                  // tanh of tokenizer pre-activations
  Vec pi;
  Vec u;
  Vec du;
};

class BatchPass {
 public:
  BatchPass(const ModelParams& p, const ModelConfig& cfg, std::span<const PreparedRecording> data,
            std::span<const Sample> batch, std::span<const double> weights)
      : p_(p), cfg_(cfg), data_(data), batch_(batch), weights_(weights) {}

  LossGrad run(bool need_grad) {
    collect();
    project();
    normalise();
    for (auto& w : works_) encode(w);
    LossGrad out;
    if (need_grad) out.grad = net::zero_params(cfg_);
    grad_ = need_grad ? &out.grad : nullptr;
    out.loss = heads();
    if (!std::isfinite(out.loss)) throw NumericError("loss is not finite (" + offending_tensor() + ")");
    if (need_grad) {
      for (auto& w : works_) backward_epoch(w);
      for (std::size_t b = 0; b < dgamma_.size(); ++b) {
        out.grad.branches[b].gamma += dgamma_[b];
        out.grad.branches[b].beta += dbeta_[b];
      }
      for (auto& w : works_) backward_branches(w);
    }
    out.bn_mean = mean_;
    out.bn_var = var_;
    out.bn_count = count_;
    return out;
  }

 private:
  const ModelParams& p_;
  const ModelConfig& cfg_;
  std::span<const PreparedRecording> data_;
  std::span<const Sample> batch_;
  std::span<const double> weights_;
  ModelParams* grad_ = nullptr;

  std::vector<EpochWork> works_;
  std::vector<std::vector<int>> slot_work_;  // per sample, per slot: work index or -1
  std::vector<Vec> mean_, var_, inv_std_;
  std::vector<Vec> dgamma_, dbeta_;
  std::size_t count_ = 0;

  int n_slots() const { return cfg_.slots(); }

  void collect() {
    if (batch_.empty()) throw ParameterError("loss_and_grad: empty batch");
    std::map<std::pair<std::size_t, std::size_t>, int> index;
    for (const Sample& s : batch_) {
      if (s.recording >= data_.size()) throw ParameterError("loss_and_grad: recording out of range");
      const auto& rec = data_[s.recording];
      if (s.center >= rec.batch.size()) throw ParameterError("loss_and_grad: centre out of range");
      if (rec.labels.size() != rec.batch.size()) throw ParameterError("loss_and_grad: unlabeled recording");
      const long c = static_cast<long>(s.center);
      for (long e = c - cfg_.window_radius; e <= c + cfg_.window_radius; ++e) {
        if (e < 0 || e >= static_cast<long>(rec.batch.size())) continue;
        index.emplace(std::make_pair(s.recording, static_cast<std::size_t>(e)), 0);
      }
    }
    int next = 0;
    for (auto& [key, idx] : index) {
      idx = next++;
      EpochWork w;
      w.rec = key.first;
      w.pos = key.second;
      works_.push_back(std::move(w));
    }
    for (const Sample& s : batch_) {
      std::vector<int> slots(static_cast<std::size_t>(n_slots()), -1);
      const long c = static_cast<long>(s.center);
      const auto n = static_cast<long>(data_[s.recording].batch.size());
      for (int j = 0; j < n_slots(); ++j) {
        const long e = c - cfg_.window_radius + j;
        if (e >= 0 && e < n) slots[static_cast<std::size_t>(j)] = index.at({s.recording, static_cast<std::size_t>(e)});
      }
      slot_work_.push_back(std::move(slots));
    }
  }

  void project() {
    const int nb = cfg_.n_branches();
    mean_.assign(static_cast<std::size_t>(nb), Vec::Zero(cfg_.branch_channels()));
    Mat d;
    for (auto& w : works_) {
      const Raster& r = data_[w.rec].batch.rasters[w.pos];
      if (static_cast<int>(r.length) != cfg_.epoch_samples) {
        throw InternalError("raster length does not match the model's epoch length");
      }
      w.input = net::detail::expand_sparse(r);
      for (int b = 0; b < nb; ++b) {
        const auto& br = p_.branches[static_cast<std::size_t>(b)];
        net::detail::depthwise(w.input, br.dw, d);
        w.xhat.push_back(br.pw * d);
        mean_[static_cast<std::size_t>(b)] += w.xhat.back().rowwise().sum();
      }
    }
    count_ = works_.size() * static_cast<std::size_t>(cfg_.epoch_samples);
    for (auto& m : mean_) m /= static_cast<double>(count_);
  }

  void normalise() {
    const int nb = cfg_.n_branches();
    var_.assign(static_cast<std::size_t>(nb), Vec::Zero(cfg_.branch_channels()));
    for (auto& w : works_) {
      for (int b = 0; b < nb; ++b) {
        var_[b] += (w.xhat[b].colwise() - mean_[b]).array().square().matrix().rowwise().sum();
      }
    }
    for (int b = 0; b < nb; ++b) {
      var_[b] /= static_cast<double>(count_);
      inv_std_.push_back((var_[b].array() + net::kBnEps).rsqrt().matrix());
    }
    for (auto& w : works_) {
      for (int b = 0; b < nb; ++b) {
        Mat& x = w.xhat[b];
        x.colwise() -= mean_[b];
        for (Eigen::Index c = 0; c < x.rows(); ++c) x.row(c) *= inv_std_[b][c];
      }
    }
  }

  void encode(EpochWork& w) {
    const int wc = cfg_.branch_channels();
    const Eigen::Index t_b = cfg_.epoch_samples;
    w.a.resize(cfg_.concat_width(), t_b);
    w.gp.resize(cfg_.concat_width(), t_b);
    for (int b = 0; b < cfg_.n_branches(); ++b) {
      const auto& br = p_.branches[static_cast<std::size_t>(b)];
      for (int c = 0; c < wc; ++c) {
        const double* x = w.xhat[b].row(c).data();
        double* a = w.a.row(b * wc + c).data();
        double* gp = w.gp.row(b * wc + c).data();
        for (Eigen::Index t = 0; t < t_b; ++t) a[t] = net::detail::gelu(br.gamma[c] * x[t] + br.beta[c], gp[t]);
      }
    }
    w.h = p_.fuse_w * w.a;
    w.h.colwise() += p_.fuse_b;
    w.m = w.h.rowwise().mean();
    if (cfg_.gate_bypass) {
      w.g = Vec::Ones(cfg_.fused_width);
    } else {
      w.a1 = p_.gate_w1 * w.m + p_.gate_b1;
      w.ga.resize(w.a1.size());
      w.ga_d.resize(w.a1.size());
      for (Eigen::Index i = 0; i < w.a1.size(); ++i) w.ga[i] = net::detail::gelu(w.a1[i], w.ga_d[i]);
      const Vec o = p_.gate_w2 * w.ga + p_.gate_b2;
      w.g.resize(o.size());
      for (Eigen::Index i = 0; i < o.size(); ++i) w.g[i] = net::detail::sigmoid(o[i]);
    }
    const Mat ht = gated(w);
    if (cfg_.pooling == net::TokenPooling::mean) {
      w.pi = Vec::Constant(t_b, 1.0 / static_cast<double>(t_b));
      w.u = ht.rowwise().mean();
    } else {
      Mat z = p_.tok_w * ht;
      z.colwise() += p_.tok_b;
      w.q = z.array().tanh();
      w.pi = net::detail::softmax(w.q.transpose() * p_.tok_v);
      w.u = ht * w.pi;
    }
    w.du = Vec::Zero(cfg_.fused_width);
  }

  static Mat gated(const EpochWork& w) {
    Mat ht = w.h;
    for (Eigen::Index c = 0; c < ht.rows(); ++c) ht.row(c) *= w.g[c];
    return ht;
  }

  double class_weight(int label) const {
    return weights_.empty() ? 1.0 : weights_[static_cast<std::size_t>(label)];
  }

  double heads() {
    double weight_sum = 0.0;
    for (const Sample& s : batch_) weight_sum += class_weight(data_[s.recording].labels[s.center]);
    double loss = 0.0;
    const int n = n_slots();
    const int cidx = n / 2;
    for (std::size_t si = 0; si < batch_.size(); ++si) {
      const Sample& s = batch_[si];
      const auto& rec = data_[s.recording];
      const int label = rec.labels[s.center];
      if (label < 0 || label >= cfg_.n_classes) throw FormatError("loss_and_grad: label outside class range");
      Mat u = Mat::Zero(n, cfg_.fused_width);
      std::vector<std::uint8_t> mask(static_cast<std::size_t>(n), 0);
      for (int j = 0; j < n; ++j) {
        const int wi = slot_work_[si][static_cast<std::size_t>(j)];
        if (wi < 0) continue;
        u.row(j) = works_[static_cast<std::size_t>(wi)].u.transpose();
        mask[static_cast<std::size_t>(j)] = rec.batch.mask[works_[static_cast<std::size_t>(wi)].pos];
      }
      const Mat amask = net::build_attention_mask(n, cfg_.window_radius, mask);
      const Mat q = u * p_.wq.transpose();
      const Mat k = u * p_.wk.transpose();
      const Mat v = u * p_.wv.transpose();
      const double scale = 1.0 / std::sqrt(static_cast<double>(cfg_.attn_dim));
      const Mat logits = (q * k.transpose()) * scale + amask;
      Mat alpha(n, n);
      for (int i = 0; i < n; ++i) alpha.row(i) = net::detail::softmax(logits.row(i).transpose()).transpose();
      const Mat ctx = alpha * v;
      const Mat z = u + ctx * p_.wo.transpose();

      // Leaky state over the run of valid slots ending at the centre.
      Vec hbar;
      int run_start = cidx;
      long run_len = 1;
      if (cfg_.use_elif) {
        net::ElifState st;
        st.h = Vec::Zero(cfg_.fused_width);
        for (int j = 0; j < cidx; ++j) {
          if (!mask[static_cast<std::size_t>(j)]) {
            st.h.setZero();
            st.n = 0;
            continue;
          }
          net::elif_step(st, z.row(j).transpose(), true, cfg_.leak);
        }
        hbar = net::elif_step(st, z.row(cidx).transpose(), mask[static_cast<std::size_t>(cidx)] != 0, cfg_.leak);
        run_len = st.n;
        run_start = cidx - static_cast<int>(run_len) + 1;
      } else {
        hbar = z.row(cidx).transpose();
      }
      const Vec out = p_.head_w * hbar + p_.head_b;
      const Vec prob = net::detail::softmax(out);
      const double cw = class_weight(label);
      loss += cw * -std::log(prob[label]) / weight_sum;
      if (grad_ == nullptr) continue;

      Vec dlogits = prob;
      dlogits[label] -= 1.0;
      dlogits *= cw / weight_sum;
      grad_->head_w += dlogits * hbar.transpose();
      grad_->head_b += dlogits;
      const Vec dhbar = p_.head_w.transpose() * dlogits;

      Mat dz = Mat::Zero(n, cfg_.fused_width);
      double decay = 1.0 / static_cast<double>(run_len);
      for (int j = cidx; j >= run_start; --j) {
        dz.row(j) = decay * dhbar.transpose();
        decay *= cfg_.leak;
      }

      Mat du = dz;
      grad_->wo += dz.transpose() * ctx;
      const Mat dctx = dz * p_.wo;
      const Mat dalpha = dctx * v.transpose();
      const Mat dv = alpha.transpose() * dctx;
      Mat ds(n, n);
      for (int i = 0; i < n; ++i) {
        const double r = alpha.row(i).dot(dalpha.row(i));
        ds.row(i) = alpha.row(i).array() * (dalpha.row(i).array() - r);
      }
      ds *= scale;
      const Mat dq = ds * k;
      const Mat dk = ds.transpose() * q;
      grad_->wq += dq.transpose() * u;
      grad_->wk += dk.transpose() * u;
      grad_->wv += dv.transpose() * u;
      du += dq * p_.wq + dk * p_.wk + dv * p_.wv;
      for (int j = 0; j < n; ++j) {
        const int wi = slot_work_[si][static_cast<std::size_t>(j)];
        if (wi >= 0) works_[static_cast<std::size_t>(wi)].du += du.row(j).transpose();
      }
    }
    return loss;
  }

  void backward_epoch(EpochWork& w) {
    ModelParams& g = *grad_;
    const Eigen::Index t_b = cfg_.epoch_samples;
    const Mat ht = gated(w);
    Mat dht;
    if (cfg_.pooling == net::TokenPooling::mean) {
      dht = w.du * Vec::Constant(t_b, 1.0 / static_cast<double>(t_b)).transpose();
    } else {
      dht = w.du * w.pi.transpose();
      const Vec dpi = ht.transpose() * w.du;
      const double dot = w.pi.dot(dpi);
      const Vec ds = w.pi.array() * (dpi.array() - dot);
      g.tok_v += w.q * ds;
      const Mat dzt = (p_.tok_v * ds.transpose()).array() * (1.0 - w.q.array().square());
      g.tok_w += dzt * ht.transpose();
      g.tok_b += dzt.rowwise().sum();
      dht += p_.tok_w.transpose() * dzt;
    }
    Mat dh = dht;
    for (Eigen::Index c = 0; c < dh.rows(); ++c) dh.row(c) *= w.g[c];
    if (!cfg_.gate_bypass) {
      const Vec dg = (dht.array() * w.h.array()).rowwise().sum();
      const Vec dout = dg.array() * w.g.array() * (1.0 - w.g.array());
      g.gate_w2 += dout * w.ga.transpose();
      g.gate_b2 += dout;
      const Vec da1 = (p_.gate_w2.transpose() * dout).array() * w.ga_d.array();
      g.gate_w1 += da1 * w.m.transpose();
      g.gate_b1 += da1;
      const Vec dm = p_.gate_w1.transpose() * da1;
      dh.colwise() += dm / static_cast<double>(t_b);
    }
    g.fuse_w += dh * w.a.transpose();
    g.fuse_b += dh.rowwise().sum();
    w.gp.array() *= (p_.fuse_w.transpose() * dh).array();

    const int wc = cfg_.branch_channels();
    if (dgamma_.empty()) {
      dgamma_.assign(static_cast<std::size_t>(cfg_.n_branches()), Vec::Zero(wc));
      dbeta_.assign(static_cast<std::size_t>(cfg_.n_branches()), Vec::Zero(wc));
    }
    for (int b = 0; b < cfg_.n_branches(); ++b) {
      const auto dy = w.gp.middleRows(b * wc, wc);
      dgamma_[b] += (dy.array() * w.xhat[b].array()).matrix().rowwise().sum();
      dbeta_[b] += dy.rowwise().sum();
    }
    w.a.resize(0, 0);
    w.h.resize(0, 0);
    w.q.resize(0, 0);
  }

  void backward_branches(EpochWork& w) {
    ModelParams& g = *grad_;
    const int wc = cfg_.branch_channels();
    const double inv_count = 1.0 / static_cast<double>(count_);
    Mat d;
    for (int b = 0; b < cfg_.n_branches(); ++b) {
      const auto& br = p_.branches[static_cast<std::size_t>(b)];
      auto& gb = g.branches[static_cast<std::size_t>(b)];
      Mat dp = w.gp.middleRows(b * wc, wc);
      for (int c = 0; c < wc; ++c) {
        const double s = br.gamma[c] * inv_std_[b][c];
        const double mb = dbeta_[b][c] * inv_count;
        const double mg = dgamma_[b][c] * inv_count;
        dp.row(c) = s * (dp.row(c).array() - mb - w.xhat[b].row(c).array() * mg);
      }
      net::detail::depthwise(w.input, br.dw, d);
      gb.pw += dp * d.transpose();
      const Mat dd = br.pw.transpose() * dp;
      net::detail::depthwise_grad(w.input, dd, gb.dw);
    }
    w.gp.resize(0, 0);
    w.xhat.clear();
  }

  std::string offending_tensor() const {
    for (const auto& t : net::tensor_views(const_cast<ModelParams&>(p_))) {
      for (double v : t.values()) {
        if (!std::isfinite(v)) return "non-finite values in tensor " + t.name;
      }
    }
    return "parameters finite; overflow in the forward pass";
  }
};

}  // namespace

LossGrad loss_and_grad(const ModelParams& p, const ModelConfig& cfg, std::span<const PreparedRecording> data,
                       std::span<const Sample> batch, std::span<const double> class_weights) {
  return BatchPass(p, cfg, data, batch, class_weights).run(true);
}

double batch_loss(const ModelParams& p, const ModelConfig& cfg, std::span<const PreparedRecording> data,
                  std::span<const Sample> batch, std::span<const double> class_weights) {
  return BatchPass(p, cfg, data, batch, class_weights).run(false).loss;
}

void update_running_stats(ModelParams& p, const LossGrad& lg) {
  const double n = static_cast<double>(lg.bn_count);
  const double unbias = n > 1 ? n / (n - 1) : 1.0;
  for (std::size_t b = 0; b < p.branches.size(); ++b) {
    auto& br = p.branches[b];
    br.running_mean = (1 - net::kBnMomentum) * br.running_mean + net::kBnMomentum * lg.bn_mean[b];
    br.running_var = (1 - net::kBnMomentum) * br.running_var + net::kBnMomentum * unbias * lg.bn_var[b];
  }
}

AdamState AdamState::zeros(const ModelConfig& cfg) {
  return AdamState{net::zero_params(cfg), net::zero_params(cfg), 0};
}

void adamw_step(ModelParams& p, const ModelParams& grad, AdamState& state, const TrainConfig& cfg) {
  auto vp = net::tensor_views(p);
  auto vg = net::tensor_views(const_cast<ModelParams&>(grad));
  auto vm = net::tensor_views(state.m);
  auto vv = net::tensor_views(state.v);
  if (vp.size() != vg.size() || vp.size() != vm.size() || vp.size() != vv.size()) {
    throw InternalError("adamw: tensor lists differ");
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const double decay = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t i = 0; i < vp.size(); ++i) {
    if (vp[i].shape != vg[i].shape || vp[i].shape != vm[i].shape || vp[i].shape != vv[i].shape) {
      throw InternalError("adamw: shape mismatch for " + vp[i].name);
    }
    if (!vp[i].learnable) continue;
    for (std::size_t j = 0; j < vp[i].size; ++j) {
      const double g = vg[i].data[j];
      double& m = vm[i].data[j];
      double& v = vv[i].data[j];
      double& w = vp[i].data[j];
      w *= decay;
      m = cfg.beta1 * m + (1 - cfg.beta1) * g;
      v = cfg.beta2 * v + (1 - cfg.beta2) * g * g;
      w -= cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
    }
  }
}

bool EarlyStopper::update(double metric) {
  if (!seen_ || metric > best_) {
    seen_ = true;
    best_ = metric;
    stale_ = 0;
    last_improved_ = true;
  } else {
    ++stale_;
    last_improved_ = false;
  }
  return stale_ >= patience_;
}

std::string history_csv(std::span<const HistoryRow> rows) {
  std::ostringstream ss;
  ss << kHistoryCsvHeader << '\n';
  for (const auto& r : rows) {
    ss << r.epoch << ',' << csv::num(r.train_loss) << ',' << csv::num(r.val_accuracy) << ','
       << csv::num(r.best_so_far) << '\n';
  }
  return ss.str();
}

std::vector<std::vector<Sample>> make_minibatches(std::span<const PreparedRecording> data,
                                                  const TrainConfig& cfg, int epoch) {
  std::vector<std::vector<Sample>> blocks;
  for (std::size_t r = 0; r < data.size(); ++r) {
    const std::size_t n = data[r].batch.size();
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.block_size)) {
      std::vector<Sample> block;
      for (std::size_t c = start; c < std::min(n, start + static_cast<std::size_t>(cfg.block_size)); ++c) {
        block.push_back({r, c});
      }
      blocks.push_back(std::move(block));
    }
  }
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  std::mt19937_64 rng(seq);
  std::shuffle(blocks.begin(), blocks.end(), rng);
  std::vector<std::vector<Sample>> batches;
  for (auto& block : blocks) {
    if (batches.empty() || batches.back().size() + block.size() > static_cast<std::size_t>(cfg.batch_size)) {
      batches.emplace_back();
    }
    batches.back().insert(batches.back().end(), block.begin(), block.end());
  }
  return batches;
}

Prediction predict(const ModelParams& p, const ModelConfig& cfg, const PreparedRecording& rec) {
  Prediction out;
  if (rec.batch.size() == 0) return out;
  const Mat tokens = net::encode_tokens(rec.batch.rasters, p, cfg);
  for (std::size_t c = 0; c < rec.batch.size(); ++c) {
    auto r = net::forward_from_tokens(tokens, rec.batch.mask, c, p, cfg);
    out.stages.push_back(r.center.stage);
    out.probs.push_back(r.center.probs);
    if (cfg.use_elif && rec.batch.mask[c]) out.states.push_back(r.states.back());
  }
  return out;
}

TrainResult train(std::span<const PreparedRecording> train_set, std::span<const PreparedRecording> val_set,
                  const ModelConfig& model, const TrainConfig& cfg, const ProgressFn& progress) {
  cfg.validate();
  model.validate();
  std::size_t n_train = 0, n_val = 0;
  for (const auto& r : train_set) n_train += r.labels.size();
  for (const auto& r : val_set) n_val += r.labels.size();
  if (n_train == 0) throw ParameterError("train: empty training split");
  if (n_val == 0) throw ParameterError("train: empty validation split");

  ModelParams params = net::init_params(model, cfg.seed);
  AdamState adam = AdamState::zeros(model);
  EarlyStopper stopper(cfg.patience);
  TrainResult result;
  double best_acc = 0.0;
  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (const auto& batch : make_minibatches(train_set, cfg, epoch)) {
      const LossGrad lg = loss_and_grad(params, model, train_set, batch, cfg.class_weights);
      update_running_stats(params, lg);
      adamw_step(params, lg.grad, adam, cfg);
      loss_sum += lg.loss * static_cast<double>(batch.size());
      seen += batch.size();
    }
    ModelParams snapshot = params;
    net::round_to_float(snapshot);
    std::size_t correct = 0;
    double val_loss = 0.0;
    for (const auto& rec : val_set) {
      const auto pred = predict(snapshot, model, rec);
      for (std::size_t i = 0; i < rec.labels.size(); ++i) {
        correct += pred.stages[i] == rec.labels[i] ? 1 : 0;
        val_loss -= std::log(std::max(pred.probs[i][rec.labels[i]], 1e-300));
      }
    }
    const double acc = static_cast<double>(correct) / static_cast<double>(n_val);
    val_loss /= static_cast<double>(n_val);
    const bool stop = stopper.update(cfg.monitor == Monitor::val_accuracy ? acc : -val_loss);
    if (stopper.last_improved()) {
      result.best = std::move(snapshot);
      result.best_epoch = epoch;
      best_acc = acc;
    }
    HistoryRow row{epoch, loss_sum / static_cast<double>(seen), acc, best_acc};
    result.history.push_back(row);
    if (progress) progress(row);
    if (stop) break;
  }
  return result;
}

CvPlan cv_split(std::span<const std::string> subjects, int n_folds, double val_fraction, std::uint64_t seed) {
  std::vector<std::string> ids(subjects.begin(), subjects.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (n_folds < 2) throw ParameterError("cv_split: need at least 2 folds");
  if (ids.size() < static_cast<std::size_t>(n_folds)) {
    throw ParameterError("cv_split: " + std::to_string(ids.size()) + " subjects for " +
                         std::to_string(n_folds) + " folds");
  }
  if (!(val_fraction >= 0 && val_fraction < 1)) throw ParameterError("cv_split: val_fraction must be in [0, 1)");
  std::mt19937_64 rng(seed);
  std::shuffle(ids.begin(), ids.end(), rng);

  CvPlan plan;
  plan.n_folds = n_folds;
  plan.val_fraction = val_fraction;
  plan.seed = seed;
  for (std::size_t i = 0; i < ids.size(); ++i) plan.subject_to_fold[ids[i]] = static_cast<int>(i % n_folds);
  for (int f = 0; f < n_folds; ++f) {
    CvFold fold;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      (static_cast<int>(i % n_folds) == f ? fold.test : rest).push_back(ids[i]);
    }
    std::mt19937_64 fold_rng(seed + 1 + static_cast<std::uint64_t>(f));
    std::shuffle(rest.begin(), rest.end(), fold_rng);
    const auto n_val = static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(rest.size()) - 1e-9));
    fold.val.assign(rest.begin(), rest.begin() + static_cast<long>(n_val));
    fold.train.assign(rest.begin() + static_cast<long>(n_val), rest.end());
    std::sort(fold.test.begin(), fold.test.end());
    std::sort(fold.val.begin(), fold.val.end());
    std::sort(fold.train.begin(), fold.train.end());
    plan.folds.push_back(std::move(fold));
  }
  return plan;
}

std::string cv_plan_csv(const CvPlan& plan) {
  std::ostringstream ss;
  ss << "fold,subject,role\n";
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const auto& fold = plan.folds[f];
    for (const auto* list : {&fold.train, &fold.val, &fold.test}) {
      const char* role = list == &fold.train ? "train" : list == &fold.val ? "val" : "test";
      for (const auto& s : *list) ss << f << ',' << s << ',' << role << '\n';
    }
  }
  return ss.str();
}

}  // namespace neurosleep
