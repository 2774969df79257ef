#include "neurosleep/efficiency.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "neurosleep/csv.hpp"
#include "neurosleep/errors.hpp"

namespace neurosleep {

double depthwise_flops(double t, double c_in, double k) { return kFlopsPerMac * t * c_in * k; }
double pointwise_flops(double t, double c_in, double c_out) { return kFlopsPerMac * t * c_in * c_out; }
double linear_flops(double fan_in, double fan_out) { return kFlopsPerMac * fan_in * fan_out; }

double OpsBreakdown::total() const {
  double s = 0.0;
  for (const auto& st : stages) s += st.flops;
  return s;
}

double OpsBreakdown::sparse_total() const {
  double s = 0.0;
  for (const auto& st : stages) s += st.sparse ? st.flops : 0.0;
  return s;
}

double OpsBreakdown::dense_total() const {
  double s = 0.0;
  for (const auto& st : stages) s += st.sparse ? 0.0 : st.flops;
  return s;
}

StageCount& OpsBreakdown::stage(std::string_view name) {
  for (auto& st : stages) {
    if (st.name == name) return st;
  }
  throw ParameterError("no stage named '" + std::string(name) + "'");
}

OpsBreakdown count_flops(const net::ModelConfig& cfg) {
  cfg.validate();
  const double t = cfg.epoch_samples;
  const double w = cfg.branch_channels();
  const double c = cfg.fused_width;
  const double h = cfg.gate_hidden();
  const double d = cfg.attn_dim;
  const double nl = kFlopsPerNonlinearity;
  const double epochs = cfg.slots();

  double branches = 0.0;
  for (int b = 0; b < cfg.n_branches(); ++b) {
    branches += depthwise_flops(t, 4, cfg.branch_kernel(b)) + pointwise_flops(t, 4, w);
    branches += nl * t * w * 2;  // batch norm and GELU
  }
  const double fusion = pointwise_flops(t, cfg.concat_width(), c) + t * c;
  // Time pooling and the channel multiply scale with T_b; the gate MLP runs once per epoch.
  const double gate = cfg.gate_bypass ? 0.0 : 2 * t * c;
  const double gate_mlp =
      cfg.gate_bypass ? 0.0 : linear_flops(c, h) + h + nl * h + linear_flops(h, c) + c + nl * c;
  double tokenizer = 0.0;
  if (cfg.pooling == net::TokenPooling::attention) {
    tokenizer = pointwise_flops(t, c, c) + t * c + nl * t * c + kFlopsPerMac * t * c + nl * t +
                kFlopsPerMac * t * c;
  } else {
    tokenizer = t * c;
  }

  // Visible pairs of a fully valid window of 2L + 1 slots.
  const int n = cfg.slots();
  double visible = 0.0;
  for (int i = 0; i < n; ++i) {
    visible += std::min(i, cfg.window_radius) + std::min(n - 1 - i, cfg.window_radius) + 1;
  }
  const double ltam = 3 * epochs * linear_flops(c, d) + epochs * linear_flops(d, c) +
                      kFlopsPerMac * d * visible * 2 + nl * visible + epochs * c;
  const double elif = cfg.use_elif ? kFlopsPerMac * c * (cfg.window_radius + 1) : 0.0;
  const double head = linear_flops(c, cfg.n_classes) + cfg.n_classes + nl * cfg.n_classes;

  OpsBreakdown b;
  b.stages = {
      {"eamr_branches", epochs * branches, true},
      {"fusion", epochs * fusion, true},
      {"gate", epochs * gate, true},
      {"gate_mlp", epochs * gate_mlp, false},
      {"tokenizer", epochs * tokenizer, true},
      {"ltam", ltam, false},
      {"elif", elif, false},
      {"classifier", head, false},
  };
  return b;
}

double effective_ops(double flops_sparse, double flops_dense, double insd) {
  if (!(insd >= 0.0 && insd <= 1.0)) throw ParameterError("effective_ops: insd must lie in [0, 1]");
  return flops_sparse * insd + flops_dense;
}

double effective_ops(const OpsBreakdown& b, double insd) {
  return effective_ops(b.sparse_total(), b.dense_total(), insd);
}

namespace {

double raster_density(const Raster& r) {
  if (r.dense) return 1.0;
  return static_cast<double>(r.nonzero()) / static_cast<double>(2 * r.length);
}

}  // namespace

double measure_insd(const net::Window& window) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t j = 0; j < window.slots.size(); ++j) {
    if (window.slots[j] == nullptr || !window.mask[j]) continue;
    sum += raster_density(*window.slots[j]);
    ++n;
  }
  if (n == 0) throw MetricError("measure_insd: no valid epochs");
  return sum / static_cast<double>(n);
}

double measure_insd(const EpochBatch& batch) {
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t e = 0; e < batch.size(); ++e) {
    if (!batch.mask[e]) continue;
    sum += raster_density(batch.rasters[e]);
    ++n;
  }
  if (n == 0) throw MetricError("measure_insd: no valid epochs");
  return sum / static_cast<double>(n);
}

LatencyStats bench_latency(const net::ModelParams& p, const net::ModelConfig& cfg, int n_samples, int warmup,
                           std::uint64_t seed) {
  if (n_samples < 10) throw ParameterError("bench: need at least 10 samples");
  if (warmup < 1) throw ParameterError("bench: need at least 1 warmup run");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Raster> rasters(static_cast<std::size_t>(cfg.slots()));
  for (auto& r : rasters) {
    r.length = static_cast<std::size_t>(cfg.epoch_samples);
    r.cells.assign(2 * r.length, 0.0f);
    for (auto& v : r.cells) {
      const double x = u(rng);
      v = x < 0.1 ? -1.0f : (x < 0.2 ? 1.0f : 0.0f);
    }
  }
  const std::vector<std::uint8_t> mask(rasters.size(), 1);
  const net::Window window = net::make_window(rasters, mask, rasters.size() / 2, cfg.window_radius);

  std::vector<double> times;
  for (int i = 0; i < warmup + n_samples; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = net::forward(window, p, cfg);
    const auto t1 = std::chrono::steady_clock::now();
    if (r.center.probs.size() == 0) throw InternalError("bench: empty forward result");
    if (i >= warmup) times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(times.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, times.size() - 1);
    return times[lo] + (pos - static_cast<double>(lo)) * (times[hi] - times[lo]);
  };
  return LatencyStats{quantile(0.5), quantile(0.9)};
}

OpsReport make_ops_report(const net::ModelConfig& cfg, double insd, std::optional<double> spike_rate,
                          std::optional<LatencyStats> latency) {
  const OpsBreakdown b = count_flops(cfg);
  OpsReport r;
  r.profile = std::string(net::profile_name(cfg.profile));
  r.params = net::param_count(cfg);
  r.flops_total = b.total();
  r.flops_sparse = b.sparse_total();
  r.flops_dense = b.dense_total();
  r.insd = insd;
  r.effective_ops = effective_ops(r.flops_sparse, r.flops_dense, insd);
  r.spike_rate = cfg.use_elif ? spike_rate : std::nullopt;
  r.latency = latency;
  return r;
}

std::string ops_report_csv(std::span<const OpsReport> rows) {
  std::ostringstream ss;
  ss << kOpsCsvHeader << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? csv::num(*v) : std::string("NA"); };
  for (const auto& r : rows) {
    ss << r.profile << ',' << r.params << ',' << csv::num(r.flops_total) << ',' << csv::num(r.flops_sparse) << ','
       << csv::num(r.flops_dense) << ',' << csv::num(r.insd) << ',' << csv::num(r.effective_ops) << ','
       << opt(r.spike_rate) << ',' << opt(r.latency ? std::optional(r.latency->median_ms) : std::nullopt) << ','
       << opt(r.latency ? std::optional(r.latency->p90_ms) : std::nullopt) << '\n';
  }
  return ss.str();
}

std::vector<OpsReport> parse_ops_report_csv(const std::string& text) {
  std::vector<OpsReport> out;
  for (const auto& f : csv::parse(text, kOpsCsvHeader)) {
    if (f.size() != 10) throw FormatError("ops report: expected 10 columns");
    OpsReport r;
    r.profile = f[0];
    r.params = static_cast<std::size_t>(csv::to_int(f[1]));
    r.flops_total = csv::to_double(f[2]);
    r.flops_sparse = csv::to_double(f[3]);
    r.flops_dense = csv::to_double(f[4]);
    r.insd = csv::to_double(f[5]);
    r.effective_ops = csv::to_double(f[6]);
    if (f[7] != "NA") r.spike_rate = csv::to_double(f[7]);
    if (f[8] != "NA" && f[9] != "NA") r.latency = LatencyStats{csv::to_double(f[8]), csv::to_double(f[9])};
    out.push_back(r);
  }
  return out;
}

}  // namespace neurosleep
