#pragma once

// Analytic operation counts per stage, sparsity-adjusted effective operations, input
// event density and a latency micro-benchmark.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "neurosleep/network.hpp"

namespace neurosleep {

// Counting conventions: a multiply-accumulate is 2 FLOPs, a nonlinearity, normalisation or
// softmax element is 4, any other elementwise arithmetic is 1.
inline constexpr double kFlopsPerMac = 2.0;
inline constexpr double kFlopsPerNonlinearity = 4.0;

double depthwise_flops(double t, double c_in, double k);
double pointwise_flops(double t, double c_in, double c_out);
double linear_flops(double fan_in, double fan_out);

struct StageCount {
  std::string name;
  double flops = 0.0;
  bool sparse = false;  // scales with the input event density
};

// Per-sample counts: 2L + 1 epoch encodings, one attention pass over the window, the leaky
// state over the L + 1 slots up to the centre, and the head.
struct OpsBreakdown {
  std::vector<StageCount> stages;

  double total() const;
  double sparse_total() const;
  double dense_total() const;
  StageCount& stage(std::string_view name);  // ParameterError if absent
};

// Stages: eamr_branches, fusion, gate, tokenizer (sparse by default), gate_mlp, ltam, elif,
// classifier (dense).
OpsBreakdown count_flops(const net::ModelConfig& cfg);

// sparse * insd + dense. ParameterError unless insd is in [0, 1].
double effective_ops(double flops_sparse, double flops_dense, double insd);
double effective_ops(const OpsBreakdown& b, double insd);

// Mean fraction of nonzero raster cells over the valid slots; dense rasters count as 1.
// MetricError when no slot is valid.
double measure_insd(const net::Window& window);
double measure_insd(const EpochBatch& batch);

struct LatencyStats {
  double median_ms = 0.0;
  double p90_ms = 0.0;
};

// Times forward() on fixed pseudo-random event windows; warmup runs are discarded.
LatencyStats bench_latency(const net::ModelParams& p, const net::ModelConfig& cfg, int n_samples, int warmup,
                           std::uint64_t seed = 0);

struct OpsReport {
  std::string profile;
  std::size_t params = 0;
  double flops_total = 0.0;
  double flops_sparse = 0.0;
  double flops_dense = 0.0;
  double insd = 0.0;
  double effective_ops = 0.0;
  std::optional<double> spike_rate;
  std::optional<LatencyStats> latency;
};

OpsReport make_ops_report(const net::ModelConfig& cfg, double insd, std::optional<double> spike_rate,
                          std::optional<LatencyStats> latency = std::nullopt);

inline constexpr const char* kOpsCsvHeader =
    "profile,params,flops_total,flops_sparse,flops_dense,insd,effective_ops,spike_rate,latency_ms_median,"
    "latency_ms_p90";
std::string ops_report_csv(std::span<const OpsReport> rows);
std::vector<OpsReport> parse_ops_report_csv(const std::string& text);

}  // namespace neurosleep
