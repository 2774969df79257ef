#pragma once

// Reconstruction fidelity metrics, the feasibility constraint set, and the constrained
// (k_slow, k_fast) grid search that minimises event density.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "neurosleep/encoder.hpp"

namespace neurosleep {

inline constexpr double kSnrCapDb = 300.0;

struct FidelityThresholds {
  double tau_snr = 8.0;    // dB
  double tau_nmse = 0.16;
  double tau_corr = 0.90;

  void validate() const;
};

struct SweepGrid {
  std::vector<double> k_values;

  // 0.6, 0.8, ..., 2.4
  static SweepGrid standard();
  void validate() const;
};

struct Fidelity {
  double snr_db = 0.0;
  double nmse = 0.0;
  double corr = 0.0;
};

// 10 log10(sum x^2 / sum e^2), capped at kSnrCapDb. MetricError if sum x^2 == 0.
double snr_db(std::span<const double> x, std::span<const double> xhat);
// sum e^2 / sum (x - mean x)^2. MetricError for constant x.
double nmse(std::span<const double> x, std::span<const double> xhat);
// MetricError when either series is constant.
double pearson_corr(std::span<const double> x, std::span<const double> xhat);

// All three metrics from one pass; SNR and nMSE share the same error energy.
Fidelity fidelity(std::span<const double> x, std::span<const double> xhat);

bool check_feasible(const Fidelity& f, const FidelityThresholds& thr);

struct OperatingPoint {
  double k_slow = 0.0;
  double k_fast = 0.0;
  double snr_db = 0.0;
  double nmse = 0.0;
  double corr = 0.0;
  double rho = 0.0;  // combined density
  double rho_slow = 0.0;
  double rho_fast = 0.0;
  bool feasible = false;
};

enum class SweepStatus { selected, no_feasible_point };

struct SweepResult {
  SweepStatus status = SweepStatus::no_feasible_point;
  std::optional<OperatingPoint> selected;
  std::vector<OperatingPoint> table;  // sorted by (k_slow, k_fast)
  // per_signal_density[row][signal] for the row ordering of `table`.
  std::vector<std::vector<EventDensity>> per_signal_density;
};

// Evaluates every pair with k_fast < k_slow from the grid on all signals (unweighted means),
// discards infeasible pairs and selects the minimum mean combined density; ties prefer the
// larger k_slow, then the larger k_fast.
SweepResult grid_search(const std::vector<std::vector<double>>& signals, const SweepGrid& grid,
                        const FidelityThresholds& thr, const EncoderConfig& base, double fs = 100.0);

// Selection rule alone, applied to an already evaluated table.
std::optional<OperatingPoint> select_operating_point(std::span<const OperatingPoint> table);

inline constexpr const char* kSweepCsvHeader =
    "k_slow,k_fast,snr_db,nmse,corr,rho_combined,rho_slow,rho_fast,feasible";
std::string sweep_table_csv(std::span<const OperatingPoint> table);
std::vector<OperatingPoint> parse_sweep_table_csv(const std::string& text);

// Spearman rank correlation with average ranks for ties.
double spearman(std::span<const double> a, std::span<const double> b);

}  // namespace neurosleep
