#include "neurosleep/operating_point.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "neurosleep/csv.hpp"
#include "neurosleep/errors.hpp"

namespace neurosleep {

namespace {

struct Sums {
  double signal_energy = 0.0;
  double error_energy = 0.0;
  double variance_x = 0.0;  // sum (x - mean)^2
  double variance_y = 0.0;
  double covariance = 0.0;
};

Sums accumulate(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ParameterError("fidelity: series lengths differ");
  if (x.empty()) throw ParameterError("fidelity: empty series");
  const auto n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  Sums s;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = x[i] - y[i];
    s.signal_energy += x[i] * x[i];
    s.error_energy += e * e;
    s.variance_x += (x[i] - mx) * (x[i] - mx);
    s.variance_y += (y[i] - my) * (y[i] - my);
    s.covariance += (x[i] - mx) * (y[i] - my);
  }
  return s;
}

double snr_from(const Sums& s) {
  if (s.signal_energy == 0.0) throw MetricError("snr: signal has zero energy");
  if (s.error_energy == 0.0) return kSnrCapDb;
  return std::min(kSnrCapDb, 10.0 * std::log10(s.signal_energy / s.error_energy));
}

double nmse_from(const Sums& s) {
  if (s.variance_x == 0.0) throw MetricError("nmse: constant reference series");
  return s.error_energy / s.variance_x;
}

double corr_from(const Sums& s) {
  if (s.variance_x == 0.0 || s.variance_y == 0.0) throw MetricError("corr: constant series");
  return std::clamp(s.covariance / std::sqrt(s.variance_x * s.variance_y), -1.0, 1.0);
}

std::vector<double> ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

void FidelityThresholds::validate() const {
  if (!(tau_nmse > 0 && tau_nmse <= 1)) throw ParameterError("thresholds: tau_nmse must be in (0, 1]");
  if (!(tau_corr > -1 && tau_corr <= 1)) throw ParameterError("thresholds: tau_corr must be in (-1, 1]");
  if (!std::isfinite(tau_snr)) throw ParameterError("thresholds: tau_snr must be finite");
}

SweepGrid SweepGrid::standard() {
  SweepGrid g;
  for (int i = 6; i <= 24; i += 2) g.k_values.push_back(i / 10.0);
  return g;
}

void SweepGrid::validate() const {
  if (k_values.empty()) throw ParameterError("sweep grid is empty");
  for (std::size_t i = 0; i < k_values.size(); ++i) {
    if (!(k_values[i] > 0)) throw ParameterError("sweep grid: values must be > 0");
    if (i > 0 && !(k_values[i] > k_values[i - 1])) {
      throw ParameterError("sweep grid: values must be strictly ascending");
    }
  }
}

double snr_db(std::span<const double> x, std::span<const double> xhat) {
  return snr_from(accumulate(x, xhat));
}

double nmse(std::span<const double> x, std::span<const double> xhat) {
  return nmse_from(accumulate(x, xhat));
}

double pearson_corr(std::span<const double> x, std::span<const double> xhat) {
  return corr_from(accumulate(x, xhat));
}

Fidelity fidelity(std::span<const double> x, std::span<const double> xhat) {
  const Sums s = accumulate(x, xhat);
  return Fidelity{snr_from(s), nmse_from(s), corr_from(s)};
}

bool check_feasible(const Fidelity& f, const FidelityThresholds& thr) {
  return f.snr_db >= thr.tau_snr && f.nmse <= thr.tau_nmse && f.corr >= thr.tau_corr;
}

std::optional<OperatingPoint> select_operating_point(std::span<const OperatingPoint> table) {
  std::optional<OperatingPoint> best;
  for (const auto& op : table) {
    if (!op.feasible) continue;
    if (!best || op.rho < best->rho ||
        (op.rho == best->rho &&
         (op.k_slow > best->k_slow || (op.k_slow == best->k_slow && op.k_fast > best->k_fast)))) {
      best = op;
    }
  }
  return best;
}

SweepResult grid_search(const std::vector<std::vector<double>>& signals, const SweepGrid& grid,
                        const FidelityThresholds& thr, const EncoderConfig& base, double fs) {
  grid.validate();
  thr.validate();
  if (signals.empty()) throw ParameterError("grid_search: no signals");

  std::vector<std::vector<double>> sigmas;
  sigmas.reserve(signals.size());
  for (const auto& x : signals) {
    sigmas.push_back(local_sigma(x, base.sigma_window, effective_sigma_floor(x, base)));
  }

  SweepResult result;
  for (double ks : grid.k_values) {
    for (double kf : grid.k_values) {
      if (!(kf < ks)) continue;
      EncoderConfig cfg = base;
      cfg.k_slow = ks;
      cfg.k_fast = kf;
      OperatingPoint op;
      op.k_slow = ks;
      op.k_fast = kf;
      std::vector<EventDensity> dens;
      for (std::size_t i = 0; i < signals.size(); ++i) {
        const auto stream = encode_ramsdm(signals[i], cfg, fs, sigmas[i]);
        const auto f = fidelity(signals[i], reconstruct(stream));
        const auto d = event_density(stream);
        op.snr_db += f.snr_db;
        op.nmse += f.nmse;
        op.corr += f.corr;
        op.rho += d.combined;
        op.rho_slow += d.slow;
        op.rho_fast += d.fast;
        dens.push_back(d);
      }
      const auto n = static_cast<double>(signals.size());
      op.snr_db /= n;
      op.nmse /= n;
      op.corr /= n;
      op.rho /= n;
      op.rho_slow /= n;
      op.rho_fast /= n;
      op.feasible = check_feasible(Fidelity{op.snr_db, op.nmse, op.corr}, thr);
      result.table.push_back(op);
      result.per_signal_density.push_back(std::move(dens));
    }
  }
  if (result.table.empty()) throw ParameterError("grid_search: grid yields no pair with k_fast < k_slow");
  result.selected = select_operating_point(result.table);
  result.status = result.selected ? SweepStatus::selected : SweepStatus::no_feasible_point;
  return result;
}

std::string sweep_table_csv(std::span<const OperatingPoint> table) {
  std::ostringstream ss;
  ss << kSweepCsvHeader << '\n';
  for (const auto& op : table) {
    ss << csv::num(op.k_slow) << ',' << csv::num(op.k_fast) << ',' << csv::num(op.snr_db) << ','
       << csv::num(op.nmse) << ',' << csv::num(op.corr) << ',' << csv::num(op.rho) << ','
       << csv::num(op.rho_slow) << ',' << csv::num(op.rho_fast) << ',' << (op.feasible ? 1 : 0)
       << '\n';
  }
  return ss.str();
}

std::vector<OperatingPoint> parse_sweep_table_csv(const std::string& text) {
  const auto rows = csv::parse(text, kSweepCsvHeader);
  std::vector<OperatingPoint> out;
  for (const auto& r : rows) {
    if (r.size() != 9) throw FormatError("sweep table: expected 9 columns");
    OperatingPoint op;
    op.k_slow = csv::to_double(r[0]);
    op.k_fast = csv::to_double(r[1]);
    op.snr_db = csv::to_double(r[2]);
    op.nmse = csv::to_double(r[3]);
    op.corr = csv::to_double(r[4]);
    op.rho = csv::to_double(r[5]);
    op.rho_slow = csv::to_double(r[6]);
    op.rho_fast = csv::to_double(r[7]);
    op.feasible = r[8] == "1";
    out.push_back(op);
  }
  return out;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ParameterError("spearman: need two equal series");
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  return pearson_corr(ra, rb);
}

}  // namespace neurosleep
