#include "neurosleep/metrics.hpp"

#include <cmath>
#include <sstream>

#include "neurosleep/csv.hpp"
#include "neurosleep/errors.hpp"

namespace neurosleep {

namespace {

double ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

}  // namespace

EvalReport evaluate(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ParameterError("evaluate: length mismatch");
  if (labels.empty()) throw ParameterError("evaluate: no samples");
  EvalReport r;
  r.n = static_cast<long>(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int t = labels[i];
    const int p = predictions[i];
    if (t < 0 || t >= kNumStages || p < 0 || p >= kNumStages) {
      throw FormatError("evaluate: stage code outside 0..4 at position " + std::to_string(i));
    }
    ++r.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  std::array<long, kNumStages> row{}, col{};
  long diag = 0;
  for (int i = 0; i < kNumStages; ++i) {
    for (int j = 0; j < kNumStages; ++j) {
      row[i] += r.confusion[i][j];
      col[j] += r.confusion[i][j];
    }
    diag += r.confusion[i][i];
  }
  const double n = static_cast<double>(r.n);
  r.accuracy = diag / n;

  double f1_sum = 0.0;
  int present = 0;
  for (int k = 0; k < kNumStages; ++k) {
    auto& m = r.per_class[k];
    const double tp = static_cast<double>(r.confusion[k][k]);
    m.support = row[k];
    m.precision = ratio(tp, static_cast<double>(col[k]));
    m.recall = ratio(tp, static_cast<double>(row[k]));
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    if (row[k] > 0 || col[k] > 0) {
      f1_sum += m.f1;
      ++present;
    }
  }
  r.macro_f1 = f1_sum / present;

  double pe = 0.0;
  for (int k = 0; k < kNumStages; ++k) pe += static_cast<double>(row[k]) * static_cast<double>(col[k]);
  pe /= n * n;
  r.kappa = pe == 1.0 ? std::nan("") : (r.accuracy - pe) / (1.0 - pe);
  return r;
}

std::string confusion_csv(const EvalReport& r) {
  std::ostringstream ss;
  ss << "stage,W,N1,N2,N3,REM\n";
  for (int i = 0; i < kNumStages; ++i) {
    ss << stage_name(static_cast<Stage>(i));
    for (int j = 0; j < kNumStages; ++j) ss << ',' << r.confusion[i][j];
    ss << '\n';
  }
  return ss.str();
}

std::string per_class_csv(const EvalReport& r) {
  std::ostringstream ss;
  ss << "stage,precision,recall,f1,support\n";
  for (int k = 0; k < kNumStages; ++k) {
    const auto& m = r.per_class[k];
    ss << stage_name(static_cast<Stage>(k)) << ',' << csv::num(m.precision) << ',' << csv::num(m.recall)
       << ',' << csv::num(m.f1) << ',' << m.support << '\n';
  }
  return ss.str();
}

}  // namespace neurosleep
