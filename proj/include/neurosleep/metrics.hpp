#pragma once

// Classification scores over the five sleep stages.

#include <array>
#include <span>
#include <string>

#include "neurosleep/signal_io.hpp"

namespace neurosleep {

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;  // true count
};

struct EvalReport {
  long n = 0;
  double accuracy = 0.0;
  // Mean F1 over the classes that occur in the labels or the predictions.
  double macro_f1 = 0.0;
  // NaN when the chance agreement equals 1.
  double kappa = 0.0;
  std::array<std::array<long, kNumStages>, kNumStages> confusion{};  // [true][predicted]
  std::array<ClassMetrics, kNumStages> per_class{};

  bool kappa_defined() const { return kappa == kappa; }
};

// FormatError for a code outside 0..4, ParameterError for empty or unequal inputs.
EvalReport evaluate(std::span<const int> predictions, std::span<const int> labels);

// `stage,W,N1,N2,N3,REM`, one row per true stage.
std::string confusion_csv(const EvalReport& r);
// `stage,precision,recall,f1,support`
std::string per_class_csv(const EvalReport& r);

}  // namespace neurosleep
