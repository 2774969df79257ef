#pragma once

// Recordings prepared for the network (epoch rasters, validity mask, labels) and the
// synthetic corpora used for calibration and smoke training.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "neurosleep/encoder.hpp"
#include "neurosleep/s2e.hpp"
#include "neurosleep/signal_io.hpp"

namespace neurosleep {

struct PreparedRecording {
  std::string subject_id;
  EpochBatch batch;
  std::vector<int> labels;  // one per batch position; empty when unlabeled
  EventDensity density;     // of the whole encoded recording (all ones for dense input)
};

// Preprocess (band-pass, resample to 100 Hz), encode, split into epochs and rasterise.
// With dense_input the rasters carry the z-scored epoch signal instead of events.
// FormatError if labels are given and their count differs from the number of complete epochs.
PreparedRecording prepare_recording(const Recording& raw, const EncoderConfig& enc, bool dense_input,
                                    const EpochLabels* labels = nullptr);

struct LabeledSignal {
  Recording recording;
  EpochLabels labels;
};

// Oscillation-band mixture characteristic of each stage, before subject jitter.
std::vector<SynthComponent> stage_components(Stage s);

// One subject per recording, each holding a single stage (subject index mod 5) for
// epochs_per_subject epochs. Band centres vary by +-10% and amplitudes by +-20% per subject.
std::vector<LabeledSignal> synthetic_labeled_corpus(std::size_t n_subjects, std::size_t epochs_per_subject,
                                                    std::uint64_t seed);

// EEG-like mixtures (slow waves, alpha, spindles, beta, noise) for encoder calibration.
std::vector<Recording> synthetic_standard_corpus(std::size_t n_signals, double duration_s, std::uint64_t seed);

}  // namespace neurosleep
