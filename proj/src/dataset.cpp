#include "neurosleep/dataset.hpp"

#include <cmath>
#include <random>

#include "neurosleep/errors.hpp"

namespace neurosleep {

PreparedRecording prepare_recording(const Recording& raw, const EncoderConfig& enc, bool dense_input,
                                    const EpochLabels* labels) {
  const Recording rec = preprocess(raw);
  PreparedRecording out;
  out.subject_id = rec.subject_id;
  if (dense_input) {
    const auto slices = segment_epochs(rec);
    auto& b = out.batch;
    b.t_b = slices.samples_per_epoch;
    for (std::size_t e = 0; e < slices.slices.size(); ++e) {
      b.rasters.push_back(dense_raster(slices.slices[e]));
      b.anchors.push_back((static_cast<double>(e) + 0.5) * kEpochSeconds);
      b.epoch_indices.push_back(e);
      b.n_events_slow.push_back(slices.samples_per_epoch);
      b.n_events_fast.push_back(slices.samples_per_epoch);
    }
    b.mask = validity_mask(b.anchors);
    out.density = EventDensity{1.0, 1.0, 1.0};
  } else {
    const auto stream = encode_ramsdm(rec.samples, enc, rec.fs);
    out.density = event_density(stream);
    out.batch = build_epoch_batch(assign_epochs(stream));
  }
  if (labels != nullptr) {
    if (labels->labels.size() != out.batch.size()) {
      throw FormatError("labels for " + rec.subject_id + ": " + std::to_string(labels->labels.size()) +
                        " rows but the recording holds " + std::to_string(out.batch.size()) +
                        " complete epochs");
    }
    for (Stage s : labels->labels) out.labels.push_back(static_cast<int>(s));
  }
  return out;
}

std::vector<SynthComponent> stage_components(Stage s) {
  switch (s) {
    case Stage::W: return {{10.0, 1.0, 20.0}, {22.0, 3.0, 6.0}};
    case Stage::N1: return {{6.5, 1.5, 18.0}, {2.5, 1.0, 6.0}};
    case Stage::N2: return {{13.5, 1.0, 14.0}, {1.5, 0.8, 16.0}};
    case Stage::N3: return {{1.0, 0.5, 60.0}};
    case Stage::REM: return {{4.0, 1.5, 12.0}, {17.0, 3.0, 10.0}};
  }
  return {};
}

std::vector<LabeledSignal> synthetic_labeled_corpus(std::size_t n_subjects, std::size_t epochs_per_subject,
                                                    std::uint64_t seed) {
  if (n_subjects == 0 || epochs_per_subject == 0) throw ParameterError("corpus: empty size");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> freq_jitter(0.9, 1.1);
  std::uniform_real_distribution<double> amp_jitter(0.8, 1.2);
  std::vector<LabeledSignal> out;
  for (std::size_t s = 0; s < n_subjects; ++s) {
    const auto stage = static_cast<Stage>(s % kNumStages);
    SynthSpec spec;
    spec.duration_s = static_cast<double>(epochs_per_subject) * kEpochSeconds;
    spec.components = stage_components(stage);
    for (auto& c : spec.components) {
      c.center_hz *= freq_jitter(rng);
      c.amplitude *= amp_jitter(rng);
    }
    spec.noise_amplitude = 3.0;
    spec.seed = rng();
    spec.subject_id = "S" + std::to_string(1000 + s).substr(1);
    LabeledSignal ls;
    ls.recording = synth_signal(spec);
    ls.labels.labels.assign(epochs_per_subject, stage);
    out.push_back(std::move(ls));
  }
  return out;
}

std::vector<Recording> synthetic_standard_corpus(std::size_t n_signals, double duration_s, std::uint64_t seed) {
  // Log-spaced bands with amplitude ~ f^-1.5 give the steep low-frequency dominated spectrum
  // of scalp EEG; the 10.5 and 13 Hz bands stand in for alpha and spindles.
  constexpr double kBands[] = {0.7, 1.1, 1.7, 2.6, 4.0, 6.0, 9.0, 10.5, 13.0, 18.0, 25.0};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Recording> out;
  for (std::size_t i = 0; i < n_signals; ++i) {
    SynthSpec spec;
    spec.duration_s = duration_s;
    for (double f : kBands) {
      const double amplitude = 40.0 * std::pow(f, -1.5) * (0.7 + 0.6 * u(rng));
      spec.components.push_back({f * (0.9 + 0.2 * u(rng)), 0.3 * f, amplitude});
    }
    spec.noise_amplitude = 0.3;
    spec.seed = rng();
    spec.subject_id = "C" + std::to_string(101 + i).substr(1);
    out.push_back(synth_signal(spec));
  }
  return out;
}

}  // namespace neurosleep
