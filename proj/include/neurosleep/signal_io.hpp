#pragma once

// Continuous single-channel recordings: the NSIG container, the labels CSV,
// band-pass filtering, rational resampling, epoch segmentation and synthesis.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace neurosleep {

inline constexpr double kEpochSeconds = 30.0;
inline constexpr double kTargetFs = 100.0;

struct Recording {
  std::vector<double> samples;  // microvolts
  double fs = 0.0;              // Hz
  std::string channel;
  std::string subject_id;
  std::string session_id;
  std::optional<double> start_offset;  // seconds from midnight

  double duration() const { return fs > 0 ? static_cast<double>(samples.size()) / fs : 0.0; }
};

// Throws ParameterError when fs <= 0, the series is empty or contains a non-finite value.
void validate(const Recording& rec);

enum class Stage : std::uint8_t { W = 0, N1 = 1, N2 = 2, N3 = 3, REM = 4 };
inline constexpr int kNumStages = 5;

std::string_view stage_name(Stage s);
// Inverse of the integer code; nullopt outside 0..4.
std::optional<Stage> stage_from_code(int code);

struct EpochLabels {
  std::vector<Stage> labels;
  double epoch_duration = kEpochSeconds;
};

// ---- NSIG container ------------------------------------------------------

std::string encode_nsig(const Recording& rec);
Recording decode_nsig(std::string_view bytes);
Recording load_signal(const std::filesystem::path& path);
void save_signal(const Recording& rec, const std::filesystem::path& path);

// ---- labels CSV (`epoch_index,stage`) -------------------------------------

EpochLabels load_labels(const std::filesystem::path& path);
void save_labels(const EpochLabels& labels, const std::filesystem::path& path);

// ---- preprocessing --------------------------------------------------------

// Zero-phase 4th-order Butterworth band-pass with 1 s reflection padding.
Recording bandpass(const Recording& rec, double lo = 0.5, double hi = 35.0);

// Kaiser-windowed sinc polyphase resampling. The ratio target_fs / rec.fs must be a
// rational p/q with p, q <= kMaxResampleFactor.
inline constexpr int kMaxResampleFactor = 1000;
Recording resample(const Recording& rec, double target_fs = kTargetFs);

// Band-pass 0.5-35 Hz followed by resampling to 100 Hz.
Recording preprocess(const Recording& rec);

struct EpochSlices {
  std::vector<std::span<const double>> slices;
  std::size_t samples_per_epoch = 0;
  std::size_t dropped_samples = 0;  // trailing remainder
};

// Views into rec.samples; rec must outlive the result.
EpochSlices segment_epochs(const Recording& rec, double epoch_s = kEpochSeconds);

// ---- synthesis -------------------------------------------------------------

struct SynthComponent {
  double center_hz = 10.0;
  double bandwidth_hz = 1.0;
  double amplitude = 1.0;
};

struct SynthSpec {
  double duration_s = kEpochSeconds;
  double fs = kTargetFs;
  std::vector<SynthComponent> components;
  double noise_amplitude = 0.0;
  std::uint64_t seed = 0;
  std::string subject_id = "synth";
  std::string channel = "EEG Fpz-Cz";
};

// Sum of narrow-band oscillations (phase-diffusing carriers whose Lorentzian line width is
// the component bandwidth) plus white Gaussian noise of standard deviation noise_amplitude.
Recording synth_signal(const SynthSpec& spec);

}  // namespace neurosleep
