#pragma once

// Stream-to-epoch conversion: events are grouped into fixed-duration epochs, each epoch is
// rasterised into a 2 x T_b ternary matrix, and a validity mask flags discontinuities
// between consecutive epoch anchors.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "neurosleep/encoder.hpp"

namespace neurosleep {

inline constexpr double kDefaultGapTolerance = 0.1;  // seconds

// floor(t / T) for t >= 0.
std::size_t epoch_index_of(double t_s, double epoch_s = 30.0);

struct EpochGroup {
  std::size_t epoch_index = 0;
  double anchor_s = 0.0;
  // sample_index holds the within-epoch offset.
  std::vector<Event> events;
};

struct EpochAssignment {
  std::vector<EpochGroup> epochs;  // every complete epoch, empty ones included
  std::size_t samples_per_epoch = 0;
  std::size_t dropped_events = 0;  // events in the trailing partial epoch
};

// Partitions the stream into complete epochs of epoch_s seconds. Requires epoch_s * fs to be
// an integer number of samples.
EpochAssignment assign_epochs(const MultiScaleEventStream& stream, double epoch_s = 30.0);

// m[0] = 1; m[e] = 1 iff |a[e] - a[e-1] - T| <= tau.
std::vector<std::uint8_t> validity_mask(std::span<const double> anchors, double epoch_s = 30.0,
                                        double tau = kDefaultGapTolerance);

// Two rows (slow, fast) of length T_b. Event rasters hold -1/0/+1; a dense raster (the
// dense-input ablation) holds real values in both rows.
struct Raster {
  std::size_t length = 0;
  std::vector<float> cells;  // row-major 2 x length
  bool dense = false;

  float at(int row, std::size_t t) const { return cells[static_cast<std::size_t>(row) * length + t]; }
  std::size_t nonzero() const;
};

// FormatError if two events share (scale, offset) or an offset is outside [0, T_b).
Raster rasterize(const EpochGroup& group, std::size_t t_b);
// Inverse of rasterize for event rasters; events ordered by (offset, scale). Step sizes are 0.
std::vector<Event> raster_events(const Raster& raster);

// Z-scored epoch samples copied to both rows.
Raster dense_raster(std::span<const double> epoch_samples);

struct EpochBatch {
  std::vector<Raster> rasters;
  std::vector<double> anchors;
  std::vector<std::uint8_t> mask;
  std::vector<std::size_t> epoch_indices;
  std::vector<std::size_t> n_events_slow;
  std::vector<std::size_t> n_events_fast;
  std::size_t t_b = 0;

  std::size_t size() const { return rasters.size(); }
};

// Builds rasters, anchors and the validity mask for every epoch of the assignment.
EpochBatch build_epoch_batch(const EpochAssignment& assignment, double epoch_s = 30.0,
                             double tau = kDefaultGapTolerance);
// Same, keeping only the listed epoch indices (in ascending order) so anchors can show gaps.
EpochBatch build_epoch_batch(const EpochAssignment& assignment, std::span<const std::size_t> keep,
                             double epoch_s = 30.0, double tau = kDefaultGapTolerance);

inline constexpr const char* kManifestCsvHeader =
    "epoch_index,anchor_s,mask,n_events_slow,n_events_fast";
std::string batch_manifest_csv(const EpochBatch& batch);

}  // namespace neurosleep
