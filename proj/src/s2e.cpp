#include "neurosleep/s2e.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "neurosleep/csv.hpp"
#include "neurosleep/errors.hpp"

namespace neurosleep {

namespace {

// Absorbs representation error in anchor differences such as 45.1 - 15 - 30.
constexpr double kAnchorSlack = 1e-9;

std::size_t samples_per_epoch(double fs, double epoch_s) {
  if (!(epoch_s > 0)) throw ParameterError("epoch duration must be > 0");
  const double spe = fs * epoch_s;
  const double rounded = std::round(spe);
  if (!(rounded >= 1) || std::abs(spe - rounded) > 1e-9 * rounded) {
    throw ParameterError("fs * epoch duration must be an integer number of samples");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

std::size_t epoch_index_of(double t_s, double epoch_s) {
  if (!(t_s >= 0) || !(epoch_s > 0)) throw ParameterError("epoch_index_of: need t >= 0, T > 0");
  return static_cast<std::size_t>(std::floor(t_s / epoch_s));
}

EpochAssignment assign_epochs(const MultiScaleEventStream& stream, double epoch_s) {
  EpochAssignment out;
  out.samples_per_epoch = samples_per_epoch(stream.fs, epoch_s);
  const std::size_t spe = out.samples_per_epoch;
  const std::size_t n_epochs = stream.length / spe;
  out.epochs.resize(n_epochs);
  for (std::size_t e = 0; e < n_epochs; ++e) {
    out.epochs[e].epoch_index = e;
    out.epochs[e].anchor_s = (static_cast<double>(e) + 0.5) * epoch_s;
  }
  for (const auto* list : {&stream.slow_events, &stream.fast_events}) {
    for (const Event& ev : *list) {
      const std::size_t e = ev.sample_index / spe;
      if (e >= n_epochs) {
        ++out.dropped_events;
        continue;
      }
      Event local = ev;
      local.sample_index = ev.sample_index - e * spe;
      out.epochs[e].events.push_back(local);
    }
  }
  for (auto& g : out.epochs) {
    std::sort(g.events.begin(), g.events.end(), [](const Event& a, const Event& b) {
      return a.sample_index != b.sample_index ? a.sample_index < b.sample_index : a.scale < b.scale;
    });
  }
  return out;
}

std::vector<std::uint8_t> validity_mask(std::span<const double> anchors, double epoch_s, double tau) {
  std::vector<std::uint8_t> m(anchors.size(), 1);
  for (std::size_t e = 0; e < anchors.size(); ++e) {
    if (!std::isfinite(anchors[e])) throw ParameterError("validity_mask: non-finite anchor");
    if (e == 0) continue;
    const double dev = std::abs(anchors[e] - anchors[e - 1] - epoch_s);
    m[e] = dev <= tau + kAnchorSlack ? 1 : 0;
  }
  return m;
}

std::size_t Raster::nonzero() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](float v) { return v != 0.0f; }));
}

Raster rasterize(const EpochGroup& group, std::size_t t_b) {
  Raster r;
  r.length = t_b;
  r.cells.assign(2 * t_b, 0.0f);
  for (const Event& ev : group.events) {
    if (ev.sample_index >= t_b) {
      throw FormatError("rasterize: offset " + std::to_string(ev.sample_index) + " outside epoch");
    }
    if (ev.polarity != 1 && ev.polarity != -1) throw FormatError("rasterize: polarity not +-1");
    float& cell = r.cells[static_cast<std::size_t>(ev.scale) * t_b + ev.sample_index];
    if (cell != 0.0f) {
      throw FormatError("rasterize: duplicate event at scale " +
                        std::to_string(static_cast<int>(ev.scale)) + " offset " +
                        std::to_string(ev.sample_index));
    }
    cell = static_cast<float>(ev.polarity);
  }
  return r;
}

std::vector<Event> raster_events(const Raster& raster) {
  if (raster.dense) throw ParameterError("raster_events: dense raster has no event support");
  std::vector<Event> out;
  for (std::size_t t = 0; t < raster.length; ++t) {
    for (int s = 0; s < 2; ++s) {
      const float v = raster.at(s, t);
      if (v == 0.0f) continue;
      Event ev;
      ev.sample_index = t;
      ev.polarity = v > 0 ? 1 : -1;
      ev.scale = static_cast<Scale>(s);
      out.push_back(ev);
    }
  }
  return out;
}

Raster dense_raster(std::span<const double> epoch_samples) {
  const std::size_t n = epoch_samples.size();
  if (n == 0) throw ParameterError("dense_raster: empty epoch");
  double mean = 0.0;
  for (double v : epoch_samples) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : epoch_samples) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / static_cast<double>(n));
  const double inv = sd > 0 ? 1.0 / sd : 0.0;
  Raster r;
  r.length = n;
  r.dense = true;
  r.cells.resize(2 * n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto z = static_cast<float>((epoch_samples[t] - mean) * inv);
    r.cells[t] = z;
    r.cells[n + t] = z;
  }
  return r;
}

namespace {

void append_epoch(EpochBatch& b, const EpochGroup& g, std::size_t t_b) {
  b.rasters.push_back(rasterize(g, t_b));
  b.anchors.push_back(g.anchor_s);
  b.epoch_indices.push_back(g.epoch_index);
  std::size_t slow = 0;
  for (const Event& ev : g.events) slow += ev.scale == Scale::slow ? 1 : 0;
  b.n_events_slow.push_back(slow);
  b.n_events_fast.push_back(g.events.size() - slow);
}

}  // namespace

EpochBatch build_epoch_batch(const EpochAssignment& assignment, double epoch_s, double tau) {
  EpochBatch b;
  b.t_b = assignment.samples_per_epoch;
  for (const auto& g : assignment.epochs) append_epoch(b, g, b.t_b);
  b.mask = validity_mask(b.anchors, epoch_s, tau);
  return b;
}

EpochBatch build_epoch_batch(const EpochAssignment& assignment, std::span<const std::size_t> keep,
                             double epoch_s, double tau) {
  EpochBatch b;
  b.t_b = assignment.samples_per_epoch;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (keep[i] >= assignment.epochs.size()) throw ParameterError("build_epoch_batch: epoch out of range");
    if (i > 0 && keep[i] <= keep[i - 1]) throw ParameterError("build_epoch_batch: indices must ascend");
    append_epoch(b, assignment.epochs[keep[i]], b.t_b);
  }
  b.mask = validity_mask(b.anchors, epoch_s, tau);
  return b;
}

std::string batch_manifest_csv(const EpochBatch& batch) {
  std::ostringstream ss;
  ss << kManifestCsvHeader << '\n';
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ss << batch.epoch_indices[i] << ',' << csv::num(batch.anchors[i]) << ','
       << static_cast<int>(batch.mask[i]) << ',' << batch.n_events_slow[i] << ','
       << batch.n_events_fast[i] << '\n';
  }
  return ss.str();
}

}  // namespace neurosleep
