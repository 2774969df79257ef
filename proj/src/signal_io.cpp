#include "neurosleep/signal_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "neurosleep/binary_io.hpp"
#include "neurosleep/dsp.hpp"
#include "neurosleep/errors.hpp"

namespace neurosleep {

namespace {

constexpr std::string_view kNsigMagic = "NSIG";
constexpr std::uint16_t kNsigVersion = 1;

}  // namespace

void validate(const Recording& rec) {
  if (!(rec.fs > 0) || !std::isfinite(rec.fs)) throw ParameterError("recording: fs must be > 0");
  if (rec.samples.empty()) throw ParameterError("recording: no samples");
  for (std::size_t i = 0; i < rec.samples.size(); ++i) {
    if (!std::isfinite(rec.samples[i])) {
      throw ParameterError("recording: non-finite sample at index " + std::to_string(i));
    }
  }
}

std::string_view stage_name(Stage s) {
  switch (s) {
    case Stage::W: return "W";
    case Stage::N1: return "N1";
    case Stage::N2: return "N2";
    case Stage::N3: return "N3";
    case Stage::REM: return "REM";
  }
  return "?";
}

std::optional<Stage> stage_from_code(int code) {
  if (code < 0 || code >= kNumStages) return std::nullopt;
  return static_cast<Stage>(code);
}

std::string encode_nsig(const Recording& rec) {
  io::ByteWriter w;
  w.put_bytes(kNsigMagic);
  w.put<std::uint16_t>(kNsigVersion);
  w.put<double>(rec.fs);
  w.put<std::uint64_t>(rec.samples.size());
  w.put_string16(rec.channel);
  w.put_string16(rec.subject_id);
  for (double v : rec.samples) w.put<float>(static_cast<float>(v));
  return w.take();
}

Recording decode_nsig(std::string_view bytes) {
  io::ByteReader r(bytes, "NSIG");
  if (r.get_bytes(4) != kNsigMagic) r.fail_at(0, "bad magic");
  const auto version = r.get<std::uint16_t>();
  if (version != kNsigVersion) r.fail_at(4, "unsupported version " + std::to_string(version));
  Recording rec;
  const std::size_t fs_offset = r.offset();
  rec.fs = r.get<double>();
  if (!(rec.fs > 0) || !std::isfinite(rec.fs)) r.fail_at(fs_offset, "invalid sampling rate");
  const auto n = r.get<std::uint64_t>();
  rec.channel = r.get_string16();
  rec.subject_id = r.get_string16();
  const std::size_t data_offset = r.offset();
  if (r.remaining() / 4 < n) {
    r.fail_at(data_offset + 4 * (r.remaining() / 4),
              "truncated: header declares " + std::to_string(n) + " samples, file holds " +
                  std::to_string(r.remaining() / 4));
  }
  rec.samples.resize(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::size_t at = r.offset();
    const float v = r.get<float>();
    if (!std::isfinite(v)) r.fail_at(at, "non-finite sample " + std::to_string(i));
    rec.samples[i] = v;
  }
  if (!r.at_end()) r.fail("trailing bytes after declared samples");
  if (n == 0) r.fail_at(data_offset, "no samples");
  return rec;
}

Recording load_signal(const std::filesystem::path& path) {
  try {
    return decode_nsig(io::read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void save_signal(const Recording& rec, const std::filesystem::path& path) {
  io::write_file(path, encode_nsig(rec));
}

EpochLabels load_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "epoch_index,stage") {
    throw FormatError(path.string() + ": expected header 'epoch_index,stage'");
  }
  EpochLabels out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    long idx = -1;
    int code = -1;
    char comma = 0;
    if (!(ss >> idx >> comma >> code) || comma != ',' || !ss.eof()) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed row");
    }
    if (idx != static_cast<long>(out.labels.size())) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": epoch_index out of sequence");
    }
    const auto stage = stage_from_code(code);
    if (!stage) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": stage code outside 0..4");
    }
    out.labels.push_back(*stage);
  }
  return out;
}

void save_labels(const EpochLabels& labels, const std::filesystem::path& path) {
  std::ostringstream ss;
  ss << "epoch_index,stage\n";
  for (std::size_t i = 0; i < labels.labels.size(); ++i) {
    ss << i << ',' << static_cast<int>(labels.labels[i]) << '\n';
  }
  io::write_file(path, ss.str());
}

Recording bandpass(const Recording& rec, double lo, double hi) {
  validate(rec);
  if (!(lo > 0 && lo < hi && hi < rec.fs / 2)) {
    throw ParameterError("bandpass: need 0 < lo < hi < fs/2");
  }
  const auto filter = dsp::butter_bandpass(4, lo, hi, rec.fs);
  Recording out = rec;
  const auto padlen = static_cast<std::size_t>(std::llround(rec.fs));
  out.samples = dsp::sosfiltfilt(filter, rec.samples, padlen);
  return out;
}

Recording resample(const Recording& rec, double target_fs) {
  validate(rec);
  if (!(target_fs > 0)) throw ParameterError("resample: target_fs must be > 0");
  if (rec.fs == target_fs) return rec;
  const auto ratio = dsp::rational_ratio(target_fs, rec.fs, kMaxResampleFactor);
  if (!ratio) {
    throw ParameterError("resample: ratio " + std::to_string(target_fs) + "/" +
                         std::to_string(rec.fs) + " is not a representable rational");
  }
  Recording out = rec;
  out.samples = dsp::resample_poly(rec.samples, ratio->up, ratio->down);
  out.fs = target_fs;
  return out;
}

Recording preprocess(const Recording& rec) { return resample(bandpass(rec), kTargetFs); }

EpochSlices segment_epochs(const Recording& rec, double epoch_s) {
  const double per = rec.fs * epoch_s;
  if (!(per >= 1) || std::abs(per - std::round(per)) > 1e-9) {
    throw ParameterError("segment_epochs: fs * T must be a positive integer");
  }
  EpochSlices out;
  out.samples_per_epoch = static_cast<std::size_t>(std::llround(per));
  const std::size_t n = rec.samples.size() / out.samples_per_epoch;
  const std::span<const double> all(rec.samples);
  for (std::size_t e = 0; e < n; ++e) {
    out.slices.push_back(all.subspan(e * out.samples_per_epoch, out.samples_per_epoch));
  }
  out.dropped_samples = rec.samples.size() - n * out.samples_per_epoch;
  return out;
}

}  // namespace neurosleep
