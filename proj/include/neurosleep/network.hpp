#pragma once

// Inference path of the classifier: polarity expansion, the multi-scale depthwise-separable
// encoder with channel gating, attention-pooled epoch tokens, locally masked attention across
// a window of epochs, the leaky epoch-state integrator and the linear head.

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "neurosleep/params.hpp"
#include "neurosleep/s2e.hpp"

namespace neurosleep::net {

inline constexpr double kBnEps = 1e-5;
inline constexpr double kBnMomentum = 0.1;
inline constexpr double kMasked = -std::numeric_limits<double>::infinity();

enum class Mode { train, eval };

// 4 x T_b: rows (slow+, slow-, fast+, fast-). FormatError on values outside {-1, 0, 1}
// for event rasters; dense rasters split into positive and negative parts.
Mat polarity_expand(const Raster& s);

// C x T_b gated feature map. Train mode normalises with this epoch's own statistics and
// updates the running statistics in p; eval mode uses the running statistics.
Mat eamr_forward(const Mat& e, ModelParams& p, const ModelConfig& cfg, Mode mode);
Mat eamr_forward(const Mat& e, const ModelParams& p, const ModelConfig& cfg);

// Channel gate g in (0, 1)^C for a fused map H (all ones under gate_bypass).
Vec channel_gate(const Mat& h, const ModelParams& p, const ModelConfig& cfg);

struct TokenizeResult {
  Vec u;        // C
  Vec weights;  // T_b, sums to 1
};
TokenizeResult tokenize_epoch(const Mat& h_tilde, const ModelParams& p, const ModelConfig& cfg);

// Entries 0 (visible) or kMasked. A row with nothing visible keeps its diagonal.
Mat build_attention_mask(int n, int radius, std::span<const std::uint8_t> m);

struct LtamResult {
  Mat z;      // N x C
  Mat alpha;  // N x N, zero on masked entries
};
// tokens holds one epoch per row.
LtamResult ltam_forward(const Mat& tokens, const Mat& mask, const ModelParams& p);

struct ElifState {
  Vec h;
  long n = 0;
};
// valid == false resets the state and then integrates z. Returns h / max(n, 1).
Vec elif_step(ElifState& s, const Vec& z, bool valid, double leak);

struct Classification {
  Vec logits;
  Vec probs;
  int stage = 0;
};
Classification classify(const Vec& h_bar, const ModelParams& p);

// Fraction of entries with |h| >= theta over the given state vectors. MetricError if empty.
double spike_rate(std::span<const Vec> states, double theta);

// 2L + 1 slots centred on the target; a null raster is a missing slot (treated as invalid).
struct Window {
  std::vector<const Raster*> slots;
  std::vector<std::uint8_t> mask;

  std::size_t center() const { return slots.size() / 2; }
};

// Window around batch position `center` with invalid padding beyond the recording edges.
Window make_window(std::span<const Raster> rasters, std::span<const std::uint8_t> mask,
                   std::size_t center, int radius);

struct ForwardResult {
  Classification center;
  std::vector<Vec> chain_logits;  // one per slot integrated into the centre's state
  std::vector<Vec> states;        // ELIF states h over those slots (empty without ELIF)
  Mat tokens;                     // N x C
  LtamResult attention;
};

// Eval-mode window forward. Invalid slots before the centre clear the state without
// contributing to it; an invalid centre resets and integrates itself.
ForwardResult forward(const Window& window, const ModelParams& p, const ModelConfig& cfg);

// Per-epoch tokens for all rasters of a recording (eval mode), one row per epoch.
Mat encode_tokens(std::span<const Raster> rasters, const ModelParams& p, const ModelConfig& cfg);

// Window forward from precomputed tokens (row per batch position).
ForwardResult forward_from_tokens(const Mat& tokens, std::span<const std::uint8_t> mask,
                                  std::size_t center, const ModelParams& p, const ModelConfig& cfg);

}  // namespace neurosleep::net
