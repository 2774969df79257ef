#pragma once

// Model configuration, the named parameter store, initialisation and checkpoints.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace neurosleep::net {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

enum class Profile : std::uint8_t { desk = 0, paper_scale = 1 };
enum class TokenPooling : std::uint8_t { attention = 0, mean = 1 };

std::string_view profile_name(Profile p);
Profile parse_profile(std::string_view name);  // ParameterError on unknown names

struct ModelConfig {
  Profile profile = Profile::desk;
  std::array<int, 3> kernel_sizes{7, 15, 31};
  int branch_width = 8;   // w
  int fused_width = 24;   // C
  int gate_reduction = 4;
  int attn_dim = 24;      // d
  int window_radius = 15; // L
  double leak = 0.9;
  double fire_threshold = 1.0;
  int n_classes = 5;
  int epoch_samples = 3000;  // T_b
  bool single_branch = false;  // one branch of kernel k_m and width 3w
  bool use_elif = true;
  bool gate_bypass = false;    // g == 1
  TokenPooling pooling = TokenPooling::attention;
  bool dense_input = false;    // rasters carry the z-scored signal

  static ModelConfig for_profile(Profile p);
  void validate() const;

  int slots() const { return 2 * window_radius + 1; }
  int n_branches() const { return single_branch ? 1 : 3; }
  int branch_channels() const { return single_branch ? 3 * branch_width : branch_width; }
  int branch_kernel(int b) const { return single_branch ? kernel_sizes[1] : kernel_sizes[b]; }
  int concat_width() const { return n_branches() * branch_channels(); }
  int gate_hidden() const { return fused_width / gate_reduction; }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct BranchParams {
  Mat dw;  // 4 x k
  Mat pw;  // w x 4
  Vec gamma, beta;
  Vec running_mean, running_var;  // buffers, not learnable
};

struct ModelParams {
  std::vector<BranchParams> branches;
  Mat fuse_w;  // C x 3w
  Vec fuse_b;
  Mat gate_w1;  // C/r x C
  Vec gate_b1;
  Mat gate_w2;  // C x C/r
  Vec gate_b2;
  Mat tok_w;  // C x C
  Vec tok_b;
  Vec tok_v;  // C
  Mat wq, wk, wv;  // d x C
  Mat wo;          // C x d
  Mat head_w;      // n_classes x C
  Vec head_b;
};

struct TensorView {
  std::string name;
  std::vector<int> shape;
  double* data = nullptr;
  std::size_t size = 0;
  bool learnable = true;

  std::span<double> values() const { return {data, size}; }
};

// Every tensor in a fixed order: the checkpoint order and the optimizer's pairing order.
std::vector<TensorView> tensor_views(ModelParams& p);

// All tensors shaped for cfg and zero-filled (running_var included).
ModelParams zero_params(const ModelConfig& cfg);

// Fan-in scaled uniform weights and biases, unit BN scale, zero BN shift, running stats
// (0, 1). Deterministic per seed; every value is representable in binary32.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Learnable scalars only (running statistics excluded).
std::size_t param_count(const ModelConfig& cfg);

bool params_equal(const ModelParams& a, const ModelParams& b);
// Rounds every tensor to binary32 precision.
void round_to_float(ModelParams& p);

struct Checkpoint {
  ModelConfig config;
  ModelParams params;
};

std::string encode_checkpoint(const ModelConfig& cfg, const ModelParams& params);
Checkpoint decode_checkpoint(std::string_view bytes);
void save_checkpoint(const ModelConfig& cfg, const ModelParams& params, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace neurosleep::net
