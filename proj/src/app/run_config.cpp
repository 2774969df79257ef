#include "neurosleep/app/run_config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "neurosleep/errors.hpp"

namespace neurosleep::app {

namespace {

void check_keys(const YAML::Node& node, const std::string& where, const std::set<std::string>& allowed) {
  if (!node.IsMap()) throw ParameterError("config: '" + where + "' must be a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw ParameterError("config: unknown key '" + (where.empty() ? key : where + "." + key) + "'");
    }
  }
}

template <class T>
void read(const YAML::Node& node, const char* key, const std::string& where, T& out) {
  const auto v = node[key];
  if (!v) return;
  try {
    out = v.as<T>();
  } catch (const YAML::Exception&) {
    throw ParameterError("config: bad value for '" + where + "." + key + "'");
  }
}

void read_bool(const YAML::Node& node, const char* key, const std::string& where, bool& out) {
  read<bool>(node, key, where, out);
}

void read_int(const YAML::Node& node, const char* key, const std::string& where, int& out) {
  read<int>(node, key, where, out);
}

void read_encoder(const YAML::Node& n, EncoderConfig& e) {
  check_keys(n, "encoder", {"k_slow", "k_fast", "sigma_window", "sigma_floor", "sigma_floor_rel", "r_init", "fast_sigma"});
  read(n, "k_slow", "encoder", e.k_slow);
  read(n, "k_fast", "encoder", e.k_fast);
  read(n, "sigma_window", "encoder", e.sigma_window);
  if (n["sigma_floor"] && !n["sigma_floor"].IsNull()) {
    double f = 0;
    read(n, "sigma_floor", "encoder", f);
    e.sigma_floor = f;
  }
  read(n, "sigma_floor_rel", "encoder", e.sigma_floor_rel);
  if (n["r_init"]) {
    std::string s;
    read(n, "r_init", "encoder", s);
    if (s == "first_sample") {
      e.r_init = RInitPolicy::first_sample;
    } else if (s == "zero") {
      e.r_init = RInitPolicy::zero;
    } else {
      throw ParameterError("config: encoder.r_init must be first_sample or zero");
    }
  }
  if (n["fast_sigma"]) {
    std::string s;
    read(n, "fast_sigma", "encoder", s);
    if (s == "signal") {
      e.fast_sigma = FastSigmaSource::signal;
    } else if (s == "residual") {
      e.fast_sigma = FastSigmaSource::residual;
    } else {
      throw ParameterError("config: encoder.fast_sigma must be signal or residual");
    }
  }
}

void read_model(const YAML::Node& n, net::ModelConfig& m) {
  check_keys(n, "model", {"profile", "kernel_sizes", "branch_width", "fused_width", "gate_reduction", "attn_dim",
                          "window_radius", "leak", "fire_threshold", "gate_bypass", "pooling"});
  if (n["profile"]) {
    std::string s;
    read(n, "profile", "model", s);
    m = net::ModelConfig::for_profile(net::parse_profile(s));
  }
  if (n["kernel_sizes"]) {
    std::vector<int> k;
    read(n, "kernel_sizes", "model", k);
    if (k.size() != 3) throw ParameterError("config: model.kernel_sizes needs three values");
    m.kernel_sizes = {k[0], k[1], k[2]};
  }
  read_int(n, "branch_width", "model", m.branch_width);
  read_int(n, "fused_width", "model", m.fused_width);
  read_int(n, "gate_reduction", "model", m.gate_reduction);
  read_int(n, "attn_dim", "model", m.attn_dim);
  read_int(n, "window_radius", "model", m.window_radius);
  read(n, "leak", "model", m.leak);
  read(n, "fire_threshold", "model", m.fire_threshold);
  read_bool(n, "gate_bypass", "model", m.gate_bypass);
  if (n["pooling"]) {
    std::string s;
    read(n, "pooling", "model", s);
    if (s == "attention") {
      m.pooling = net::TokenPooling::attention;
    } else if (s == "mean") {
      m.pooling = net::TokenPooling::mean;
    } else {
      throw ParameterError("config: model.pooling must be attention or mean");
    }
  }
}

void read_train(const YAML::Node& n, TrainConfig& t) {
  check_keys(n, "train", {"lr", "weight_decay", "batch_size", "block_size", "max_epochs", "patience", "monitor",
                          "class_weights"});
  read(n, "lr", "train", t.lr);
  read(n, "weight_decay", "train", t.weight_decay);
  read_int(n, "batch_size", "train", t.batch_size);
  read_int(n, "block_size", "train", t.block_size);
  read_int(n, "max_epochs", "train", t.max_epochs);
  read_int(n, "patience", "train", t.patience);
  read(n, "class_weights", "train", t.class_weights);
  if (n["monitor"]) {
    std::string s;
    read(n, "monitor", "train", s);
    if (s == "val_accuracy") {
      t.monitor = Monitor::val_accuracy;
    } else if (s == "val_loss") {
      t.monitor = Monitor::val_loss;
    } else {
      throw ParameterError("config: train.monitor must be val_accuracy or val_loss");
    }
  }
}

}  // namespace

net::ModelConfig RunConfig::effective_model() const {
  net::ModelConfig m = model;
  m.dense_input = ablations.dense_input;
  m.single_branch = ablations.single_branch;
  m.use_elif = !ablations.no_elif;
  return m;
}

void RunConfig::validate() const {
  encoder.validate();
  thresholds.validate();
  grid.validate();
  effective_model().validate();
  train.validate();
  if (cv_folds < 2) throw ParameterError("config: cv.folds must be >= 2");
  if (!(cv_val_fraction >= 0 && cv_val_fraction < 1)) throw ParameterError("config: cv.val_fraction must be in [0, 1)");
  if (!(gap_tolerance >= 0)) throw ParameterError("config: s2e.gap_tolerance must be >= 0");
}

RunConfig parse_run_config(const std::string& yaml_text) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::Exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  RunConfig rc;
  if (root.IsNull()) return rc;
  check_keys(root, "", {"seed", "out", "encoder", "thresholds", "sweep", "model", "train", "cv", "s2e", "ablations"});
  read(root, "seed", "", rc.seed);
  if (root["out"]) {
    std::string s;
    read(root, "out", "", s);
    rc.out = s;
  }
  if (root["encoder"]) read_encoder(root["encoder"], rc.encoder);
  if (const auto n = root["thresholds"]) {
    check_keys(n, "thresholds", {"snr_db", "nmse", "corr"});
    read(n, "snr_db", "thresholds", rc.thresholds.tau_snr);
    read(n, "nmse", "thresholds", rc.thresholds.tau_nmse);
    read(n, "corr", "thresholds", rc.thresholds.tau_corr);
  }
  if (const auto n = root["sweep"]) {
    check_keys(n, "sweep", {"k_values"});
    read(n, "k_values", "sweep", rc.grid.k_values);
  }
  if (root["model"]) read_model(root["model"], rc.model);
  if (root["train"]) read_train(root["train"], rc.train);
  if (const auto n = root["cv"]) {
    check_keys(n, "cv", {"folds", "val_fraction"});
    read_int(n, "folds", "cv", rc.cv_folds);
    read(n, "val_fraction", "cv", rc.cv_val_fraction);
  }
  if (const auto n = root["s2e"]) {
    check_keys(n, "s2e", {"gap_tolerance"});
    read(n, "gap_tolerance", "s2e", rc.gap_tolerance);
  }
  if (const auto n = root["ablations"]) {
    check_keys(n, "ablations", {"dense_input", "single_branch", "no_elif"});
    read_bool(n, "dense_input", "ablations", rc.ablations.dense_input);
    read_bool(n, "single_branch", "ablations", rc.ablations.single_branch);
    read_bool(n, "no_elif", "ablations", rc.ablations.no_elif);
  }
  rc.train.seed = rc.seed;
  rc.validate();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const ParameterError& e) {
    throw ParameterError(path.string() + ": " + e.what());
  }
}

}  // namespace neurosleep::app
