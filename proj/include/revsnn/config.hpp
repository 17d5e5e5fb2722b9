#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "revsnn/errors.hpp"
#include "revsnn/tensor.hpp"

// Run configuration in a line-based `key = value` format with `[section]`
// headers and `#` comments. Unknown keys are rejected with their line
// number; every field has a documented default (see README).

namespace revsnn {

struct RunConfig {
  // [model]
  std::string family = "revsresnet";  // revsresnet | revsformer | vanilla_resnet | vanilla_former
  std::vector<i64> blocks{1, 1};      // resnet: blocks per stage
  std::vector<i64> channels{8, 16};   // resnet: per-stream (reversible) or full widths (vanilla)
  i64 stem_channels = 16;
  i64 stem_stride = 1;
  i64 num_classes = 2;
  i64 embed_dim = 32;    // former
  i64 heads = 4;         // former
  i64 l_blocks = 2;      // former
  double mlp_ratio = 4.0;
  std::string neuron = "lif";  // lif | if
  double tau_m = 2.0;
  double v_th = 1.0;
  double v_reset = 0.0;
  double sg_width = 1.0;
  double attn_scale = 0.125;

  // [run]
  std::string engine = "reversible";  // reversible | oracle
  i64 T = 4;
  i64 batch = 8;
  std::string precision = "f64";  // f64 | f32
  u64 seed = 42;
  std::string outdir = "out";
  i64 epochs = 5;

  // [optimizer]
  std::string opt_kind = "sgd";  // sgd | adamw
  double lr = 0.05;
  double momentum = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;

  // [dataset]
  std::string source = "synthetic";  // synthetic | idx
  std::string task = "two_gaussians";
  i64 num_samples = 64;
  i64 data_classes = 2;
  std::vector<i64> shape{1, 8, 8};
  std::string idx_images;
  std::string idx_labels;
};

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<i64> parse_int_list(const std::string& v, const std::string& key, int line) {
  std::vector<i64> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      std::size_t pos = 0;
      out.push_back(std::stoll(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(key, line, "expected a comma list of integers, got '" + v + "'");
    }
  }
  if (out.empty()) throw ConfigError(key, line, "empty list");
  return out;
}

inline i64 parse_int(const std::string& v, const std::string& key, int line) {
  try {
    std::size_t pos = 0;
    i64 r = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(key, line, "expected an integer, got '" + v + "'");
  }
}

inline double parse_real(const std::string& v, const std::string& key, int line) {
  try {
    std::size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ConfigError(key, line, "expected a number, got '" + v + "'");
  }
}

inline std::string join_int_list(const std::vector<i64>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace detail

inline void validate_config(const RunConfig& c) {
  auto want = [](bool ok, const std::string& key, const std::string& why) {
    if (!ok) throw ConfigError(key, 0, why);
  };
  want(c.family == "revsresnet" || c.family == "revsformer" || c.family == "vanilla_resnet" ||
           c.family == "vanilla_former",
       "family", "unknown model family '" + c.family + "'");
  want(c.T >= 1, "T", "time steps must be >= 1");
  want(c.batch >= 1, "batch", "batch size must be >= 1");
  want(c.epochs >= 0, "epochs", "epochs must be >= 0");
  want(c.precision == "f64" || c.precision == "f32", "precision", "must be f64 or f32");
  want(c.engine == "reversible" || c.engine == "oracle", "engine",
       "must be reversible or oracle");
  want(c.neuron == "lif" || c.neuron == "if", "neuron", "must be lif or if");
  want(c.tau_m > 1.0 || c.neuron == "if", "tau_m", "must exceed 1 for LIF");
  want(c.v_th > c.v_reset, "v_th", "threshold must exceed reset potential");
  want(c.sg_width > 0, "sg_width", "surrogate width must be positive");
  want(c.blocks.size() == c.channels.size(), "blocks", "blocks and channels must align");
  want(c.embed_dim >= 1 && c.heads >= 1 && c.embed_dim % c.heads == 0, "de",
       "embedding dim must divide by heads");
  want(c.l_blocks >= 1, "l", "needs at least one block");
  want(c.mlp_ratio > 0, "mlp_ratio", "must be positive");
  want(c.lr > 0, "lr", "learning rate must be positive");
  want(c.opt_kind == "sgd" || c.opt_kind == "adamw", "optimizer", "must be sgd or adamw");
  want(c.source == "synthetic" || c.source == "idx", "source", "must be synthetic or idx");
  want(c.shape.size() == 3, "shape", "expected C,H,W");
  want(c.num_samples >= 1, "num_samples", "must be >= 1");
  want(c.data_classes >= 2, "num_classes", "need at least two classes");
  if (c.source == "idx")
    want(!c.idx_images.empty() && !c.idx_labels.empty(), "images",
         "idx source needs images and labels paths");
}

/// Parse a config file. Errors name the offending key and line.
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  bool saw_model = false;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", line_no, "malformed section header '" + raw + "'");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section != "model" && section != "run" && section != "optimizer" && section != "dataset")
        throw ConfigError(section, line_no, "unknown section");
      if (section == "model") saw_model = true;
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("", line_no, "expected 'key = value'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(key, line_no, "key outside any [section]");

    auto unknown = [&]() -> ConfigError {
      return ConfigError(key, line_no, "unknown key in [" + section + "]");
    };
    if (section == "model") {
      if (key == "family") c.family = val;
      else if (key == "blocks") c.blocks = detail::parse_int_list(val, key, line_no);
      else if (key == "channels") c.channels = detail::parse_int_list(val, key, line_no);
      else if (key == "stem_channels") c.stem_channels = detail::parse_int(val, key, line_no);
      else if (key == "stem_stride") c.stem_stride = detail::parse_int(val, key, line_no);
      else if (key == "num_classes") c.num_classes = detail::parse_int(val, key, line_no);
      else if (key == "de") c.embed_dim = detail::parse_int(val, key, line_no);
      else if (key == "heads") c.heads = detail::parse_int(val, key, line_no);
      else if (key == "l") c.l_blocks = detail::parse_int(val, key, line_no);
      else if (key == "mlp_ratio") c.mlp_ratio = detail::parse_real(val, key, line_no);
      else if (key == "neuron") c.neuron = val;
      else if (key == "tau_m") c.tau_m = detail::parse_real(val, key, line_no);
      else if (key == "v_th") c.v_th = detail::parse_real(val, key, line_no);
      else if (key == "v_reset") c.v_reset = detail::parse_real(val, key, line_no);
      else if (key == "sg_width") c.sg_width = detail::parse_real(val, key, line_no);
      else if (key == "attn_scale") c.attn_scale = detail::parse_real(val, key, line_no);
      else throw unknown();
    } else if (section == "run") {
      if (key == "engine") c.engine = val;
      else if (key == "T") c.T = detail::parse_int(val, key, line_no);
      else if (key == "batch") c.batch = detail::parse_int(val, key, line_no);
      else if (key == "precision") c.precision = val;
      else if (key == "seed") c.seed = static_cast<u64>(detail::parse_int(val, key, line_no));
      else if (key == "outdir") c.outdir = val;
      else if (key == "epochs") c.epochs = detail::parse_int(val, key, line_no);
      else throw unknown();
    } else if (section == "optimizer") {
      if (key == "kind") c.opt_kind = val;
      else if (key == "lr") c.lr = detail::parse_real(val, key, line_no);
      else if (key == "momentum") c.momentum = detail::parse_real(val, key, line_no);
      else if (key == "beta1") c.beta1 = detail::parse_real(val, key, line_no);
      else if (key == "beta2") c.beta2 = detail::parse_real(val, key, line_no);
      else if (key == "weight_decay") c.weight_decay = detail::parse_real(val, key, line_no);
      else throw unknown();
    } else {  // dataset
      if (key == "source") c.source = val;
      else if (key == "task") c.task = val;
      else if (key == "num_samples") c.num_samples = detail::parse_int(val, key, line_no);
      else if (key == "num_classes") c.data_classes = detail::parse_int(val, key, line_no);
      else if (key == "shape") c.shape = detail::parse_int_list(val, key, line_no);
      else if (key == "images") c.idx_images = val;
      else if (key == "labels") c.idx_labels = val;
      else throw unknown();
    }
  }
  if (!saw_model) throw ConfigError("model", 0, "missing required [model] section");
  validate_config(c);
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", 0, "cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

/// Canonical serialization; load(serialize(c)) == c.
inline std::string serialize_config(const RunConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "[model]\n";
  os << "family = " << c.family << "\n";
  os << "blocks = " << detail::join_int_list(c.blocks) << "\n";
  os << "channels = " << detail::join_int_list(c.channels) << "\n";
  os << "stem_channels = " << c.stem_channels << "\n";
  os << "stem_stride = " << c.stem_stride << "\n";
  os << "num_classes = " << c.num_classes << "\n";
  os << "de = " << c.embed_dim << "\n";
  os << "heads = " << c.heads << "\n";
  os << "l = " << c.l_blocks << "\n";
  os << "mlp_ratio = " << c.mlp_ratio << "\n";
  os << "neuron = " << c.neuron << "\n";
  os << "tau_m = " << c.tau_m << "\n";
  os << "v_th = " << c.v_th << "\n";
  os << "v_reset = " << c.v_reset << "\n";
  os << "sg_width = " << c.sg_width << "\n";
  os << "attn_scale = " << c.attn_scale << "\n";
  os << "\n[run]\n";
  os << "engine = " << c.engine << "\n";
  os << "T = " << c.T << "\n";
  os << "batch = " << c.batch << "\n";
  os << "precision = " << c.precision << "\n";
  os << "seed = " << c.seed << "\n";
  os << "outdir = " << c.outdir << "\n";
  os << "epochs = " << c.epochs << "\n";
  os << "\n[optimizer]\n";
  os << "kind = " << c.opt_kind << "\n";
  os << "lr = " << c.lr << "\n";
  os << "momentum = " << c.momentum << "\n";
  os << "beta1 = " << c.beta1 << "\n";
  os << "beta2 = " << c.beta2 << "\n";
  os << "weight_decay = " << c.weight_decay << "\n";
  os << "\n[dataset]\n";
  os << "source = " << c.source << "\n";
  os << "task = " << c.task << "\n";
  os << "num_samples = " << c.num_samples << "\n";
  os << "num_classes = " << c.data_classes << "\n";
  os << "shape = " << detail::join_int_list(c.shape) << "\n";
  if (!c.idx_images.empty()) os << "images = " << c.idx_images << "\n";
  if (!c.idx_labels.empty()) os << "labels = " << c.idx_labels << "\n";
  return os.str();
}

inline bool config_equal(const RunConfig& a, const RunConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

}  // namespace revsnn
