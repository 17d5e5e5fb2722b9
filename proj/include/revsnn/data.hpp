#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "revsnn/errors.hpp"
#include "revsnn/rng.hpp"
#include "revsnn/tensor.hpp"

namespace revsnn {

/// In-memory dataset. Static samples are [C,H,W] and get constant-current
/// coded at batch time; temporal samples are [T,C,H,W] spike trains.
template <typename S>
struct Dataset {
  std::vector<Tensor<S>> samples;
  std::vector<int> labels;
  int num_classes = 2;
  bool temporal = false;
};

enum class SynthTask { two_gaussians, xor_patterns, poisson_rate };

inline SynthTask synth_task_from_name(const std::string& name) {
  if (name == "two_gaussians") return SynthTask::two_gaussians;
  if (name == "xor_patterns") return SynthTask::xor_patterns;
  if (name == "poisson_rate") return SynthTask::poisson_rate;
  throw ConfigError("task", 0, "unknown synthetic task '" + name + "'");
}

/// Deterministic synthetic datasets at image shapes [C,H,W].
///   two_gaussians  linearly separable class clusters along a fixed pattern
///   xor_patterns   two-quadrant sign parity task (not linearly separable)
///   poisson_rate   temporal Bernoulli spike trains, class-dependent rate
template <typename S>
Dataset<S> make_synthetic(SynthTask task, i64 num_samples, int num_classes,
                          const std::vector<i64>& chw, u64 seed, int T = 4) {
  if (chw.size() != 3) throw ContractError("synthetic: shape must be [C,H,W]");
  Dataset<S> d;
  d.num_classes = num_classes;
  Rng rng(seed);
  const i64 numel = chw[0] * chw[1] * chw[2];

  switch (task) {
    case SynthTask::two_gaussians: {
      if (num_classes != 2) throw ContractError("two_gaussians: two classes only");
      Tensor<S> pattern(chw);
      rng.fill_normal(pattern, 0.0, 1.0);
      double norm = 0;
      for (i64 i = 0; i < numel; ++i) norm += static_cast<double>(pattern[i] * pattern[i]);
      norm = std::sqrt(norm);
      for (i64 i = 0; i < numel; ++i) pattern[i] = static_cast<S>(pattern[i] / norm);
      for (i64 s = 0; s < num_samples; ++s) {
        const int label = static_cast<int>(s % 2);
        const double sign = label == 0 ? 1.0 : -1.0;
        Tensor<S> x(chw);
        for (i64 i = 0; i < numel; ++i)
          x[i] = static_cast<S>(sign * 2.0 * pattern[i] + 0.3 * rng.normal());
        d.samples.push_back(std::move(x));
        d.labels.push_back(label);
      }
      break;
    }
    case SynthTask::xor_patterns: {
      if (num_classes != 2) throw ContractError("xor_patterns: two classes only");
      for (i64 s = 0; s < num_samples; ++s) {
        const double a = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const double b = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const int label = (a * b > 0) ? 0 : 1;
        Tensor<S> x(chw);
        const i64 half = chw[2] / 2;
        for (i64 c = 0; c < chw[0]; ++c)
          for (i64 i = 0; i < chw[1]; ++i)
            for (i64 j = 0; j < chw[2]; ++j) {
              const double base = (j < half ? a : b);
              x[(c * chw[1] + i) * chw[2] + j] = static_cast<S>(base + 0.25 * rng.normal());
            }
        d.samples.push_back(std::move(x));
        d.labels.push_back(label);
      }
      break;
    }
    case SynthTask::poisson_rate: {
      d.temporal = true;
      for (i64 s = 0; s < num_samples; ++s) {
        const int label = static_cast<int>(s % num_classes);
        const double rate = 0.15 + 0.6 * static_cast<double>(label) /
                                       static_cast<double>(std::max(1, num_classes - 1));
        Tensor<S> x({static_cast<i64>(T), chw[0], chw[1], chw[2]});
        for (i64 i = 0; i < x.numel(); ++i) x[i] = rng.uniform() < rate ? S(1) : S(0);
        d.samples.push_back(std::move(x));
        d.labels.push_back(label);
      }
      break;
    }
  }
  return d;
}

// ---------------------------------------------------------------------------
// IDX binary container (big-endian headers, u8 payload)

namespace detail {
inline u64 read_be_u32(std::istream& in, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError(std::string("idx: truncated file while reading ") + what);
  return (static_cast<u64>(b[0]) << 24) | (static_cast<u64>(b[1]) << 16) |
         (static_cast<u64>(b[2]) << 8) | static_cast<u64>(b[3]);
}
}  // namespace detail

/// Load an IDX image/label pair. Images normalize to [0,1]; the label count
/// must match the image count.
template <typename S>
Dataset<S> load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError("idx: cannot open " + images_path);
  const u64 magic_img = detail::read_be_u32(img, "image magic");
  if (magic_img != 0x00000803ull)
    throw IoError("idx: bad image magic in " + images_path + " (expected 0x00000803)");
  const u64 count = detail::read_be_u32(img, "image count");
  const u64 rows = detail::read_be_u32(img, "rows");
  const u64 cols = detail::read_be_u32(img, "cols");

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError("idx: cannot open " + labels_path);
  const u64 magic_lab = detail::read_be_u32(lab, "label magic");
  if (magic_lab != 0x00000801ull)
    throw IoError("idx: bad label magic in " + labels_path + " (expected 0x00000801)");
  const u64 lab_count = detail::read_be_u32(lab, "label count");
  if (lab_count != count)
    throw IoError("idx: image/label count mismatch (" + std::to_string(count) + " vs " +
                  std::to_string(lab_count) + ")");

  Dataset<S> d;
  std::vector<unsigned char> buf(rows * cols);
  int max_label = 0;
  for (u64 i = 0; i < count; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!img) throw IoError("idx: truncated image payload in " + images_path);
    Tensor<S> x({1, static_cast<i64>(rows), static_cast<i64>(cols)});
    for (std::size_t p = 0; p < buf.size(); ++p)
      x[static_cast<i64>(p)] = static_cast<S>(buf[p]) / S(255);
    char lb;
    lab.read(&lb, 1);
    if (!lab) throw IoError("idx: truncated label payload in " + labels_path);
    d.samples.push_back(std::move(x));
    d.labels.push_back(static_cast<int>(static_cast<unsigned char>(lb)));
    max_label = std::max(max_label, d.labels.back());
  }
  d.num_classes = max_label + 1;
  return d;
}

// ---------------------------------------------------------------------------
// batching

/// Stack samples into the per-step sequence a network consumes: static
/// samples are repeated at every step (constant-current coding), temporal
/// samples are sliced along their leading T axis.
template <typename S>
std::pair<Seq<S>, std::vector<int>> make_batch_sequence(const Dataset<S>& d,
                                                        const std::vector<i64>& indices, int T) {
  if (indices.empty()) throw ContractError("batch: empty index list");
  const i64 B = static_cast<i64>(indices.size());
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (i64 i : indices) labels.push_back(d.labels[static_cast<std::size_t>(i)]);

  const Tensor<S>& first = d.samples[static_cast<std::size_t>(indices[0])];
  Seq<S> xs;
  if (d.temporal) {
    if (first.dim(0) < T)
      throw ContractError("batch: temporal samples have fewer steps than requested T");
    const i64 C = first.dim(1), H = first.dim(2), W = first.dim(3);
    const i64 frame = C * H * W;
    for (int t = 0; t < T; ++t) {
      Tensor<S> step({B, C, H, W});
      for (i64 b = 0; b < B; ++b) {
        const Tensor<S>& s = d.samples[static_cast<std::size_t>(indices[static_cast<std::size_t>(b)])];
        for (i64 p = 0; p < frame; ++p) step[b * frame + p] = s[t * frame + p];
      }
      xs.push_back(std::move(step));
    }
  } else {
    const i64 C = first.dim(0), H = first.dim(1), W = first.dim(2);
    const i64 frame = C * H * W;
    Tensor<S> batch({B, C, H, W});
    for (i64 b = 0; b < B; ++b) {
      const Tensor<S>& s = d.samples[static_cast<std::size_t>(indices[static_cast<std::size_t>(b)])];
      for (i64 p = 0; p < frame; ++p) batch[b * frame + p] = s[p];
    }
    for (int t = 0; t < T; ++t) xs.push_back(batch);
  }
  return {std::move(xs), std::move(labels)};
}

}  // namespace revsnn
