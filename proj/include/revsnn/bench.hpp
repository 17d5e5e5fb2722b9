#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "revsnn/layers.hpp"
#include "revsnn/reveng.hpp"

// Micro-benchmarks over raw reversible sequences: depth, time-step and
// embedding-dimension sweeps for both engines, reporting peak activation
// bytes per image, multiply-add totals and wall time. CSV columns are
// frozen: family,mode,depth,T,dim,batch,peak_activation_bytes_per_img,
// mult_adds,wall_ms.

namespace revsnn::bench {

struct LineFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};

inline LineFit fit_line(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  LineFit f;
  const double denom = static_cast<double>(n) * sxx - sx * sx;
  f.slope = denom != 0 ? (static_cast<double>(n) * sxy - sx * sy) / denom : 0;
  f.intercept = (sy - f.slope * sx) / static_cast<double>(n);
  double ss_res = 0, ss_tot = 0;
  const double mean_y = sy / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = f.intercept + f.slope * xs[i];
    ss_res += (ys[i] - pred) * (ys[i] - pred);
    ss_tot += (ys[i] - mean_y) * (ys[i] - mean_y);
  }
  f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  return f;
}

struct SweepRow {
  std::string family;  // resnet | former
  std::string mode;    // oracle | reversible
  int depth = 1;
  int T = 4;
  i64 dim = 8;
  i64 batch = 2;
  double peak_activation_bytes_per_img = 0;
  u64 mult_adds = 0;
  double wall_ms = 0;
  // summary-only extras
  u64 ops_forward = 0, ops_reverse = 0, ops_backward = 0;
  double peak_act_state_per_img = 0;
};

template <typename S>
SweepRow run_point(const std::string& family, EngineMode mode, int depth, int T, i64 dim,
                   i64 batch, u64 seed) {
  Rng rng(seed);
  RunContext ctx;
  ctx.ledger.set_run_meta(depth, T, static_cast<int>(batch), engine_mode_name(mode));
  NeuronParams<S> np;  // LIF defaults

  ReversibleSequence<S> seq;
  std::vector<i64> stream_shape;
  if (family == "resnet") {
    const i64 c = dim;
    for (int b = 0; b < depth; ++b)
      seq.add(std::make_unique<CouplingBlock<S>>(make_residual_fn<S>(c, np, rng),
                                                 make_residual_fn<S>(c, np, rng)));
    stream_shape = {batch, c, 8, 8};
  } else {
    const i64 heads = 4;
    for (int b = 0; b < depth; ++b)
      seq.add(std::make_unique<CouplingBlock<S>>(
          std::make_unique<SSABlock<S>>(dim, heads, np, rng),
          make_mlp_block<S>(dim, 4.0, np, rng)));
    stream_shape = {batch, 16, dim};
  }

  Seq<S> x1, x2, dy1, dy2;
  for (int t = 0; t < T; ++t) {
    Tensor<S> a(stream_shape), b(stream_shape), c(stream_shape), d(stream_shape);
    rng.fill_normal(a, 0.0, 1.0);
    rng.fill_normal(b, 0.0, 1.0);
    rng.fill_normal(c, 0.0, 0.5);
    rng.fill_normal(d, 0.0, 0.5);
    x1.push_back(std::move(a));
    x2.push_back(std::move(b));
    dy1.push_back(std::move(c));
    dy2.push_back(std::move(d));
  }

  const auto t0 = std::chrono::steady_clock::now();
  if (mode == EngineMode::oracle)
    oracle_step(seq, x1, x2, dy1, dy2, ctx);
  else
    sequence_train_step(seq, x1, x2, dy1, dy2, ctx);
  const auto t1 = std::chrono::steady_clock::now();

  const MemoryReport mem = ctx.ledger.snapshot();
  SweepRow row;
  row.family = family;
  row.mode = engine_mode_name(mode);
  row.depth = depth;
  row.T = T;
  row.dim = dim;
  row.batch = batch;
  row.peak_activation_bytes_per_img =
      static_cast<double>(mem.peak(MemCategory::activations)) / static_cast<double>(batch);
  row.mult_adds = ctx.ops.total();
  row.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
  row.ops_forward = ctx.ops.total(Phase::forward);
  row.ops_reverse = ctx.ops.total(Phase::reverse);
  row.ops_backward = ctx.ops.total(Phase::backward);
  row.peak_act_state_per_img = mem.activation_state_peak_per_image();
  return row;
}

struct BenchResult {
  std::vector<SweepRow> depth_rows;  // depth in {1,2,4,8}, T=4
  std::vector<SweepRow> t_rows;      // T in {1,2,4,8}, depth=4
  std::vector<SweepRow> dim_rows;    // former dim in {32,64,128}, depth=4
  nlohmann::json summary;
};

namespace detail {

struct PointSpec {
  std::string family;
  EngineMode mode;
  int depth;
  int T;
  i64 dim;
  int sweep;  // 0 depth, 1 T, 2 dim
};

template <typename S>
void run_points(const std::vector<PointSpec>& specs, std::vector<SweepRow>& out, u64 seed,
                int threads, i64 batch) {
  out.resize(specs.size());
  auto work = [&](std::size_t i) {
    out[i] = run_point<S>(specs[i].family, specs[i].mode, specs[i].depth, specs[i].T,
                          specs[i].dim, batch, seed + static_cast<u64>(i));
  };
  if (threads <= 1) {
    for (std::size_t i = 0; i < specs.size(); ++i) work(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<std::size_t> next{0};
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&]() {
      for (std::size_t i = next.fetch_add(1); i < specs.size(); i = next.fetch_add(1)) work(i);
    });
  for (auto& th : pool) th.join();
}

}  // namespace detail

/// The op-count ratio reversible/oracle for matching rows.
inline double op_ratio(const SweepRow& rev, const SweepRow& ora) {
  return static_cast<double>(rev.mult_adds) / static_cast<double>(ora.mult_adds);
}

template <typename S = double>
BenchResult run_bench(u64 seed, int threads = 1, i64 batch = 2) {
  BenchResult r;
  const std::vector<int> depths{1, 2, 4, 8};
  const std::vector<int> steps{1, 2, 4, 8};
  const std::vector<i64> dims{32, 64, 128};

  std::vector<detail::PointSpec> specs;
  for (int d : depths)
    for (EngineMode m : {EngineMode::oracle, EngineMode::reversible})
      specs.push_back({"resnet", m, d, 4, 8, 0});
  const std::size_t n_depth = specs.size();
  for (int t : steps)
    for (EngineMode m : {EngineMode::oracle, EngineMode::reversible})
      specs.push_back({"resnet", m, 4, t, 8, 1});
  const std::size_t n_t = specs.size();
  for (i64 dim : dims)
    for (EngineMode m : {EngineMode::oracle, EngineMode::reversible})
      specs.push_back({"former", m, 4, 4, dim, 2});

  std::vector<SweepRow> rows;
  detail::run_points<S>(specs, rows, seed, threads, batch);
  r.depth_rows.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(n_depth));
  r.t_rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_depth),
                  rows.begin() + static_cast<std::ptrdiff_t>(n_t));
  r.dim_rows.assign(rows.begin() + static_cast<std::ptrdiff_t>(n_t), rows.end());

  // Slope fits per engine (peak activation bytes/img against the swept
  // variable) and per-point op ratios.
  auto collect = [](const std::vector<SweepRow>& rs, const std::string& mode, auto key_fn) {
    std::vector<double> xs, ys;
    for (const auto& row : rs)
      if (row.mode == mode) {
        xs.push_back(key_fn(row));
        ys.push_back(row.peak_activation_bytes_per_img);
      }
    return fit_line(xs, ys);
  };
  auto depth_key = [](const SweepRow& row) { return static_cast<double>(row.depth); };
  auto t_key = [](const SweepRow& row) { return static_cast<double>(row.T); };
  auto dim_key = [](const SweepRow& row) { return static_cast<double>(row.dim); };

  nlohmann::json ratios = nlohmann::json::array();
  auto emit_ratios = [&](const std::vector<SweepRow>& rs) {
    for (std::size_t i = 0; i + 1 < rs.size(); i += 2) {
      const SweepRow& a = rs[i];
      const SweepRow& b = rs[i + 1];
      const SweepRow& ora = a.mode == "oracle" ? a : b;
      const SweepRow& rev = a.mode == "oracle" ? b : a;
      ratios.push_back({{"family", ora.family},
                        {"depth", ora.depth},
                        {"T", ora.T},
                        {"dim", ora.dim},
                        {"op_ratio", op_ratio(rev, ora)}});
    }
  };
  emit_ratios(r.depth_rows);
  emit_ratios(r.t_rows);
  emit_ratios(r.dim_rows);

  const LineFit d_ora = collect(r.depth_rows, "oracle", depth_key);
  const LineFit d_rev = collect(r.depth_rows, "reversible", depth_key);
  const LineFit t_ora = collect(r.t_rows, "oracle", t_key);
  const LineFit t_rev = collect(r.t_rows, "reversible", t_key);
  const LineFit m_ora = collect(r.dim_rows, "oracle", dim_key);
  const LineFit m_rev = collect(r.dim_rows, "reversible", dim_key);

  double rev_min = 0, rev_max = 0;
  for (const auto& row : r.depth_rows)
    if (row.mode == "reversible") {
      const double v = row.peak_activation_bytes_per_img;
      if (rev_min == 0 || v < rev_min) rev_min = v;
      if (v > rev_max) rev_max = v;
    }

  auto fit_json = [](const LineFit& f) {
    return nlohmann::json{{"slope", f.slope}, {"intercept", f.intercept}, {"r2", f.r2}};
  };
  r.summary = nlohmann::json{
      {"depth_sweep",
       {{"oracle_fit", fit_json(d_ora)},
        {"reversible_fit", fit_json(d_rev)},
        {"reversible_peak_spread", rev_min > 0 ? rev_max / rev_min : 0.0}}},
      {"timestep_sweep",
       {{"oracle_fit", fit_json(t_ora)},
        {"reversible_fit", fit_json(t_rev)},
        {"slope_ratio", t_ora.slope != 0 ? t_rev.slope / t_ora.slope : 0.0}}},
      {"dim_sweep", {{"oracle_fit", fit_json(m_ora)}, {"reversible_fit", fit_json(m_rev)}}},
      {"op_ratios", ratios}};
  return r;
}

inline void write_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("bench: cannot write " + path);
  out << "family,mode,depth,T,dim,batch,peak_activation_bytes_per_img,mult_adds,wall_ms\n";
  for (const auto& r : rows)
    out << r.family << ',' << r.mode << ',' << r.depth << ',' << r.T << ',' << r.dim << ','
        << r.batch << ',' << r.peak_activation_bytes_per_img << ',' << r.mult_adds << ','
        << r.wall_ms << "\n";
}

template <typename S = double>
BenchResult run_and_write(const std::string& out_dir, u64 seed, int threads = 1) {
  std::filesystem::create_directories(out_dir);
  BenchResult r = run_bench<S>(seed, threads);
  write_csv(out_dir + "/bench_depth.csv", r.depth_rows);
  write_csv(out_dir + "/bench_timestep.csv", r.t_rows);
  write_csv(out_dir + "/bench_dim.csv", r.dim_rows);
  std::ofstream js(out_dir + "/bench_summary.json");
  js << r.summary.dump(2) << "\n";
  return r;
}

}  // namespace revsnn::bench
