// Command-line front end: train / verify / bench / inspect.
//
// Exit codes: 0 success (verify: all properties pass), 1 property failure,
// 2 usage or configuration error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "revsnn/revsnn.hpp"

namespace {

using namespace revsnn;

std::string env_or(const char* name, const std::string& fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

int env_threads() {
  const char* v = std::getenv("REVSNN_THREADS");
  if (!v || !*v) return 1;
  const int n = std::atoi(v);
  return n > 0 ? n : 1;
}

template <typename S>
NeuronParams<S> neuron_from_config(const RunConfig& c) {
  NeuronParams<S> np;
  np.kind = c.neuron == "if" ? NeuronKind::if_ : NeuronKind::lif;
  np.tau_m = static_cast<S>(c.tau_m);
  np.v_th = static_cast<S>(c.v_th);
  np.v_reset = static_cast<S>(c.v_reset);
  np.sg_width = static_cast<S>(c.sg_width);
  return np;
}

template <typename S>
std::unique_ptr<Network<S>> build_from_config(const RunConfig& c) {
  if (c.family == "revsresnet" || c.family == "vanilla_resnet") {
    ResNetConfig<S> rc;
    rc.blocks_per_stage = c.blocks;
    rc.stream_channels = c.channels;
    rc.stem_channels = c.stem_channels;
    rc.stem_stride = c.stem_stride;
    rc.in_channels = c.shape[0];
    rc.num_classes = c.num_classes;
    rc.T = static_cast<int>(c.T);
    rc.neuron = neuron_from_config<S>(c);
    return c.family == "revsresnet" ? build_revsresnet<S>(rc, c.seed)
                                    : build_vanilla_counterpart<S>(rc, c.seed);
  }
  FormerConfig<S> fc;
  fc.L = static_cast<int>(c.l_blocks);
  fc.embed_dim = c.embed_dim;
  fc.heads = c.heads;
  fc.mlp_ratio = c.mlp_ratio;
  fc.T = static_cast<int>(c.T);
  fc.num_classes = c.num_classes;
  fc.in_channels = c.shape[0];
  fc.tokenizer_channels = {c.embed_dim / 2, c.embed_dim};
  fc.tokenizer_pools = {true, true};
  fc.attn_scale = static_cast<S>(c.attn_scale);
  fc.neuron = neuron_from_config<S>(c);
  return c.family == "revsformer" ? build_revsformer<S>(fc, c.seed)
                                  : build_vanilla_counterpart<S>(fc, c.seed);
}

template <typename S>
Dataset<S> dataset_from_config(const RunConfig& c) {
  if (c.source == "idx") return load_idx<S>(c.idx_images, c.idx_labels);
  return make_synthetic<S>(synth_task_from_name(c.task), c.num_samples,
                           static_cast<int>(c.data_classes), c.shape, c.seed + 17,
                           static_cast<int>(c.T));
}

template <typename S>
void dump_params(Network<S>& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  const char magic[8] = {'R', 'S', 'N', 'N', 'P', 'A', 'R', '1'};
  out.write(magic, 8);
  const std::uint32_t prec = sizeof(S);
  out.write(reinterpret_cast<const char*>(&prec), 4);
  auto params = net.params();
  const std::uint64_t count = params.size();
  out.write(reinterpret_cast<const char*>(&count), 8);
  for (Param<S>* p : params) {
    const std::uint64_t n = static_cast<std::uint64_t>(p->value.numel());
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(n * sizeof(S)));
  }
}

template <typename S>
int run_train(const RunConfig& cfg) {
  const std::string outdir = env_or("REVSNN_OUTDIR", cfg.outdir);
  std::filesystem::create_directories(outdir);
  auto net = build_from_config<S>(cfg);
  Dataset<S> data = dataset_from_config<S>(cfg);

  TrainState<S> st;
  st.net = net.get();
  st.mode = cfg.engine == "oracle" ? EngineMode::oracle : EngineMode::reversible;
  st.seed = cfg.seed;
  st.opt.kind = cfg.opt_kind == "adamw" ? OptKind::adamw : OptKind::sgd;
  st.opt.lr = cfg.lr;
  st.opt.momentum = cfg.momentum;
  st.opt.beta1 = cfg.beta1;
  st.opt.beta2 = cfg.beta2;
  st.opt.weight_decay = cfg.weight_decay;
  st.ctx.ledger.set_run_meta(0, static_cast<int>(cfg.T), static_cast<int>(cfg.batch),
                             cfg.engine);
  net->register_memory(st.ctx);

  nlohmann::json metrics = nlohmann::json::array();
  for (i64 e = 0; e < cfg.epochs; ++e) {
    EpochMetrics<S> m = train_epoch(st, data, cfg.batch);
    std::cout << "epoch " << (e + 1) << "/" << cfg.epochs << "  loss " << std::fixed
              << std::setprecision(4) << m.loss << "  acc " << m.accuracy << "  peak/img "
              << std::setprecision(0) << m.mem.activation_state_peak_per_image() << " B\n";
    metrics.push_back({{"epoch", e + 1},
                       {"loss", m.loss},
                       {"accuracy", m.accuracy},
                       {"op_count", m.op_count},
                       {"wall_ms", m.wall_ms},
                       {"peak_activation_state_per_img", m.mem.activation_state_peak_per_image()}});
  }
  {
    std::ofstream f(outdir + "/train_metrics.json");
    f << metrics.dump(2) << "\n";
  }
  {
    std::ofstream f(outdir + "/memory_report.json");
    f << st.ctx.ledger.snapshot().to_json().dump(2) << "\n";
  }
  dump_params(*net, outdir + "/params.bin");
  std::cout << "wrote " << outdir << "/train_metrics.json, memory_report.json, params.bin\n";
  return 0;
}

int run_verify(const RunConfig* cfg, const std::string& out_path, bool quick,
               const std::string& inject, u64 seed_override, bool has_seed) {
  verify::Options opt;
  opt.quick = quick;
  opt.threads = env_threads();
  if (has_seed) opt.seed = seed_override;
  if (inject == "skip_reset") opt.inject = verify::Options::Inject::skip_reset;
  else if (inject == "corrupt_stats") opt.inject = verify::Options::Inject::corrupt_stats;
  else if (inject != "none") throw ConfigError("inject", 0, "unknown fault '" + inject + "'");

  const bool f32 = cfg && cfg->precision == "f32";
  verify::Report rep = f32 ? verify::run<float>(opt) : verify::run<double>(opt);

  for (const auto& p : rep.properties)
    std::cout << (p.pass ? "PASS  " : "FAIL  ") << std::left << std::setw(28) << p.name << " ["
              << p.kind << "] " << p.details << "\n";
  std::cout << (rep.all_pass() ? "all properties passed" : "PROPERTY FAILURES PRESENT") << "\n";

  if (!out_path.empty()) {
    std::filesystem::create_directories(
        std::filesystem::path(out_path).parent_path().string().empty()
            ? "."
            : std::filesystem::path(out_path).parent_path().string());
    std::ofstream f(out_path);
    f << rep.to_json().dump(2) << "\n";
    std::cout << "report written to " << out_path << "\n";
  }
  return rep.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic training engine for reversible spiking networks"};
  app.require_subcommand(1);

  std::string config_path, out_path, inject = "none";
  bool quick = false;
  std::uint64_t seed = 0;
  bool has_seed = false;

  auto* train_cmd = app.add_subcommand("train", "train a model per the run config");
  train_cmd->add_option("--config", config_path, "run config file")->required();

  auto* verify_cmd = app.add_subcommand("verify", "run the full invariant suite");
  verify_cmd->add_option("--config", config_path, "optional run config (precision)");
  verify_cmd->add_option("--out", out_path, "write the JSON report here");
  verify_cmd->add_flag("--quick", quick, "reduced trial counts");
  verify_cmd->add_option("--inject", inject, "negative control: skip_reset | corrupt_stats");
  auto* seed_opt = verify_cmd->add_option("--seed", seed, "override the suite seed");

  auto* bench_cmd = app.add_subcommand("bench", "depth/time-step/width sweeps, CSV output");
  bench_cmd->add_option("--config", config_path, "optional run config (outdir, seed)");
  bench_cmd->add_option("--out", out_path, "output directory for CSV files");

  auto* inspect_cmd = app.add_subcommand("inspect", "print the model summary");
  inspect_cmd->add_option("--config", config_path, "run config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    bool have_cfg = false;
    if (!config_path.empty()) {
      cfg = revsnn::load_config(config_path);
      have_cfg = true;
    }

    if (app.got_subcommand(train_cmd)) {
      return cfg.precision == "f32" ? run_train<float>(cfg) : run_train<double>(cfg);
    }
    if (app.got_subcommand(verify_cmd)) {
      has_seed = seed_opt->count() > 0;
      return run_verify(have_cfg ? &cfg : nullptr, out_path, quick, inject, seed, has_seed);
    }
    if (app.got_subcommand(bench_cmd)) {
      const std::string dir =
          env_or("REVSNN_OUTDIR", out_path.empty() ? (have_cfg ? cfg.outdir : "out") : out_path);
      const u64 s = have_cfg ? cfg.seed : 42;
      revsnn::bench::BenchResult r = revsnn::bench::run_and_write<double>(dir, s, env_threads());
      std::cout << "bench CSV files written to " << dir << "\n"
                << r.summary.dump(2) << "\n";
      return 0;
    }
    if (app.got_subcommand(inspect_cmd)) {
      auto show = [&](auto& net) {
        std::cout << "family: " << net->family << "\nlayers (conv+fc): " << net->layer_count()
                  << "\nparameters: " << net->param_count() << "\n";
        const u64 flops = revsnn::measure_dense_flops(
            *net, {cfg.shape[0], cfg.shape[1], cfg.shape[2]}, static_cast<int>(cfg.T));
        std::cout << "dense mult-adds over T=" << cfg.T << ": " << flops << " ("
                  << static_cast<double>(flops) / 1e9 << " G)\n\n";
        std::cout << std::left << std::setw(28) << "module" << std::setw(20) << "kind"
                  << "params\n";
        for (const auto& row : revsnn::summarize(*net))
          if (row.params > 0 || row.kind == "sequential")
            std::cout << std::left << std::setw(28) << row.name << std::setw(20) << row.kind
                      << row.params << "\n";
      };
      if (cfg.precision == "f32") {
        auto net = build_from_config<float>(cfg);
        show(net);
      } else {
        auto net = build_from_config<double>(cfg);
        show(net);
      }
      return 0;
    }
    return 2;
  } catch (const revsnn::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const revsnn::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
