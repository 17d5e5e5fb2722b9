// Acceptance suite: one pass/fail line per criterion, nonzero exit if any
// fails. Criteria map onto the verification properties plus the negative
// controls of the verify exit-code contract.

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "revsnn/revsnn.hpp"

namespace {

int failures = 0;

void line(int idx, const std::string& name, bool pass, const std::string& detail) {
  std::cout << "[" << idx << "] " << std::left << std::setw(34) << name
            << (pass ? " PASS  " : " FAIL  ") << detail << "\n";
  if (!pass) ++failures;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(4) << v;
  return os.str();
}

}  // namespace

int main() {
  using namespace revsnn;
  verify::Options opt;
  const char* th = std::getenv("REVSNN_THREADS");
  if (th && *th) opt.threads = std::max(1, std::atoi(th));

  std::cout << "== acceptance suite (64-bit, seed " << opt.seed << ") ==\n";
  verify::Report rep = verify::run<double>(opt);
  auto prop = [&](const std::string& name) -> const verify::Property& {
    const verify::Property* p = rep.find(name);
    if (!p) {
      static verify::Property missing;
      missing.name = name;
      missing.pass = false;
      missing.details = "property missing from the suite";
      return missing;
    }
    return *p;
  };

  {
    const auto& p = prop("theorem1_reconstruction");
    std::ostringstream d;
    d << p.measured["trials"].get<int>() << " blocks, max real err "
      << fmt(p.measured["max_real_abs_error"].get<double>()) << " (tol 1e-9), spikes "
      << (p.measured["spikes_bit_exact"].get<bool>() ? "bit-exact" : "MISMATCH")
      << ", knife-edge excluded " << p.measured["excluded_knife_edge"].get<int>();
    line(1, "theorem1-reconstruction", p.pass, d.str());
  }
  {
    const auto& p = prop("gradient_equivalence");
    std::ostringstream d;
    d << p.measured["trials"].get<int>() << " sequences, max rel err "
      << fmt(p.measured["max_rel_error"].get<double>()) << " (tol 1e-8), hand-derived grad err "
      << fmt(p.measured["hand_eq_weight_grad_error"].get<double>()) << " (tol 1e-10)";
    line(2, "gradient-equivalence", p.pass, d.str());
  }
  {
    const auto& p = prop("finite_difference_kernels");
    std::ostringstream d;
    d << "max rel err " << fmt(p.measured["max_rel_error"].get<double>()) << " (tol 1e-5, worst "
      << p.measured["worst_kernel"].get<std::string>() << "), loss "
      << fmt(p.measured["loss_rel_error"].get<double>()) << " (tol 1e-6)";
    line(3, "finite-difference-kernels", p.pass, d.str());
  }
  {
    const auto& p = prop("memory_vs_depth");
    std::ostringstream d;
    d << "reversible spread " << fmt(p.measured["reversible_peak_spread"].get<double>())
      << " (tol 1.05), oracle R2 " << fmt(p.measured["oracle_fit_r2"].get<double>())
      << " (min 0.99)";
    line(4, "memory-vs-depth", p.pass, d.str());
  }
  {
    const auto& p = prop("memory_vs_timestep");
    std::ostringstream d;
    d << "slope ratio " << fmt(p.measured["slope_ratio"].get<double>())
      << " (max 0.5), R2 oracle " << fmt(p.measured["oracle_r2"].get<double>()) << " reversible "
      << fmt(p.measured["reversible_r2"].get<double>());
    line(5, "memory-vs-timestep", p.pass, d.str());
  }
  {
    const auto& p = prop("compute_overhead");
    std::ostringstream d;
    d << "op ratio in [" << fmt(p.measured["min_ratio"].get<double>()) << ", "
      << fmt(p.measured["max_ratio"].get<double>()) << "] (band 1.25..1.45)";
    line(6, "compute-overhead", p.pass, d.str());
  }
  {
    const auto& p = prop("structure_counts");
    std::ostringstream d;
    d << "N(1,1,1,1)=" << p.measured["layers_n1111"].get<int>() << " N(1,2,3,2)="
      << p.measured["layers_n1232"].get<int>() << ", params "
      << fmt(p.measured["params_revsresnet21_m"].get<double>()) << "/"
      << fmt(p.measured["params_revsresnet37_m"].get<double>()) << "/"
      << fmt(p.measured["params_revsformer_2_384_m"].get<double>()) << "/"
      << fmt(p.measured["params_revsformer_4_384_m"].get<double>()) << " M, flops "
      << fmt(p.measured["flops_revsresnet21_g"].get<double>()) << " G";
    line(7, "structure-counts", p.pass, d.str());
  }
  {
    const auto& p = prop("training_parity");
    std::ostringstream d;
    d << "cross-engine param rel " << fmt(p.measured["cross_engine_param_rel"].get<double>())
      << " (tol 1e-6), accuracy gap " << fmt(p.measured["accuracy_gap_points"].get<double>())
      << " pts (tol 2)";
    line(8, "training-parity", p.pass, d.str());
  }

  // 9. verify exit-code contract with injected faults: each control flips
  // exactly the reconstruction property.
  {
    bool ok = true;
    std::string detail;
    verify::Options q = opt;
    q.quick = true;
    for (auto inject : {verify::Options::Inject::skip_reset,
                        verify::Options::Inject::corrupt_stats}) {
      q.inject = inject;
      verify::Report r = verify::run<double>(q);
      int flipped = 0;
      bool target_failed = false;
      for (const auto& p : r.properties) {
        if (!p.pass) {
          ++flipped;
          if (p.name == "theorem1_reconstruction") target_failed = true;
        }
      }
      const bool this_ok = target_failed && flipped == 1 && !r.all_pass();
      ok = ok && this_ok;
      detail += (inject == verify::Options::Inject::skip_reset ? "skip_reset" : "corrupt_stats");
      detail += this_ok ? ":flips-reconstruction-only " : ":UNEXPECTED ";
    }
    // exercise the real binary's exit codes end to end
#ifdef REVSNN_CLI_PATH
    {
      const std::string base = REVSNN_CLI_PATH;
      const int rc_ok = std::system((base + " verify --quick > cli_verify_ok.log 2>&1").c_str());
      const int rc_bad = std::system(
          (base + " verify --quick --inject corrupt_stats > cli_verify_bad.log 2>&1").c_str());
      const int code_ok = WEXITSTATUS(rc_ok);
      const int code_bad = WEXITSTATUS(rc_bad);
      const bool cli_ok = code_ok == 0 && code_bad == 1;
      ok = ok && cli_ok;
      detail += "cli-exit " + std::to_string(code_ok) + "/" + std::to_string(code_bad);
      if (!cli_ok) detail += " (want 0/1)";
    }
#endif
    line(9, "verify-exit-code-contract", ok, detail);
  }

  // verify determinism: two quick runs agree byte for byte apart from
  // timestamps and wall time.
  {
    verify::Options q = opt;
    q.quick = true;
    const std::string a = verify::run<double>(q).to_json(false).dump();
    const std::string b = verify::run<double>(q).to_json(false).dump();
    line(10, "verify-report-determinism", a == b, a == b ? "byte-identical" : "reports differ");
  }

  std::cout << (failures == 0 ? "ACCEPTANCE: all criteria passed"
                              : "ACCEPTANCE: " + std::to_string(failures) + " criterion(s) FAILED")
            << "\n";
  return failures == 0 ? 0 : 1;
}
