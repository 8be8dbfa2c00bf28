#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gradleak/cli/commands.hpp"

using namespace gradleak;
using namespace gradleak::cli;

namespace {

std::filesystem::path pick(const std::string& flag, const std::filesystem::path& from_config, const char* what) {
  if (!flag.empty()) return flag;
  require(!from_config.empty(), ErrorKind::kConfig, std::string("no ") + what + " given on the command line or in [output]");
  return from_config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-temporal gradient inversion toolkit"};
  app.require_subcommand(1);

  std::string config_path, out, log_path, method, recon, truth, sweep = "default";
  std::optional<std::uint32_t> batch_tag;
  std::uint32_t client = 0;
  std::optional<std::size_t> workers;
  std::uint64_t seed = 0;

  auto* simulate = app.add_subcommand("simulate", "Run FedSGD and write the observed gradient log");
  simulate->add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", out, "Gradient log to write (default [output] log)");

  auto* attack = app.add_subcommand("attack", "Reconstruct a batch from a gradient log");
  attack->add_option("--config", config_path, "Experiment config file")->required()->check(CLI::ExistingFile);
  attack->add_option("--log", log_path, "Gradient log (default [output] log)");
  attack->add_option("--method", method, "Attack method")->check(CLI::IsMember({"dlg", "cosine", "tgias"}));
  attack->add_option("--out", out, "Output directory (default [output] dir)");
  attack->add_option("--batch-tag", batch_tag, "Evaluation only: attack this batch tag instead of aligning");
  attack->add_option("--client", client, "Client of --batch-tag");
  attack->add_option("--workers", workers, "Threads for the per-temporal phase (0 = all cores)")
      ->envname("GRADLEAK_WORKERS");

  auto* lab = app.add_subcommand("lab", "Check the convergence bounds on synthetic families");
  lab->add_option("--sweep", sweep, "Sweep size")->check(CLI::IsMember({"default", "quick"}));
  lab->add_option("--out", out, "Output directory")->required();
  lab->add_option("--seed", seed, "Sweep seed");

  auto* eval = app.add_subcommand("eval", "Score reconstructions against ground-truth images");
  eval->add_option("--recon", recon, "Reconstruction directory")->required();
  eval->add_option("--truth", truth, "Ground-truth directory")->required();
  eval->add_option("--out", out, "Metrics CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (simulate->parsed()) {
      const auto config = load_config(config_path);
      const auto path = pick(out, config.output.log, "log path");
      const auto s = cmd_simulate(config, path);
      std::printf("wrote %zu records to %s\nmean training loss %.6f -> %.6f\n", s.records, path.string().c_str(),
                  s.initial_loss, s.final_loss);
    } else if (attack->parsed()) {
      const auto config = load_config(config_path);
      AttackRequest request;
      request.log = pick(log_path, config.output.log, "log path");
      request.out_dir = pick(out, config.output.dir, "output directory");
      if (!method.empty()) request.method = parse_method(method);
      request.batch_tag = batch_tag;
      request.client = client;
      request.workers = workers;
      const auto o = cmd_attack(config, request);
      std::printf("%s on %zu observations: mse %.6g psnr %.2f dB ssim %.4f (%.1f s)\n", o.row.method.c_str(),
                  o.cluster.size(), o.row.mse, o.row.psnr_db, o.row.ssim, o.row.wall_time_s);
    } else if (lab->parsed()) {
      const auto s = cmd_lab(sweep, out, seed);
      std::printf("theorem 1: %zu/%zu\nclaim 1: %zu/%zu\ntheorem 2: %zu/%zu\n", s.theorem1_pass, s.theorem1_total,
                  s.claim1_pass, s.theorem1_total, s.theorem2_pass, s.theorem2_total);
      if (!s.all_pass()) return kExitBound;
    } else if (eval->parsed()) {
      const auto rows = cmd_eval(recon, truth, out);
      double psnr_sum = 0.0, ssim_sum = 0.0;
      for (const auto& r : rows) {
        psnr_sum += r.psnr;
        ssim_sum += r.ssim;
      }
      std::printf("%zu images: mean psnr %.2f dB, mean ssim %.4f\n", rows.size(),
                  psnr_sum / static_cast<double>(rows.size()), ssim_sum / static_cast<double>(rows.size()));
    }
  } catch (const Error& e) {
    std::cerr << "gradleak: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "gradleak: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
