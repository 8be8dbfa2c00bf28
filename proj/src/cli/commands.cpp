#include "gradleak/cli/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "gradleak/ad/gradients.hpp"
#include "gradleak/attack/alignment.hpp"
#include "gradleak/io/gradlog.hpp"
#include "gradleak/io/image.hpp"
#include "gradleak/lab/convergence.hpp"
#include "gradleak/metrics/metrics.hpp"
#include "gradleak/rng.hpp"

namespace gradleak::cli {

namespace fs = std::filesystem;

namespace {

bool use_mnist(const ExperimentConfig& config) {
  switch (config.data.source) {
    case DataSource::kMnist: return true;
    case DataSource::kSynth: return false;
    case DataSource::kAuto:
      return !config.data.images.empty() && !config.data.labels.empty() && fs::exists(config.data.images) &&
             fs::exists(config.data.labels);
  }
  return false;
}

double mean_training_loss(const ModelSpec& spec, const ParamSet& params, const std::vector<Dataset>& clients) {
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& c : clients) {
    std::vector<std::size_t> all(c.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    total += forward_loss(spec, params, c.batch_images(all), c.batch_labels(all)) * static_cast<double>(c.size());
    n += c.size();
  }
  return total / static_cast<double>(n);
}

// Images of equal height placed left to right.
Tensor side_by_side(const Tensor& a, const Tensor& b) {
  const std::size_t c = a.dim(0), h = a.dim(1), wa = a.dim(2), wb = b.dim(2);
  Tensor out({c, h, wa + wb});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < wa; ++x) out[(ch * h + y) * (wa + wb) + x] = a[(ch * h + y) * wa + x];
      for (std::size_t x = 0; x < wb; ++x) out[(ch * h + y) * (wa + wb) + wa + x] = b[(ch * h + y) * wb + x];
    }
  return out;
}

std::string image_name(std::size_t i, std::size_t channels) {
  return "img_" + std::to_string(i) + (channels == 3 ? ".ppm" : ".pgm");
}

std::string format(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

int exit_code(ErrorKind kind) {
  return kind == ErrorKind::kConfig || kind == ErrorKind::kInvalidArgument ? kExitUsage : kExitData;
}

Dataset load_data(const ExperimentConfig& config) {
  const ModelSpec spec = ModelSpec::parse(config.model);
  Dataset data;
  if (use_mnist(config)) {
    data = load_mnist_idx(config.data.images, config.data.labels);
    if (config.data.samples > 0 && config.data.samples < data.size()) {
      std::vector<std::size_t> first(config.data.samples);
      for (std::size_t i = 0; i < first.size(); ++i) first[i] = i;
      data = data.subset(first);
    }
  } else {
    const std::size_t n = config.data.samples > 0 ? config.data.samples : 64 * config.federation.num_clients;
    data = synth_dataset(n, spec.input_shape(), spec.num_classes(), config.data.seed);
  }
  require(data.image_shape() == spec.input_shape(), ErrorKind::kData, "dataset images do not match the model input");
  return data;
}

std::string dataset_name(const ExperimentConfig& config) { return use_mnist(config) ? "mnist" : "synth"; }

SimulateSummary cmd_simulate(const ExperimentConfig& config, const fs::path& log_path) {
  const ModelSpec spec = ModelSpec::parse(config.model);
  const auto clients = split_clients(load_data(config), config.federation.num_clients);
  const ParamSet initial = init_params(spec, config.federation.seed);
  const auto result = run_fedsgd(config.federation, spec, clients, initial);
  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  write_log(log_path, config.model, result.log);
  return {result.log.size(), mean_training_loss(spec, initial, clients),
          mean_training_loss(spec, result.final_params, clients)};
}

AttackOutcome cmd_attack(const ExperimentConfig& config, const AttackRequest& request) {
  const GradientLog log = read_log(request.log);
  const ModelSpec spec = ModelSpec::parse(log.descriptor);
  const AttackMethod method = request.method.value_or(config.method);
  AttackConfig attack = config.attack;
  if (request.workers) attack.workers = *request.workers;
  if (method == AttackMethod::kCosine) attack.loss = LossKind::kCosine;
  const std::size_t needed = method == AttackMethod::kTgias ? attack.T : 1;

  AttackOutcome outcome;
  if (request.batch_tag) {
    for (std::size_t i = 0; i < log.observations.size(); ++i) {
      const auto& o = log.observations[i];
      if (o.client() == request.client && evaluation::batch_tag(o) == *request.batch_tag) outcome.cluster.push_back(i);
    }
    outcome.cluster_sizes.push_back(outcome.cluster.size());
    require(outcome.cluster.size() >= needed, ErrorKind::kData,
            "batch tag " + std::to_string(*request.batch_tag) + " of client " + std::to_string(request.client) +
                " has " + std::to_string(outcome.cluster.size()) + " observations, need " + std::to_string(needed));
  } else {
    AlignmentConfig align{config.cos_threshold, attack.batch_size, attack.label_steps, attack.label_restarts,
                          attack.seed};
    const Clusters clusters = align_gradients(log.observations, spec, align);
    std::string sizes;
    for (const auto& c : clusters) {
      outcome.cluster_sizes.push_back(c.size());
      sizes += (sizes.empty() ? "" : ", ") + std::to_string(c.size());
    }
    const auto it = std::find_if(clusters.begin(), clusters.end(), [&](const auto& c) { return c.size() >= needed; });
    require(it != clusters.end(), ErrorKind::kData,
            "no aligned cluster has " + std::to_string(needed) + " observations; cluster sizes: [" + sizes + "]");
    outcome.cluster = *it;
  }
  std::stable_sort(outcome.cluster.begin(), outcome.cluster.end(), [&](std::size_t a, std::size_t b) {
    return log.observations[a].round() < log.observations[b].round();
  });
  outcome.cluster.resize(needed);

  std::vector<GradObservation> chosen;
  for (std::size_t i : outcome.cluster) chosen.push_back(log.observations[i]);
  const ReconstructionResult result = method == AttackMethod::kTgias ? tgias_ro(chosen, spec, attack)
                                                                     : dlg_attack(chosen.front(), spec, attack);

  const auto clients = split_clients(load_data(config), config.federation.num_clients);
  const auto truth = evaluation::batch_for(config.federation, clients, chosen.front());
  const auto recon_images = split_batch(result.x, spec.input_shape());
  const auto truth_images = split_batch(truth.images, spec.input_shape());
  const MetricReport report = match_batch(recon_images, truth_images);

  const std::size_t channels = spec.input_shape().front();
  for (const char* sub : {"recon", "truth", "pairs"}) fs::create_directories(request.out_dir / sub);
  for (std::size_t i = 0; i < recon_images.size(); ++i) {
    write_image(request.out_dir / "recon" / image_name(i, channels), recon_images[i]);
    write_image(request.out_dir / "truth" / image_name(i, channels), truth_images[i]);
    write_image(request.out_dir / "pairs" / image_name(i, channels),
                side_by_side(recon_images[report.permutation[i]], truth_images[i]));
  }

  MetricsRow& row = outcome.row;
  row.run_id = std::string(to_string(method)) + "-r" + std::to_string(chosen.front().round()) + "-c" +
               std::to_string(chosen.front().client()) + "-s" + std::to_string(attack.seed);
  row.method = std::string(to_string(method));
  row.dataset = dataset_name(config);
  row.model = log.descriptor;
  row.batch_size = attack.batch_size;
  row.T = chosen.size();
  row.aggregator = method == AttackMethod::kTgias ? attack.aggregator.name() : "mean";
  row.dp_sigma = config.federation.dp_sigma;
  row.sparsify_p = config.federation.sparsify_p;
  row.seed = attack.seed;
  row.mse = report.mean_mse;
  row.psnr_db = psnr(report.mean_mse);
  row.ssim = report.mean_ssim;
  row.wall_time_s = result.wall_time_s;
  append_metrics_csv(config.output.csv.empty() ? request.out_dir / "metrics.csv" : config.output.csv, {row});
  return outcome;
}

LabSummary cmd_lab(const std::string& sweep, const fs::path& out_dir, std::uint64_t seed) {
  lab::SweepConfig t1;
  lab::NonConvexConfig t2;
  if (sweep == "quick") {
    t1.families = 10;
    t2.seeds = 10;
  } else {
    require(sweep == "default", ErrorKind::kInvalidArgument, "unknown sweep '" + sweep + "' (default, quick)");
  }
  t1.seed = seed;
  t2.seed = seed;
  fs::create_directories(out_dir);

  LabSummary summary;
  const auto rows = lab::sweep_theorem1(t1);
  std::ofstream f1(out_dir / "theorem1.csv");
  f1 << "m,n,family,gamma,theorem1_pass,theorem1_margin,claim1_pass,claim1_margin\n";
  for (const auto& r : rows) {
    f1 << r.m << ',' << r.n << ',' << r.family << ',' << format(r.gamma) << ',' << r.theorem1.pass << ','
       << format(r.theorem1.worst_margin) << ',' << r.claim1.pass << ',' << format(r.claim1.worst_margin) << '\n';
    ++summary.theorem1_total;
    summary.theorem1_pass += r.theorem1.pass;
    summary.claim1_pass += r.claim1.pass;
  }
  for (std::size_t m : t1.m_values) {
    for (std::size_t n : t1.n_values) {
      const std::uint64_t family_seed = derive_seed(seed, {0x7ace, m, n});
      const auto family = lab::make_quadratic_family(t1.T, m, n, t1.mu, t1.L, 0.5, family_seed);
      std::vector<double> x0 = family.x_star;
      for (double& v : x0) v += 10.0 / std::sqrt(static_cast<double>(n));
      const auto trace = lab::run_robust_gd(family, t1.aggregator, 1.0 / t1.L, t1.steps, x0);
      std::ofstream f(out_dir / ("trace_m" + std::to_string(m) + "_n" + std::to_string(n) + ".csv"));
      lab::write_trace_csv(f, trace, family);
    }
  }

  std::ofstream f2(out_dir / "theorem2.csv");
  f2 << "seed,m,theorem2_pass,theorem2_margin\n";
  for (const auto& r : lab::sweep_theorem2(t2)) {
    f2 << r.seed << ',' << r.m << ',' << r.theorem2.pass << ',' << format(r.theorem2.worst_margin) << '\n';
    ++summary.theorem2_total;
    summary.theorem2_pass += r.theorem2.pass;
  }
  return summary;
}

std::vector<EvalRow> cmd_eval(const fs::path& recon_dir, const fs::path& truth_dir, const fs::path& out_csv) {
  require(fs::is_directory(recon_dir), ErrorKind::kIo, "not a directory: " + recon_dir.string());
  require(fs::is_directory(truth_dir), ErrorKind::kIo, "not a directory: " + truth_dir.string());
  std::map<std::string, std::vector<std::string>> batches;
  for (const auto& entry : fs::directory_iterator(truth_dir)) {
    const auto ext = entry.path().extension();
    if (!entry.is_regular_file() || (ext != ".pgm" && ext != ".ppm")) continue;
    const std::string stem = entry.path().stem().string();
    const auto cut = stem.rfind('_');
    batches[cut == std::string::npos ? stem : stem.substr(0, cut)].push_back(entry.path().filename().string());
  }
  require(!batches.empty(), ErrorKind::kData, "no PGM/PPM images in " + truth_dir.string());

  std::vector<EvalRow> rows;
  for (auto& [batch, names] : batches) {
    std::sort(names.begin(), names.end());
    std::vector<Tensor> truth, recon;
    for (const auto& name : names) {
      require(fs::exists(recon_dir / name), ErrorKind::kData,
              "reconstruction missing for " + name + " in " + recon_dir.string());
      truth.push_back(read_image(truth_dir / name));
      recon.push_back(read_image(recon_dir / name));
    }
    const MetricReport report = match_batch(recon, truth);
    for (std::size_t i = 0; i < names.size(); ++i)
      rows.push_back({batch, names[i], names[report.permutation[i]], report.mse[i], report.psnr[i], report.ssim[i]});
  }
  if (out_csv.has_parent_path()) fs::create_directories(out_csv.parent_path());
  std::ofstream out(out_csv);
  require(static_cast<bool>(out), ErrorKind::kIo, "cannot write " + out_csv.string());
  out << "batch,truth,recon,mse,psnr,ssim\n";
  for (const auto& r : rows)
    out << r.batch << ',' << r.truth << ',' << r.recon << ',' << format(r.mse) << ',' << format(r.psnr) << ','
        << format(r.ssim) << '\n';
  return rows;
}

}  // namespace gradleak::cli
