// Acceptance suite: one pass/fail line per criterion. Pass criterion numbers
// as arguments to run a subset.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradleak/ad/gradients.hpp"
#include "gradleak/attack/alignment.hpp"
#include "gradleak/attack/attack.hpp"
#include "gradleak/attack/label_recovery.hpp"
#include "gradleak/error.hpp"
#include "gradleak/fl/sim.hpp"
#include "gradleak/io/csv.hpp"
#include "gradleak/io/gradlog.hpp"
#include "gradleak/io/image.hpp"
#include "gradleak/lab/convergence.hpp"
#include "gradleak/metrics/metrics.hpp"
#include "gradleak/rng.hpp"

using namespace gradleak;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

void info(const std::string& line) { std::printf("       %s\n", line.c_str()); }

const char* const kZoo[] = {"mlp:784-64-10:sigmoid", "mlp:784-64-10:relu", "cnn:1x28x28:c8k5:10"};

// ---- data shared by the attack criteria ----

const Dataset& image_pool() {
  static const Dataset pool = [] {
    if (const char* dir = std::getenv("GRADLEAK_MNIST_DIR")) {
      const fs::path d(dir);
      if (fs::exists(d / "train-images-idx3-ubyte") && fs::exists(d / "train-labels-idx1-ubyte")) {
        const Dataset all = load_mnist_idx(d / "train-images-idx3-ubyte", d / "train-labels-idx1-ubyte");
        std::vector<std::size_t> first(std::min<std::size_t>(1000, all.size()));
        std::iota(first.begin(), first.end(), 0);
        return all.subset(first);
      }
    }
    return synth_dataset(1000, {1, 28, 28}, 10, 1000);
  }();
  return pool;
}

bool using_mnist() { return image_pool().size() == 1000 && std::getenv("GRADLEAK_MNIST_DIR") != nullptr; }

struct Scenario {
  std::vector<GradObservation> log;
  std::vector<Tensor> truth;
};

// One client holding one batch of b images, observed over `rounds` FedSGD rounds.
Scenario make_scenario(const ModelSpec& spec, std::uint64_t seed, std::size_t b, double dp_sigma = 0.0,
                       double sparsify_p = 0.0, std::size_t rounds = 10) {
  const Dataset& pool = image_pool();
  std::mt19937_64 rng(derive_seed(seed, {0xacce}));
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(b);
  FederationConfig fed;
  fed.num_clients = 1;
  fed.rounds = rounds;
  fed.batch_size = b;
  fed.lr = 0.1;
  fed.dp_sigma = dp_sigma;
  fed.sparsify_p = sparsify_p;
  fed.seed = seed;
  const std::vector<Dataset> clients{pool.subset(idx)};
  auto sim = run_fedsgd(fed, spec, clients);
  const auto truth = evaluation::batch_for(fed, clients, sim.log.front());
  return {std::move(sim.log), split_batch(truth.images, spec.input_shape())};
}

AttackConfig attack_config(std::uint64_t seed, std::size_t b) {
  AttackConfig c;
  c.T = 10;
  c.R_g = 50;
  c.R_l = 20;
  c.batch_size = b;
  c.aggregator = AggregatorKind::median();
  c.seed = seed;
  return c;
}

double score(const ReconstructionResult& r, const Scenario& s) {
  return match_batch(split_batch(r.x, s.truth.front().shape()), s.truth).mean_psnr;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

// ---- 1 ----

struct ProbeStats {
  std::size_t probes = 0;
  std::size_t kinks = 0;
  std::size_t at_floor = 0;  // over 1e-4 only by rounding
  double worst = 0.0;
  double raw_worst = 0.0;
};

// Central difference per coordinate, less the rounding floor; a probe whose one-sided differences
// disagree by more than 1e-3 relative straddles a relu/maxpool kink and is
// counted separately instead of scored.
void probe(const std::function<double(const Tensor&)>& f, const Tensor& analytic, Tensor x,
           const std::vector<std::size_t>& coords, ProbeStats& stats) {
  constexpr double h = 1e-5;
  const double f0 = f(x);
  for (std::size_t i : coords) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    const double central = (up - down) / (2 * h);
    // Rounding in f(x ± h) alone moves the central estimate by about eps·|f|/h.
    const double floor = 10.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(up), std::abs(down)) / h;
    const double scale = std::max({std::abs(analytic[i]), std::abs(central), 1e-8});
    const double raw = std::abs(analytic[i] - central) / scale;
    const double rel = std::max(0.0, std::abs(analytic[i] - central) - floor) / scale;
    ++stats.probes;
    if (rel > 1e-4) {
      const double fwd = (up - f0) / h, bwd = (f0 - down) / h;
      if (std::abs(fwd - bwd) > 1e-3 * std::max({std::abs(fwd), std::abs(bwd), 1e-8})) {
        ++stats.kinks;
        continue;
      }
    }
    stats.worst = std::max(stats.worst, rel);
    stats.raw_worst = std::max(stats.raw_worst, raw);
    stats.at_floor += raw > 1e-4 && rel <= 1e-4;
  }
}

std::vector<std::size_t> sample(std::size_t n, std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> out(count);
  for (auto& v : out) v = rng() % n;
  return out;
}

Outcome criterion1() {
  ProbeStats params_stats, input_stats;
  std::size_t cases = 0;
  for (const char* desc : kZoo) {
    const ModelSpec spec = ModelSpec::parse(desc);
    for (std::size_t b : {1u, 2u, 4u}) {
      for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const std::uint64_t s = derive_seed(seed, {b, 0xfd});
        const ParamSet params = init_params(spec, s);
        std::mt19937_64 rng(s);
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Shape shape{b};
        shape.insert(shape.end(), spec.input_shape().begin(), spec.input_shape().end());
        Tensor x(shape), xh(shape);
        for (double& v : x.data()) v = u(rng);
        for (double& v : xh.data()) v = u(rng);
        std::vector<std::size_t> cls(b);
        for (auto& c : cls) c = rng() % 10;
        const Labels y = Labels::hard(cls);

        const auto g = grad_params(spec, params, x, y);
        probe([&](const Tensor& w) { return forward_loss(spec, params.unflatten(w.data()), x, y); },
              Tensor::from_data({g.size()}, g), Tensor::from_data({params.total_dim()}, params.flatten()),
              sample(params.total_dim(), 100, s + 1), params_stats);

        const auto w = tensor_weights(spec, LayerWeighting::kLinearIncrease);
        const Tensor gx = grad_input(spec, params, xh, y, g, w);
        probe([&](const Tensor& t) { return gia_loss(spec, params, t, y, g, w); }, gx, xh,
              sample(xh.size(), 100, s + 2), input_stats);
        ++cases;
      }
    }
  }
  const std::size_t probes = params_stats.probes + input_stats.probes;
  const std::size_t kinks = params_stats.kinks + input_stats.kinks;
  const bool pass = params_stats.worst < 1e-4 && input_stats.worst < 1e-4 && kinks * 100 <= probes;
  return {pass, fmt("%zu cases, %zu probes, worst rel err params %.2e input %.2e (raw %.2e / %.2e, %zu probes within "
                    "the rounding floor), %zu kink probes skipped",
                    cases, probes, params_stats.worst, input_stats.worst, params_stats.raw_worst,
                    input_stats.raw_worst, params_stats.at_floor + input_stats.at_floor, kinks)};
}

// ---- 2, 3 ----

const std::vector<lab::SweepRow>& theorem1_rows() {
  static const auto rows = lab::sweep_theorem1(lab::SweepConfig{});
  return rows;
}

Outcome criterion2() {
  const auto& rows = theorem1_rows();
  std::size_t ok = 0;
  double worst = INFINITY;
  for (const auto& r : rows) {
    ok += r.theorem1.pass;
    worst = std::min(worst, r.theorem1.worst_margin);
  }
  return {ok == rows.size(), fmt("%zu/%zu families (T=10, m in {0,2,4}, n in {5,50}, 100 per cell), worst margin %.3g",
                                 ok, rows.size(), worst)};
}

Outcome criterion3() {
  const auto& rows = theorem1_rows();
  std::size_t ok = 0;
  double worst = INFINITY;
  for (const auto& r : rows) {
    ok += r.claim1.pass;
    worst = std::min(worst, r.claim1.worst_margin);
  }
  return {ok == rows.size(), fmt("%zu/%zu families hold at every iterate, worst margin %.3g", ok, rows.size(), worst)};
}

// ---- 4 ----

Outcome criterion4() {
  const auto rows = lab::sweep_theorem2(lab::NonConvexConfig{});
  std::size_t ok = 0;
  double worst = INFINITY;
  for (const auto& r : rows) {
    ok += r.theorem2.pass;
    worst = std::min(worst, r.theorem2.worst_margin);
  }
  return {ok == rows.size(), fmt("%zu/%zu perturbed families, worst margin %.3g", ok, rows.size(), worst)};
}

// ---- 5 ----

Outcome criterion5() {
  const ModelSpec spec = ModelSpec::parse("mlp:784-64-10:relu");
  std::vector<double> tg, dlg;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Scenario s = make_scenario(spec, seed, 4);
    const AttackConfig cfg = attack_config(seed, 4);
    tg.push_back(score(tgias_ro(s.log, spec, cfg), s));
    dlg.push_back(score(dlg_attack(s.log.front(), spec, cfg), s));
    info(fmt("seed %llu: TGIAs-RO %.2f dB, DLG %.2f dB", static_cast<unsigned long long>(seed), tg.back(), dlg.back()));
  }
  {
    const ModelSpec sig = ModelSpec::parse("mlp:784-64-10:sigmoid");
    const Scenario s = make_scenario(sig, 0, 4);
    const AttackConfig cfg = attack_config(0, 4);
    info(fmt("info, sigmoid MLP seed 0: TGIAs-RO %.2f dB, DLG %.2f dB", score(tgias_ro(s.log, sig, cfg), s),
             score(dlg_attack(s.log.front(), sig, cfg), s)));
  }
  const double gain = mean(tg) - mean(dlg);
  return {gain >= 3.0, fmt("relu MLP-784-64-10, %s, b=4: TGIAs-RO %.2f dB vs DLG %.2f dB, gain %+.2f dB (need >= 3)",
                           using_mnist() ? "MNIST" : "synthetic digits", mean(tg), mean(dlg), gain)};
}

// ---- 6 ----

Outcome criterion6() {
  const ModelSpec spec = ModelSpec::parse("mlp:784-64-10:sigmoid");
  const Dataset& pool = image_pool();
  bool pass = true;
  std::string detail;
  for (std::size_t b : {8u, 32u}) {
    double acc = 0.0;
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
      std::mt19937_64 rng(derive_seed(trial, {0x1ab, b}));
      std::vector<std::size_t> idx(b);
      for (auto& i : idx) i = rng() % pool.size();
      const ParamSet w = init_params(spec, derive_seed(trial, {0x1ac, b}));
      const Labels y = pool.batch_labels(idx);
      const GradObservation obs(0, 0, std::make_shared<const std::vector<double>>(w.flatten()),
                                grad_params(spec, w, pool.batch_images(idx), y), 0);
      const auto rec = recover_labels(fc_slice(spec, obs), b, b == 8 ? 200 : 300, trial);
      acc += multiset_accuracy(rec.labels.classes(), y.classes()) / 50.0;
    }
    pass = pass && acc >= 0.95;
    detail += fmt("%sb=%zu %.2f%%", detail.empty() ? "" : ", ", b, 100.0 * acc);
  }
  return {pass, "multiset accuracy over 50 trials: " + detail + " (need >= 95%)"};
}

// ---- 7 ----

Outcome criterion7() {
  const ModelSpec spec = ModelSpec::parse("mlp:784-64-10:sigmoid");
  const Dataset& pool = image_pool();
  // Client k holds five images of class 3k and three of class 3k+1, so any
  // split into two batches of four gives two different label multisets.
  std::vector<Dataset> clients;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<std::size_t> idx;
    std::size_t want_a = 5, want_b = 3;
    for (std::size_t i = 0; i < pool.size() && (want_a || want_b); ++i) {
      if (pool.labels[i] == 3 * k && want_a) {
        idx.push_back(i);
        --want_a;
      } else if (pool.labels[i] == 3 * k + 1 && want_b) {
        idx.push_back(i);
        --want_b;
      }
    }
    clients.push_back(pool.subset(idx));
  }
  FederationConfig fed;
  fed.num_clients = 3;
  fed.rounds = 10;
  fed.batch_size = 4;
  fed.lr = 0.1;
  fed.seed = 7;
  const auto sim = run_fedsgd(fed, spec, clients);
  AlignmentConfig cfg;
  cfg.batch_size = 4;
  cfg.label_steps = 200;
  const auto clusters = align_gradients(sim.log, spec, cfg);
  const double acc = evaluation::alignment_accuracy(clusters, sim.log);
  return {acc == 1.0, fmt("%zu observations (3 clients x 2 batches x 5 recurrences) into %zu clusters, accuracy %.1f%%",
                          sim.log.size(), clusters.size(), 100.0 * acc)};
}

// ---- 8 ----

Outcome criterion8() {
  const ModelSpec spec = ModelSpec::parse("mlp:784-64-10:relu");
  constexpr double kNoise = 10.0;
  const char* const names[] = {"mean", "median", "trimmed_mean", "krum"};
  std::vector<std::vector<double>> psnr(4);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Scenario s = make_scenario(spec, seed, 4);
    std::mt19937_64 rng(derive_seed(seed, {0x9015e}));
    std::normal_distribution<double> noise(0.0, kNoise);
    std::vector<GradObservation> obs;
    for (std::size_t t = 0; t < s.log.size(); ++t) {
      auto g = s.log[t].gradient();
      if (t == 3 || t == 6 || t == 9)
        for (double& v : g) v = noise(rng);
      obs.emplace_back(s.log[t].round(), 0, std::make_shared<const std::vector<double>>(s.log[t].weights()),
                       std::move(g), 0);
    }
    std::string line = fmt("seed %llu:", static_cast<unsigned long long>(seed));
    for (std::size_t a = 0; a < 4; ++a) {
      AttackConfig cfg = attack_config(seed, 4);
      cfg.aggregator = AggregatorKind::parse(names[a]);
      psnr[a].push_back(score(tgias_ro(obs, spec, cfg), s));
      line += fmt(" %s %.2f", names[a], psnr[a].back());
    }
    info(line + " dB");
  }
  bool pass = true;
  std::string detail = fmt("Mean %.2f dB;", mean(psnr[0]));
  for (std::size_t a = 1; a < 4; ++a) {
    const double gain = mean(psnr[a]) - mean(psnr[0]);
    pass = pass && gain >= 2.0;
    detail += fmt(" %s %+.2f dB%s", names[a], gain, gain >= 2.0 ? "" : " (short)");
  }
  return {pass, "3/10 observations replaced by N(0, 100) noise: " + detail + " (each need >= +2)"};
}

// ---- 9 ----

Outcome criterion9() {
  const ModelSpec spec = ModelSpec::parse("mlp:784-64-10:relu");
  constexpr std::size_t kSeeds = 3;
  const auto run = [&](double sigma, double p) {
    std::vector<double> v;
    for (std::uint64_t seed = 0; seed < kSeeds; ++seed) {
      const Scenario s = make_scenario(spec, seed, 4, sigma, p);
      v.push_back(score(tgias_ro(s.log, spec, attack_config(seed, 4)), s));
    }
    return mean(v);
  };
  const double base = run(0.0, 0.0);
  const std::vector<double> dp{base, run(1e-4, 0.0), run(1e-2, 0.0)};
  const std::vector<double> sp{base, run(0.0, 0.2), run(0.0, 0.4)};
  bool pass = true;
  for (const auto* series : {&dp, &sp})
    for (std::size_t i = 0; i + 1 < series->size(); ++i) pass = pass && (*series)[i + 1] <= (*series)[i] + 1.0;
  return {pass, fmt("dp_sigma 0/1e-4/1e-2: %.2f/%.2f/%.2f dB; sparsify 0/0.2/0.4: %.2f/%.2f/%.2f dB (1 dB slack)",
                    dp[0], dp[1], dp[2], sp[0], sp[1], sp[2])};
}

// ---- 10 ----

Outcome criterion10() {
  const ModelSpec spec = ModelSpec::parse("mlp:784-64-10:sigmoid");
  const Dataset& pool = image_pool();
  const auto w = std::make_shared<const std::vector<double>>(zero_params(spec).flatten());
  // Two disjoint batches with the same labels.
  std::vector<std::size_t> a, b;
  for (std::size_t cls : {1u, 4u, 4u, 7u}) {
    for (auto* batch : {&a, &b}) {
      for (std::size_t i = 0; i < pool.size(); ++i) {
        if (pool.labels[i] == cls && std::find(a.begin(), a.end(), i) == a.end() &&
            std::find(b.begin(), b.end(), i) == b.end()) {
          batch->push_back(i);
          break;
        }
      }
    }
  }
  const ParamSet zero = zero_params(spec);
  const auto observe = [&](const std::vector<std::size_t>& idx) {
    std::vector<GradObservation> obs;
    for (std::uint32_t t = 0; t < 10; ++t)
      obs.emplace_back(t, 0, w, grad_params(spec, zero, pool.batch_images(idx), pool.batch_labels(idx)), 0);
    return obs;
  };
  AttackConfig cfg = attack_config(3, 4);
  cfg.R_g = 5;
  cfg.R_l = 5;
  const auto ra = tgias_ro(observe(a), spec, cfg);
  const auto rb = tgias_ro(observe(b), spec, cfg);
  const bool images_differ = !(pool.batch_images(a) == pool.batch_images(b));
  return {images_differ && ra.x == rb.x && ra.labels == rb.labels,
          fmt("zero weights, distinct batches: reconstructions %s", ra.x == rb.x ? "bit-identical" : "differ")};
}

// ---- 11 ----

Outcome criterion11() {
  const ModelSpec spec = ModelSpec::parse("mlp:784-64-10:relu");
  const Scenario s = make_scenario(spec, 11, 4, 0.0, 0.0, 1);
  const std::vector<GradObservation> copies(10, s.log.front());
  std::size_t ok = 0, total = 0;
  for (const char* agg : {"mean", "median", "trimmed_mean", "krum"}) {
    for (const auto& opt : {OptimizerConfig::lbfgs(), OptimizerConfig::gd(0.5)}) {
      AttackConfig cfg = attack_config(11, 4);
      cfg.R_g = 10;
      cfg.R_l = 10;
      cfg.aggregator = AggregatorKind::parse(agg);
      cfg.optimizer = opt;
      const auto multi = tgias_ro(copies, spec, cfg);
      const auto single = dlg_attack(s.log.front(), spec, cfg);
      ok += multi.x == single.x && multi.loss_trace == single.loss_trace;
      ++total;
    }
  }
  return {ok == total, fmt("%zu/%zu (aggregator, optimizer) pairs bit-exact with DLG over 100 steps", ok, total)};
}

// ---- 12 ----

struct ScratchDir {
  fs::path path = fs::temp_directory_path() / fmt("gradleak-acceptance-%llu",
                                                  static_cast<unsigned long long>(std::random_device{}()));
  ScratchDir() { fs::create_directories(path); }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spill(const fs::path& p, const std::string& bytes) { std::ofstream(p, std::ios::binary) << bytes; }

bool rejects(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind() == ErrorKind::kData;
  }
  return false;
}

Outcome criterion12() {
  ScratchDir dir;
  std::vector<std::string> failed;
  const auto check = [&](bool ok, const char* what) {
    if (!ok) failed.push_back(what);
  };

  const ModelSpec spec = ModelSpec::parse("mlp:1x6x6-5-3:sigmoid");
  FederationConfig fed;
  fed.num_clients = 2;
  fed.rounds = 4;
  fed.batch_size = 2;
  const auto sim = run_fedsgd(fed, spec, split_clients(synth_dataset(12, {1, 6, 6}, 3, 1), 2));
  const fs::path log = dir.path / "a.tglog";
  write_log(log, spec.descriptor(), sim.log);
  const GradientLog back = read_log(log);
  bool same = back.observations.size() == sim.log.size() && back.descriptor == spec.descriptor();
  for (std::size_t i = 0; same && i < sim.log.size(); ++i) {
    const auto& o = sim.log[i];
    const auto& r = back.observations[i];
    same = o.round() == r.round() && o.client() == r.client() &&
           evaluation::batch_tag(o) == evaluation::batch_tag(r);
    for (std::size_t j = 0; same && j < o.dim(); ++j)
      same = r.gradient()[j] == static_cast<double>(static_cast<float>(o.gradient()[j])) &&
             r.weights()[j] == static_cast<double>(static_cast<float>(o.weights()[j]));
  }
  check(same, "TGLOG1 round trip");
  write_log(dir.path / "b.tglog", back.descriptor, back.observations);
  check(slurp(log) == slurp(dir.path / "b.tglog"), "TGLOG1 rewrite byte-identical");
  const std::string bytes = slurp(log);
  spill(dir.path / "trunc", bytes.substr(0, bytes.size() - 5));
  check(rejects([&] { read_log(dir.path / "trunc"); }), "TGLOG1 truncation");
  spill(dir.path / "magic", "XGLOG1" + bytes.substr(6));
  check(rejects([&] { read_log(dir.path / "magic"); }), "TGLOG1 bad magic");
  spill(dir.path / "trail", bytes + "x");
  check(rejects([&] { read_log(dir.path / "trail"); }), "TGLOG1 trailing bytes");

  Tensor gray({1, 5, 7});
  Tensor color({3, 4, 6});
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : gray.data()) v = u(rng);
  for (double& v : color.data()) v = u(rng);
  for (const auto& [name, img] : {std::pair{"g.pgm", gray}, std::pair{"c.ppm", color}}) {
    write_image(dir.path / name, img);
    const Tensor r = read_image(dir.path / name);
    bool ok = r.shape() == img.shape();
    for (std::size_t i = 0; ok && i < img.size(); ++i) ok = std::abs(r[i] - img[i]) <= 1.0 / 510 + 1e-12;
    check(ok, name);
  }
  const std::string pgm = slurp(dir.path / "g.pgm");
  spill(dir.path / "short.pgm", pgm.substr(0, pgm.size() - 3));
  check(rejects([&] { read_image(dir.path / "short.pgm"); }), "PGM truncation");
  spill(dir.path / "p2.pgm", "P2\n1 1\n255\n0\n");
  check(rejects([&] { read_image(dir.path / "p2.pgm"); }), "PGM wrong magic");
  spill(dir.path / "deep.pgm", "P5\n1 1\n65535\n\x01\x02");
  check(rejects([&] { read_image(dir.path / "deep.pgm"); }), "PGM 16-bit");

  MetricsRow row{"run, \"1\"", "tgias", "synth", "mlp:784-64-10:relu", 4, 10, "median", 1e-4, 0.2, 3,
                 0.0125, INFINITY, 0.875, 12.5};
  append_metrics_csv(dir.path / "m.csv", {row});
  row.psnr_db = 21.5;
  append_metrics_csv(dir.path / "m.csv", {row});
  const auto rows = read_metrics_csv(dir.path / "m.csv");
  check(rows.size() == 2 && rows[0].run_id == "run, \"1\"" && rows[0].psnr_db == kPsnrCapDb &&
            rows[1].psnr_db == 21.5 && rows[1].dp_sigma == 1e-4 && rows[1].T == 10,
        "CSV round trip");
  spill(dir.path / "bad.csv", metrics_csv_header() + "\n1,2,3\n");
  check(rejects([&] { read_metrics_csv(dir.path / "bad.csv"); }), "CSV short row");

  std::string detail = failed.empty() ? "TGLOG1, PGM/PPM and CSV round trips and rejections" : "failed:";
  for (const auto& f : failed) detail += " [" + f + "]";
  return {failed.empty(), detail};
}

struct Criterion {
  int id;
  const char* title;
  Outcome (*run)();
};

const Criterion kCriteria[] = {
    {1, "gradient correctness", criterion1},
    {2, "convergence bound, convex", criterion2},
    {3, "median deviation bound", criterion3},
    {4, "convergence bound, non-convex", criterion4},
    {5, "attack superiority", criterion5},
    {6, "label recovery", criterion6},
    {7, "gradient alignment", criterion7},
    {8, "robust vs mean aggregation", criterion8},
    {9, "defense monotonicity", criterion9},
    {10, "degeneracy", criterion10},
    {11, "identical-observation reduction", criterion11},
    {12, "format round trips", criterion12},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : kCriteria) {
    if (!wanted.empty() && !wanted.count(c.id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %2d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.title, o.detail.c_str(), secs);
    std::fflush(stdout);
    failures += !o.pass;
  }
  return failures == 0 ? 0 : 1;
}
