#include <fstream>
#include <iterator>

#include "doctest.h"
#include "gradleak/cli/commands.hpp"
#include "gradleak/io/gradlog.hpp"
#include "gradleak/io/image.hpp"
#include "unit/temp_dir.hpp"

using namespace gradleak;
using namespace gradleak::cli;

namespace {

const char* kMinimal = R"([federation]
num_clients = 1
rounds = 3
batch_size = 2
seed = 1

[model]
spec = mlp:1x8x8-16-10:sigmoid

[attack]
method = dlg
R_g = 3
R_l = 4
T = 3

[data]
source = synth
samples = 20
)";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ErrorKind kind_of(const std::string& text) {
  try {
    parse_config(text, "/base");
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("config parsed");
  return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("config sections map onto the experiment") {
  const auto c = parse_config(R"(
# leading comment
[federation]
num_clients = 4
client_fraction = 0.5
rounds = 10
batch_size = 3
lr = 0.05
client_weights = 1, 2, 0.5, 0.5
dp_sigma = 0.01
sparsify_p = 0.2
defense_order = noise_then_sparsify
seed = 7
[model]
spec = cnn:1x8x8:c4k3:10
[attack]
method = cosine
T = 5
R_g = 40
R_l = 10
optimizer = gd
lr = 0.25
aggregator = trimmed_mean(0.3)
loss = cosine
layer_weighting = uniform
tv_weight = 0.001
alpha = 0.2, 0.2, 0.2, 0.2, 0.2
label_steps = 30
seed = 9
workers = 2
cos_threshold = 0.8
[data]
source = mnist
images = data/train-images.idx3-ubyte
labels = /abs/labels
samples = 100
seed = 3
[output]
dir = out
log = logs/run.tglog
csv = ../metrics.csv
)",
                              "/cfg/dir");
  CHECK(c.federation.num_clients == 4);
  CHECK(c.federation.client_fraction == 0.5);
  CHECK(c.federation.client_weights == std::vector<double>{1, 2, 0.5, 0.5});
  CHECK(c.federation.defense_order == DefenseOrder::kNoiseThenSparsify);
  CHECK(c.federation.seed == 7);
  CHECK(c.model == "cnn:1x8x8:c4k3:10");
  CHECK(c.method == AttackMethod::kCosine);
  CHECK(c.attack.T == 5);
  CHECK(c.attack.optimizer.kind == OptimizerKind::kGD);
  CHECK(c.attack.optimizer.lr == 0.25);
  CHECK(c.attack.aggregator == AggregatorKind::trimmed_mean(0.3));
  CHECK(c.attack.loss == LossKind::kCosine);
  CHECK(c.attack.layer_weighting == LayerWeighting::kUniform);
  CHECK(c.attack.alpha.size() == 5);
  CHECK(c.attack.batch_size == 3);
  CHECK(c.attack.workers == 2);
  CHECK(c.cos_threshold == 0.8);
  CHECK(c.data.source == DataSource::kMnist);
  CHECK(c.data.images == std::filesystem::path("/cfg/dir/data/train-images.idx3-ubyte"));
  CHECK(c.data.labels == std::filesystem::path("/abs/labels"));
  CHECK(c.output.dir == std::filesystem::path("/cfg/dir/out"));
  CHECK(c.output.csv == std::filesystem::path("/cfg/dir/../metrics.csv"));
}

TEST_CASE("config defaults") {
  const auto c = parse_config("[federation]\nbatch_size = 4\n", "/x");
  CHECK(c.attack.batch_size == 4);
  CHECK(c.method == AttackMethod::kTgias);
  CHECK(c.data.source == DataSource::kAuto);
  CHECK(parse_config("[federation]\nbatch_size = 4\n[attack]\nbatch_size = 2\n", "/x").attack.batch_size == 2);
  CHECK(parse_config("", "/x").federation.rounds == 1);
  CHECK(parse_config("; comment\n[federation]\nrounds = 3 ; trailing\n", "/x").federation.rounds == 3);
}

TEST_CASE("config rejections") {
  CHECK(kind_of("[federation]\nround = 3\n") == ErrorKind::kConfig);
  CHECK(kind_of("[fed]\nrounds = 3\n") == ErrorKind::kConfig);
  CHECK(kind_of("rounds = 3\n") == ErrorKind::kConfig);
  CHECK(kind_of("[federation]\nrounds = 3\nrounds = 4\n") == ErrorKind::kConfig);
  CHECK(kind_of("[federation]\nrounds = three\n") == ErrorKind::kConfig);
  CHECK(kind_of("[federation]\nrounds = 3 extra\n") == ErrorKind::kConfig);
  CHECK(kind_of("[federation]\ndp_sigma = -1\n") == ErrorKind::kConfig);
  CHECK(kind_of("[attack]\nmethod = magic\n") == ErrorKind::kConfig);
  CHECK(kind_of("[attack]\naggregator = mode\n") == ErrorKind::kConfig);
  CHECK(kind_of("[model]\nspec = rnn:3\n") == ErrorKind::kConfig);
  CHECK(kind_of("[federation]\nseed\n") == ErrorKind::kConfig);
  CHECK_THROWS_AS(load_config("/nonexistent/config.ini"), Error);
}

TEST_CASE("exit codes") {
  CHECK(exit_code(ErrorKind::kConfig) == kExitUsage);
  CHECK(exit_code(ErrorKind::kInvalidArgument) == kExitUsage);
  CHECK(exit_code(ErrorKind::kData) == kExitData);
  CHECK(exit_code(ErrorKind::kIo) == kExitData);
}

TEST_CASE("simulate writes a reproducible log") {
  testing::TempDir dir;
  std::ofstream(dir / "exp.ini") << kMinimal << "[output]\nlog = run/a.tglog\n";
  const auto config = load_config(dir / "exp.ini");
  CHECK(config.output.log == dir.path() / "run/a.tglog");
  CHECK(cmd_simulate(config, config.output.log).records == 3);
  CHECK(read_log(config.output.log).observations.size() == 3);
  cmd_simulate(config, dir / "b.tglog");
  CHECK(slurp(config.output.log) == slurp(dir / "b.tglog"));

  auto sampled = config;
  sampled.federation.num_clients = 4;
  sampled.federation.client_fraction = 0.5;
  sampled.federation.rounds = 10;
  sampled.data.samples = 40;
  CHECK(cmd_simulate(sampled, dir / "c.tglog").records == 20);
}

TEST_CASE("attack command") {
  testing::TempDir dir;
  std::ofstream(dir / "exp.ini") << kMinimal;
  const auto config = load_config(dir / "exp.ini");
  auto one_round = config;
  one_round.federation.rounds = 1;
  cmd_simulate(one_round, dir / "one.tglog");

  AttackRequest req;
  req.log = dir / "one.tglog";
  req.out_dir = dir / "out";
  const auto o = cmd_attack(one_round, req);
  CHECK(o.row.method == "dlg");
  CHECK(o.row.T == 1);
  CHECK(o.cluster == std::vector<std::size_t>{0});
  CHECK(std::filesystem::exists(dir / "out/recon/img_1.pgm"));
  CHECK(std::filesystem::exists(dir / "out/truth/img_0.pgm"));
  CHECK(read_image(dir / "out/pairs/img_0.pgm").dim(2) == 16);
  const auto rows = read_metrics_csv(dir / "out/metrics.csv");
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].dataset == "synth");

  req.method = AttackMethod::kTgias;
  try {
    cmd_attack(one_round, req);
    FAIL("tgias with T > cluster size ran");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kData);
    CHECK(std::string(e.what()).find("cluster sizes: [1]") != std::string::npos);
  }
}

TEST_CASE("attack command in evaluation mode picks the tagged batch") {
  testing::TempDir dir;
  std::ofstream(dir / "exp.ini") << kMinimal;
  auto config = load_config(dir / "exp.ini");
  config.federation.batch_size = 5;
  config.attack.batch_size = 5;
  config.data.samples = 10;  // two batches, tags cycle 0, 1, 0
  cmd_simulate(config, dir / "log");
  AttackRequest req;
  req.log = dir / "log";
  req.out_dir = dir / "out";
  req.batch_tag = 0;
  config.attack.T = 2;
  req.method = AttackMethod::kTgias;
  const auto o = cmd_attack(config, req);
  CHECK(o.cluster == std::vector<std::size_t>{0, 2});
  CHECK(o.row.T == 2);
}

TEST_CASE("lab command") {
  testing::TempDir dir;
  const auto s = cmd_lab("quick", dir.path(), 0);
  CHECK(s.all_pass());
  CHECK(s.theorem1_total == 60);
  CHECK(std::filesystem::exists(dir / "trace_m4_n50.csv"));
  CHECK(std::filesystem::exists(dir / "theorem2.csv"));
  CHECK_THROWS_AS(cmd_lab("huge", dir.path(), 0), Error);
}

TEST_CASE("eval command") {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "truth");
  std::filesystem::create_directories(dir / "same");
  std::filesystem::create_directories(dir / "swapped");
  const Tensor a = Tensor::from_data({1, 8, 8}, std::vector<double>(64, 0.2));
  Tensor b = a;
  for (std::size_t i = 0; i < 64; i += 3) b[i] = 0.9;
  const Tensor c = Tensor({1, 8, 8}, 0.6);
  write_image(dir / "truth/img_0.pgm", a);
  write_image(dir / "truth/img_1.pgm", b);
  write_image(dir / "truth/solo.pgm", c);
  write_image(dir / "same/img_0.pgm", a);
  write_image(dir / "same/img_1.pgm", b);
  write_image(dir / "same/solo.pgm", c);
  write_image(dir / "swapped/img_0.pgm", b);
  write_image(dir / "swapped/img_1.pgm", a);
  write_image(dir / "swapped/solo.pgm", c);

  const auto same = cmd_eval(dir / "same", dir / "truth", dir / "same.csv");
  REQUIRE(same.size() == 3);
  for (const auto& r : same) CHECK(r.mse == 0.0);
  const auto swapped = cmd_eval(dir / "swapped", dir / "truth", dir / "swapped.csv");
  REQUIRE(swapped.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(swapped[i].mse == same[i].mse);
    CHECK(swapped[i].ssim == same[i].ssim);
  }
  CHECK(swapped[0].recon == "img_1.pgm");

  std::filesystem::remove(dir / "same/solo.pgm");
  try {
    cmd_eval(dir / "same", dir / "truth", dir / "x.csv");
    FAIL("missing file accepted");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kData);
    CHECK(std::string(e.what()).find("solo.pgm") != std::string::npos);
  }
}
