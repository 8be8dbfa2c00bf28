#include "gradleak/cli/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "gradleak/error.hpp"

namespace gradleak::cli {

namespace {

struct Entry {
  std::string key;  // section.name
  std::vector<std::string> values;
};

std::string one(const Entry& e) {
  require(e.values.size() == 1, ErrorKind::kConfig,
          e.key + " expects one value, got " + std::to_string(e.values.size()));
  return e.values.front();
}

template <typename T>
T number(const Entry& e, const std::string& text) {
  T v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  require(ec == std::errc() && ptr == text.data() + text.size(), ErrorKind::kConfig,
          e.key + ": cannot parse '" + text + "' as a number");
  return v;
}

std::size_t count(const Entry& e) { return number<std::size_t>(e, one(e)); }
std::uint64_t u64(const Entry& e) { return number<std::uint64_t>(e, one(e)); }
double real(const Entry& e) { return number<double>(e, one(e)); }

std::vector<double> reals(const Entry& e) {
  std::vector<double> out;
  for (const auto& v : e.values) out.push_back(number<double>(e, v));
  return out;
}

template <typename T>
T choose(const Entry& e, const std::map<std::string, T>& options) {
  const std::string v = one(e);
  const auto it = options.find(v);
  if (it != options.end()) return it->second;
  std::string allowed;
  for (const auto& [name, value] : options) allowed += (allowed.empty() ? "" : ", ") + name;
  fail(ErrorKind::kConfig, e.key + ": '" + v + "' is not one of " + allowed);
}

using Setter = std::function<void(ExperimentConfig&, const Entry&, const std::filesystem::path&)>;

std::filesystem::path resolve(const Entry& e, const std::filesystem::path& base) {
  const std::filesystem::path p(one(e));
  return p.is_absolute() ? p : base / p;
}

const std::map<std::string, Setter>& setters() {
  using C = ExperimentConfig;
  using P = std::filesystem::path;
  static const std::map<std::string, Setter> table{
      {"federation.num_clients", [](C& c, const Entry& e, const P&) { c.federation.num_clients = count(e); }},
      {"federation.client_fraction", [](C& c, const Entry& e, const P&) { c.federation.client_fraction = real(e); }},
      {"federation.rounds", [](C& c, const Entry& e, const P&) { c.federation.rounds = count(e); }},
      {"federation.batch_size", [](C& c, const Entry& e, const P&) { c.federation.batch_size = count(e); }},
      {"federation.lr", [](C& c, const Entry& e, const P&) { c.federation.lr = real(e); }},
      {"federation.client_weights", [](C& c, const Entry& e, const P&) { c.federation.client_weights = reals(e); }},
      {"federation.dp_sigma", [](C& c, const Entry& e, const P&) { c.federation.dp_sigma = real(e); }},
      {"federation.sparsify_p", [](C& c, const Entry& e, const P&) { c.federation.sparsify_p = real(e); }},
      {"federation.defense_order",
       [](C& c, const Entry& e, const P&) {
         c.federation.defense_order = choose<DefenseOrder>(
             e, {{"sparsify_then_noise", DefenseOrder::kSparsifyThenNoise},
                 {"noise_then_sparsify", DefenseOrder::kNoiseThenSparsify}});
       }},
      {"federation.seed", [](C& c, const Entry& e, const P&) { c.federation.seed = u64(e); }},
      {"model.spec", [](C& c, const Entry& e, const P&) { c.model = one(e); }},
      {"attack.method", [](C& c, const Entry& e, const P&) { c.method = parse_method(one(e)); }},
      {"attack.T", [](C& c, const Entry& e, const P&) { c.attack.T = count(e); }},
      {"attack.R_g", [](C& c, const Entry& e, const P&) { c.attack.R_g = count(e); }},
      {"attack.R_l", [](C& c, const Entry& e, const P&) { c.attack.R_l = count(e); }},
      {"attack.batch_size", [](C& c, const Entry& e, const P&) { c.attack.batch_size = count(e); }},
      {"attack.optimizer",
       [](C& c, const Entry& e, const P&) {
         c.attack.optimizer.kind =
             choose<OptimizerKind>(e, {{"lbfgs", OptimizerKind::kLBFGS}, {"gd", OptimizerKind::kGD}});
       }},
      {"attack.lr", [](C& c, const Entry& e, const P&) { c.attack.optimizer.lr = real(e); }},
      {"attack.aggregator",
       [](C& c, const Entry& e, const P&) {
         try {
           c.attack.aggregator = AggregatorKind::parse(one(e));
         } catch (const Error& err) {
           fail(ErrorKind::kConfig, e.key + ": " + err.what());
         }
       }},
      {"attack.loss",
       [](C& c, const Entry& e, const P&) {
         c.attack.loss = choose<LossKind>(e, {{"l2", LossKind::kL2}, {"cosine", LossKind::kCosine}});
       }},
      {"attack.layer_weighting",
       [](C& c, const Entry& e, const P&) {
         c.attack.layer_weighting = choose<LayerWeighting>(
             e, {{"uniform", LayerWeighting::kUniform}, {"linear_increase", LayerWeighting::kLinearIncrease}});
       }},
      {"attack.tv_weight", [](C& c, const Entry& e, const P&) { c.attack.tv_weight = real(e); }},
      {"attack.alpha", [](C& c, const Entry& e, const P&) { c.attack.alpha = reals(e); }},
      {"attack.label_steps", [](C& c, const Entry& e, const P&) { c.attack.label_steps = count(e); }},
      {"attack.label_restarts", [](C& c, const Entry& e, const P&) { c.attack.label_restarts = count(e); }},
      {"attack.seed", [](C& c, const Entry& e, const P&) { c.attack.seed = u64(e); }},
      {"attack.workers", [](C& c, const Entry& e, const P&) { c.attack.workers = count(e); }},
      {"attack.cos_threshold", [](C& c, const Entry& e, const P&) { c.cos_threshold = real(e); }},
      {"data.source",
       [](C& c, const Entry& e, const P&) {
         c.data.source = choose<DataSource>(
             e, {{"auto", DataSource::kAuto}, {"mnist", DataSource::kMnist}, {"synth", DataSource::kSynth}});
       }},
      {"data.images", [](C& c, const Entry& e, const P& base) { c.data.images = resolve(e, base); }},
      {"data.labels", [](C& c, const Entry& e, const P& base) { c.data.labels = resolve(e, base); }},
      {"data.samples", [](C& c, const Entry& e, const P&) { c.data.samples = count(e); }},
      {"data.seed", [](C& c, const Entry& e, const P&) { c.data.seed = u64(e); }},
      {"output.dir", [](C& c, const Entry& e, const P& base) { c.output.dir = resolve(e, base); }},
      {"output.log", [](C& c, const Entry& e, const P& base) { c.output.log = resolve(e, base); }},
      {"output.csv", [](C& c, const Entry& e, const P& base) { c.output.csv = resolve(e, base); }},
  };
  return table;
}

std::vector<Entry> tokenize(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_config(in);
  } catch (const std::exception& e) {
    fail(ErrorKind::kConfig, std::string("malformed config: ") + e.what());
  }
  static const std::set<std::string> sections{"federation", "model", "attack", "data", "output"};
  std::vector<Entry> out;
  for (const auto& item : items) {
    if (item.name == "++" || item.name == "--") {
      require(item.parents.size() == 1 && sections.count(item.parents.front()), ErrorKind::kConfig,
              "unknown section [" + CLI::detail::join(item.parents, ".") + "]");
      continue;
    }
    require(!item.parents.empty(), ErrorKind::kConfig, "key '" + item.name + "' appears before any section");
    out.push_back({item.fullname(), item.inputs});
  }
  return out;
}

}  // namespace

AttackMethod parse_method(std::string_view text) {
  if (text == "dlg") return AttackMethod::kDlg;
  if (text == "cosine") return AttackMethod::kCosine;
  if (text == "tgias") return AttackMethod::kTgias;
  fail(ErrorKind::kConfig, "unknown attack method '" + std::string(text) + "' (dlg, cosine, tgias)");
}

std::string_view to_string(AttackMethod method) {
  switch (method) {
    case AttackMethod::kDlg: return "dlg";
    case AttackMethod::kCosine: return "cosine";
    case AttackMethod::kTgias: return "tgias";
  }
  return "?";
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  ExperimentConfig config;
  config.base_dir = base_dir;
  std::set<std::string> seen;
  std::optional<std::size_t> attack_batch;
  for (const auto& entry : tokenize(text)) {
    const auto it = setters().find(entry.key);
    require(it != setters().end(), ErrorKind::kConfig, "unknown key '" + entry.key + "'");
    require(seen.insert(entry.key).second, ErrorKind::kConfig, "duplicate key '" + entry.key + "'");
    it->second(config, entry, base_dir);
    if (entry.key == "attack.batch_size") attack_batch = config.attack.batch_size;
  }
  if (!attack_batch) config.attack.batch_size = config.federation.batch_size;
  try {
    config.federation.validate();
    config.attack.validate();
    ModelSpec::parse(config.model);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kConfig) throw;
    fail(ErrorKind::kConfig, e.what());
  }
  require(config.cos_threshold >= -1.0 && config.cos_threshold <= 1.0, ErrorKind::kConfig,
          "attack.cos_threshold must be in [-1, 1]");
  return config;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorKind::kIo, "cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), std::filesystem::absolute(path).parent_path());
}

}  // namespace gradleak::cli
