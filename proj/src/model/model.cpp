#include "gradleak/model/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <sstream>

#include "gradleak/error.hpp"

namespace gradleak {
namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    parts.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::size_t parse_count(std::string_view token, std::string_view what) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  require(ec == std::errc() && ptr == token.data() + token.size() && value > 0, ErrorKind::kConfig,
          "bad " + std::string(what) + " '" + std::string(token) + "' in model descriptor");
  return value;
}

// "784" -> (1, 28, 28); "100" -> (1, 10, 10); "30" -> (1, 1, 30); "3x8x8" -> (3, 8, 8).
Shape parse_input_shape(std::string_view token) {
  if (token.find('x') != std::string_view::npos) {
    const auto dims = split(token, 'x');
    require(dims.size() == 3, ErrorKind::kConfig, "input shape must be CxHxW, got '" + std::string(token) + "'");
    return {parse_count(dims[0], "channels"), parse_count(dims[1], "height"), parse_count(dims[2], "width")};
  }
  return {};
}

Shape default_image_shape(std::size_t n) {
  const auto side = static_cast<std::size_t>(std::llround(std::sqrt(static_cast<double>(n))));
  if (side * side == n) return {1, side, side};
  return {1, 1, n};
}

std::string shape_token(const Shape& s) {
  return std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]);
}

}  // namespace

std::string LayerDesc::describe() const {
  switch (kind) {
    case LayerKind::kDense: return "dense " + std::to_string(in) + "->" + std::to_string(out);
    case LayerKind::kConv2d:
      return "conv2d " + std::to_string(in) + "->" + std::to_string(out) + " k" + std::to_string(kernel);
    case LayerKind::kRelu: return "relu";
    case LayerKind::kSigmoid: return "sigmoid";
    case LayerKind::kMaxPool2x2: return "maxpool2x2";
    case LayerKind::kFlatten: return "flatten";
  }
  return "?";
}

ModelSpec::ModelSpec(std::vector<LayerDesc> layers, Shape input_shape, std::size_t num_classes)
    : layers_(std::move(layers)), input_shape_(std::move(input_shape)), num_classes_(num_classes) {
  validate_and_layout();
  // Generic descriptor; the named constructors overwrite it with the compact form.
  std::ostringstream d;
  d << "net:" << shape_token(input_shape_);
  for (const auto& l : layers_) {
    switch (l.kind) {
      case LayerKind::kDense: d << ":d" << l.out; break;
      case LayerKind::kConv2d: d << ":c" << l.out << "k" << l.kernel; break;
      case LayerKind::kRelu: d << ":relu"; break;
      case LayerKind::kSigmoid: d << ":sigmoid"; break;
      case LayerKind::kMaxPool2x2: d << ":pool"; break;
      case LayerKind::kFlatten: d << ":flat"; break;
    }
  }
  descriptor_ = d.str();
}

void ModelSpec::validate_and_layout() {
  require(input_shape_.size() == 3, ErrorKind::kShape, "input shape must be (C, H, W)");
  require(num_classes_ >= 1, ErrorKind::kShape, "need at least one class");
  Shape cur = input_shape_;
  bool has_dense = false;
  layout_.clear();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const LayerDesc& l = layers_[i];
    const std::string where = "layer " + std::to_string(i) + " (" + l.describe() + ")";
    switch (l.kind) {
      case LayerKind::kDense:
        require(shape_size(cur) == l.in, ErrorKind::kShape,
                where + ": expects " + std::to_string(l.in) + " inputs, previous layer gives " +
                    std::to_string(shape_size(cur)));
        cur = {l.out};
        has_dense = true;
        layout_.push_back({"l" + std::to_string(i) + ".dense.weight", {l.out, l.in}, i});
        layout_.push_back({"l" + std::to_string(i) + ".dense.bias", {l.out}, i});
        break;
      case LayerKind::kConv2d:
        require(cur.size() == 3 && cur[0] == l.in && cur[1] >= l.kernel && cur[2] >= l.kernel && l.kernel > 0,
                ErrorKind::kShape, where + ": input " + shape_to_string(cur) + " does not fit");
        cur = {l.out, cur[1] - l.kernel + 1, cur[2] - l.kernel + 1};
        layout_.push_back({"l" + std::to_string(i) + ".conv.weight", {l.out, l.in, l.kernel, l.kernel}, i});
        layout_.push_back({"l" + std::to_string(i) + ".conv.bias", {l.out}, i});
        break;
      case LayerKind::kMaxPool2x2:
        require(cur.size() == 3 && cur[1] >= 2 && cur[2] >= 2, ErrorKind::kShape,
                where + ": input " + shape_to_string(cur) + " does not fit");
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        break;
      case LayerKind::kFlatten:
        cur = {shape_size(cur)};
        break;
      case LayerKind::kRelu:
      case LayerKind::kSigmoid:
        break;
    }
  }
  require(has_dense, ErrorKind::kShape, "model needs at least one dense layer");
  require(cur.size() == 1 && cur[0] == num_classes_, ErrorKind::kShape,
          "final output " + shape_to_string(cur) + " does not match " + std::to_string(num_classes_) + " classes");
}

ModelSpec ModelSpec::mlp(std::vector<std::size_t> widths, LayerKind activation, Shape input_shape) {
  require(widths.size() >= 2, ErrorKind::kShape, "mlp needs input and output widths");
  require(activation == LayerKind::kRelu || activation == LayerKind::kSigmoid, ErrorKind::kInvalidArgument,
          "mlp activation must be relu or sigmoid");
  const bool implicit_shape = input_shape.empty();
  if (implicit_shape) input_shape = default_image_shape(widths.front());
  std::vector<LayerDesc> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.push_back(LayerDesc::dense(widths[i], widths[i + 1]));
    if (i + 2 < widths.size()) layers.push_back({activation});
  }
  ModelSpec spec(std::move(layers), input_shape, widths.back());
  std::ostringstream d;
  d << "mlp:" << (implicit_shape ? std::to_string(widths.front()) : shape_token(input_shape));
  for (std::size_t i = 1; i < widths.size(); ++i) d << '-' << widths[i];
  d << ':' << (activation == LayerKind::kRelu ? "relu" : "sigmoid");
  spec.descriptor_ = d.str();
  return spec;
}

ModelSpec ModelSpec::cnn(Shape input_shape, std::size_t channels, std::size_t kernel, std::size_t num_classes) {
  require(input_shape.size() == 3, ErrorKind::kShape, "cnn input shape must be (C, H, W)");
  require(input_shape[1] >= kernel + 1 && input_shape[2] >= kernel + 1, ErrorKind::kShape,
          "cnn input too small for kernel");
  const std::size_t ho = input_shape[1] - kernel + 1, wo = input_shape[2] - kernel + 1;
  std::vector<LayerDesc> layers = {
      LayerDesc::conv2d(input_shape[0], channels, kernel),
      LayerDesc::relu(),
      LayerDesc::maxpool2x2(),
      LayerDesc::flatten(),
      LayerDesc::dense(channels * (ho / 2) * (wo / 2), num_classes),
  };
  ModelSpec spec(std::move(layers), input_shape, num_classes);
  spec.descriptor_ = "cnn:" + shape_token(input_shape) + ":c" + std::to_string(channels) + "k" +
                     std::to_string(kernel) + ":" + std::to_string(num_classes);
  return spec;
}

ModelSpec ModelSpec::parse(std::string_view descriptor) {
  const auto parts = split(descriptor, ':');
  const std::string desc(descriptor);
  if (parts.size() == 3 && parts[0] == "mlp") {
    const auto dims = split(parts[1], '-');
    require(dims.size() >= 2, ErrorKind::kConfig, "mlp descriptor needs at least two widths: " + desc);
    Shape input = parse_input_shape(dims[0]);
    std::vector<std::size_t> widths;
    widths.push_back(input.empty() ? parse_count(dims[0], "width") : shape_size(input));
    for (std::size_t i = 1; i < dims.size(); ++i) widths.push_back(parse_count(dims[i], "width"));
    LayerKind act;
    if (parts[2] == "relu") {
      act = LayerKind::kRelu;
    } else if (parts[2] == "sigmoid") {
      act = LayerKind::kSigmoid;
    } else {
      fail(ErrorKind::kConfig, "unknown activation '" + std::string(parts[2]) + "' in " + desc);
    }
    return mlp(std::move(widths), act, std::move(input));
  }
  if (parts.size() == 4 && parts[0] == "cnn") {
    Shape input = parse_input_shape(parts[1]);
    require(!input.empty(), ErrorKind::kConfig, "cnn descriptor needs CxHxW input: " + desc);
    const std::string_view conv = parts[2];
    const std::size_t kpos = conv.find('k');
    require(conv.size() > 2 && conv[0] == 'c' && kpos != std::string_view::npos, ErrorKind::kConfig,
            "cnn conv token must look like c8k5: " + desc);
    return cnn(std::move(input), parse_count(conv.substr(1, kpos - 1), "channels"),
               parse_count(conv.substr(kpos + 1), "kernel"), parse_count(parts[3], "classes"));
  }
  fail(ErrorKind::kConfig, "unrecognized model descriptor '" + desc + "'");
}

std::size_t ModelSpec::total_params() const {
  std::size_t total = 0;
  for (const auto& p : layout_) total += shape_size(p.shape);
  return total;
}

std::size_t ModelSpec::fc_weight_index() const {
  for (std::size_t i = layout_.size(); i-- > 0;) {
    if (layers_[layout_[i].layer].kind == LayerKind::kDense && layout_[i].shape.size() == 2) return i;
  }
  fail(ErrorKind::kShape, "model has no dense layer");
}

// ---------------------------------------------------------------------------

Labels Labels::hard(std::vector<std::size_t> classes) { return Labels(std::move(classes)); }

Labels Labels::soft(Tensor scores) {
  require(scores.rank() == 2, ErrorKind::kShape, "soft labels must be (b x N)");
  require(scores.all_finite(), ErrorKind::kInvalidArgument, "soft labels contain non-finite scores");
  return Labels(std::move(scores));
}

std::size_t Labels::batch() const { return is_hard() ? classes().size() : scores().dim(0); }

void Labels::validate(std::size_t num_classes) const {
  if (is_hard()) {
    for (std::size_t c : classes()) {
      require(c < num_classes, ErrorKind::kInvalidArgument,
              "label " + std::to_string(c) + " out of range for " + std::to_string(num_classes) + " classes");
    }
  } else {
    require(scores().dim(1) == num_classes, ErrorKind::kShape, "soft label width does not match class count");
  }
}

// ---------------------------------------------------------------------------

ParamSet::ParamSet(std::vector<std::pair<std::string, Tensor>> layers) : layers_(std::move(layers)) {
  for (const auto& [name, t] : layers_) total_dim_ += t.size();
}

std::size_t ParamSet::offset(std::size_t i) const {
  std::size_t off = 0;
  for (std::size_t j = 0; j < i; ++j) off += layers_[j].second.size();
  return off;
}

std::vector<double> ParamSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(total_dim_);
  for (const auto& [name, t] : layers_) flat.insert(flat.end(), t.data().begin(), t.data().end());
  return flat;
}

ParamSet ParamSet::unflatten(std::span<const double> flat) const {
  require(flat.size() == total_dim_, ErrorKind::kShape,
          "flat vector has " + std::to_string(flat.size()) + " entries, parameter set needs " +
              std::to_string(total_dim_));
  std::vector<std::pair<std::string, Tensor>> out;
  out.reserve(layers_.size());
  std::size_t off = 0;
  for (const auto& [name, t] : layers_) {
    out.emplace_back(name, Tensor::adopt(t.shape(), std::vector<double>(flat.begin() + off, flat.begin() + off + t.size())));
    off += t.size();
  }
  return ParamSet(std::move(out));
}

ParamSet init_params(const ModelSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::pair<std::string, Tensor>> layers;
  for (const auto& info : spec.param_layout()) {
    Tensor t(info.shape);
    if (info.shape.size() >= 2) {
      const LayerDesc& l = spec.layers()[info.layer];
      const double receptive = l.kind == LayerKind::kConv2d ? static_cast<double>(l.kernel * l.kernel) : 1.0;
      const double fan_in = static_cast<double>(l.in) * receptive;
      const double fan_out = static_cast<double>(l.out) * receptive;
      const double a = std::sqrt(6.0 / (fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-a, a);
      for (double& v : t.data()) v = dist(rng);
    }
    layers.emplace_back(info.name, std::move(t));
  }
  return ParamSet(std::move(layers));
}

ParamSet zero_params(const ModelSpec& spec) {
  std::vector<std::pair<std::string, Tensor>> layers;
  for (const auto& info : spec.param_layout()) layers.emplace_back(info.name, Tensor(info.shape));
  return ParamSet(std::move(layers));
}

std::size_t batch_size_of(const ModelSpec& spec, const Tensor& x) {
  require(x.rank() >= 2, ErrorKind::kShape, "input batch must have a leading batch axis");
  const std::size_t per_sample = x.size() / x.dim(0);
  require(per_sample == spec.input_size(), ErrorKind::kShape,
          "layer 0 (" + spec.layers()[0].describe() + "): input has " + std::to_string(per_sample) +
              " values per sample, model expects " + shape_to_string(spec.input_shape()));
  return x.dim(0);
}

Tensor predict(const ModelSpec& spec, const ParamSet& params, const Tensor& x) {
  ad::Graph g;
  std::vector<ad::Var> vars;
  for (const auto& [name, t] : params.layers()) vars.push_back(g.constant(t));
  return ad::build_logits(spec, vars, g.constant(x)).value();
}

ParamSet sgd_step(const ParamSet& params, std::span<const double> gradient, double lr) {
  require(gradient.size() == params.total_dim(), ErrorKind::kShape,
          "gradient has " + std::to_string(gradient.size()) + " entries, parameters " +
              std::to_string(params.total_dim()));
  std::vector<double> flat = params.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) flat[i] -= lr * gradient[i];
  return params.unflatten(flat);
}

Tensor one_hot(const std::vector<std::size_t>& classes, std::size_t num_classes) {
  Tensor t({classes.size(), num_classes});
  for (std::size_t i = 0; i < classes.size(); ++i) {
    require(classes[i] < num_classes, ErrorKind::kInvalidArgument, "label out of range");
    t.at(i, classes[i]) = 1.0;
  }
  return t;
}

// ---------------------------------------------------------------------------

namespace ad {
namespace {

IndexMap im2col_index(std::size_t batch, std::size_t channels, std::size_t h, std::size_t w, std::size_t k) {
  const std::size_t ho = h - k + 1, wo = w - k + 1;
  auto idx = std::make_shared<std::vector<std::int64_t>>();
  idx->reserve(batch * ho * wo * channels * k * k);
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox)
        for (std::size_t c = 0; c < channels; ++c)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx)
              idx->push_back(static_cast<std::int64_t>(((n * channels + c) * h + oy + ky) * w + ox + kx));
  return idx;
}

// (b*Ho*Wo, C) row-major -> (b, C, Ho, Wo)
IndexMap channels_last_to_first(std::size_t batch, std::size_t channels, std::size_t ho, std::size_t wo) {
  auto idx = std::make_shared<std::vector<std::int64_t>>(batch * channels * ho * wo);
  std::size_t o = 0;
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < channels; ++c)
      for (std::size_t y = 0; y < ho; ++y)
        for (std::size_t x = 0; x < wo; ++x)
          (*idx)[o++] = static_cast<std::int64_t>(((n * ho + y) * wo + x) * channels + c);
  return idx;
}

// First maximum in each 2x2 window wins.
IndexMap maxpool_index(const Tensor& in, std::size_t batch, std::size_t channels, std::size_t h, std::size_t w) {
  const std::size_t ho = h / 2, wo = w / 2;
  auto idx = std::make_shared<std::vector<std::int64_t>>(batch * channels * ho * wo);
  std::size_t o = 0;
  for (std::size_t nc = 0; nc < batch * channels; ++nc)
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t x = 0; x < wo; ++x) {
        std::size_t best = (nc * h + 2 * y) * w + 2 * x;
        for (std::size_t dy = 0; dy < 2; ++dy)
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const std::size_t at = (nc * h + 2 * y + dy) * w + 2 * x + dx;
            if (in[at] > in[best]) best = at;
          }
        (*idx)[o++] = static_cast<std::int64_t>(best);
      }
  return idx;
}

}  // namespace

Var build_logits(const ModelSpec& spec, std::span<const Var> params, Var x) {
  require(params.size() == spec.param_layout().size(), ErrorKind::kShape,
          "model expects " + std::to_string(spec.param_layout().size()) + " parameter tensors, got " +
              std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    require(params[i].shape() == spec.param_layout()[i].shape, ErrorKind::kShape,
            "parameter " + spec.param_layout()[i].name + " has shape " + shape_to_string(params[i].shape()) +
                ", layer expects " + shape_to_string(spec.param_layout()[i].shape));
  }
  const std::size_t b = batch_size_of(spec, x.value());
  Shape cur = spec.input_shape();
  Var h = reshape(x, {b, cur[0], cur[1], cur[2]});
  std::size_t p = 0;
  for (const LayerDesc& l : spec.layers()) {
    switch (l.kind) {
      case LayerKind::kDense: {
        const std::size_t in = shape_size(cur);
        if (h.value().rank() != 2) h = reshape(h, {b, in});
        Var z = matmul(h, params[p], false, true);
        h = add(z, broadcast_rows(params[p + 1], b));
        p += 2;
        cur = {l.out};
        break;
      }
      case LayerKind::kConv2d: {
        const std::size_t ho = cur[1] - l.kernel + 1, wo = cur[2] - l.kernel + 1;
        const std::size_t patch = l.in * l.kernel * l.kernel;
        Var cols = gather(h, im2col_index(b, cur[0], cur[1], cur[2], l.kernel), {b * ho * wo, patch});
        Var w2 = reshape(params[p], {l.out, patch});
        Var z = add(matmul(cols, w2, false, true), broadcast_rows(params[p + 1], b * ho * wo));
        h = gather(z, channels_last_to_first(b, l.out, ho, wo), {b, l.out, ho, wo});
        p += 2;
        cur = {l.out, ho, wo};
        break;
      }
      case LayerKind::kRelu:
        h = relu(h);
        break;
      case LayerKind::kSigmoid:
        h = sigmoid(h);
        break;
      case LayerKind::kMaxPool2x2: {
        const std::size_t ho = cur[1] / 2, wo = cur[2] / 2;
        h = gather(h, maxpool_index(h.value(), b, cur[0], cur[1], cur[2]), {b, cur[0], ho, wo});
        cur = {cur[0], ho, wo};
        break;
      }
      case LayerKind::kFlatten:
        cur = {shape_size(cur)};
        h = reshape(h, {b, cur[0]});
        break;
    }
  }
  if (h.value().rank() != 2) h = reshape(h, {b, spec.num_classes()});
  return h;
}

Var cross_entropy(Var logits, Var target_probs) {
  require(logits.shape() == target_probs.shape(), ErrorKind::kShape,
          "targets " + shape_to_string(target_probs.shape()) + " do not match logits " +
              shape_to_string(logits.shape()));
  const double b = static_cast<double>(logits.shape()[0]);
  return scale(sum(mul(log_softmax(logits), target_probs)), -1.0 / b);
}

Var cross_entropy(Var logits, const Labels& labels) {
  const std::size_t n = logits.shape().back();
  labels.validate(n);
  require(labels.batch() == logits.shape()[0], ErrorKind::kShape,
          "label count " + std::to_string(labels.batch()) + " does not match batch " +
              std::to_string(logits.shape()[0]));
  Graph& g = logits.graph();
  if (labels.is_hard()) return cross_entropy(logits, g.constant(one_hot(labels.classes(), n)));
  return cross_entropy(logits, exp(log_softmax(g.constant(labels.scores()))));
}

}  // namespace ad
}  // namespace gradleak
