#include "ralp/model_ir.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "ralp/error.hpp"
#include "text_util.hpp"

namespace ralp {

namespace {

struct KindName {
  LayerKind kind;
  std::string_view canonical;
  std::initializer_list<std::string_view> aliases;
};

const KindName kKindNames[] = {
    {LayerKind::Convolution, "conv", {"conv", "convolution"}},
    {LayerKind::Pooling, "pool", {"pool", "pooling"}},
    {LayerKind::FullyConnected, "fc", {"fc", "fully_connected", "fullyconnected", "dense"}},
    {LayerKind::Normalization, "norm", {"norm", "normalization", "batchnorm", "lrn"}},
    {LayerKind::Activation, "act", {"act", "activation", "relu"}},
    {LayerKind::Flatten, "flatten", {"flatten"}},
    {LayerKind::Concat, "concat", {"concat"}},
    {LayerKind::ResidualAdd, "add", {"add", "residual_add", "residual"}},
    {LayerKind::Loss, "loss", {"loss", "softmax"}},
    {LayerKind::Block, "block", {"block"}},
};

// Output extent of a sliding window along one axis.
std::int64_t window_extent(std::int64_t in, std::int64_t window, std::int64_t stride, Padding padding,
                           std::int64_t pad) {
  if (padding == Padding::Same) {
    if (stride > in) throw InvalidArgument(fmt::format("stride {} larger than input extent {}", stride, in));
    return (in + stride - 1) / stride;
  }
  const std::int64_t padded = in + 2 * (padding == Padding::Explicit ? pad : 0);
  if (window > padded)
    throw InvalidArgument(fmt::format("window {} larger than padded input extent {}", window, padded));
  if (stride > padded)
    throw InvalidArgument(fmt::format("stride {} larger than padded input extent {}", stride, padded));
  return (padded - window) / stride + 1;
}

void require_positive(std::int64_t v, std::string_view what) {
  if (v <= 0) throw InvalidArgument(fmt::format("{} must be positive, got {}", what, v));
}

std::uint64_t u64(std::int64_t v) { return static_cast<std::uint64_t>(v); }

}  // namespace

std::string_view to_string(LayerKind kind) {
  for (const auto& k : kKindNames)
    if (k.kind == kind) return k.canonical;
  return "?";
}

std::optional<LayerKind> parse_layer_kind(std::string_view token) {
  const std::string lower = detail::to_lower(token);
  for (const auto& k : kKindNames)
    for (auto alias : k.aliases)
      if (alias == lower) return k.kind;
  return std::nullopt;
}

std::string to_string(const TensorShape& shape) {
  return fmt::format("{}x{}x{}", shape.height, shape.width, shape.channels);
}

LayerCost infer_layer(LayerKind kind, const LayerHyperparams& hyper, const TensorShape& input) {
  LayerCost cost;
  const auto in_elems = input.elements();
  switch (kind) {
    case LayerKind::Convolution: {
      const auto& p = std::get<ConvParams>(hyper);
      require_positive(p.kernel_h, "kernel height");
      require_positive(p.kernel_w, "kernel width");
      require_positive(p.in_channels, "input channels");
      require_positive(p.out_channels, "output channels");
      require_positive(p.stride, "stride");
      require_positive(input.height, "input height");
      require_positive(input.width, "input width");
      if (p.padding == Padding::Explicit && p.pad < 0) throw InvalidArgument("padding must be nonnegative");
      const auto h = window_extent(input.height, p.kernel_h, p.stride, p.padding, p.pad);
      const auto w = window_extent(input.width, p.kernel_w, p.stride, p.padding, p.pad);
      const auto taps = u64(p.kernel_h * p.kernel_w * p.in_channels);
      cost.param_count = taps * u64(p.out_channels) + u64(p.out_channels);
      cost.output_shape = {h, w, p.out_channels};
      cost.compute_flops_per_sample = 2 * taps * u64(p.out_channels) * u64(h * w);
      break;
    }
    case LayerKind::Pooling: {
      const auto& p = std::get<PoolParams>(hyper);
      require_positive(p.window, "pooling window");
      require_positive(p.stride, "pooling stride");
      require_positive(input.channels, "input channels");
      if (p.padding == Padding::Explicit && p.pad < 0) throw InvalidArgument("padding must be nonnegative");
      const auto h = window_extent(input.height, p.window, p.stride, p.padding, p.pad);
      const auto w = window_extent(input.width, p.window, p.stride, p.padding, p.pad);
      cost.output_shape = {h, w, input.channels};
      cost.compute_flops_per_sample = u64(p.window * p.window) * u64(cost.output_shape.elements());
      break;
    }
    case LayerKind::FullyConnected: {
      const auto& p = std::get<FcParams>(hyper);
      require_positive(p.in_features, "input width");
      require_positive(p.out_features, "output width");
      cost.param_count = u64(p.in_features) * u64(p.out_features) + u64(p.out_features);
      cost.output_shape = TensorShape::flat(p.out_features);
      cost.compute_flops_per_sample = 2 * u64(p.in_features) * u64(p.out_features);
      break;
    }
    case LayerKind::Normalization:
      require_positive(in_elems, "input size");
      cost.output_shape = input;
      cost.compute_flops_per_sample = 2 * u64(in_elems);
      break;
    case LayerKind::Activation:
      require_positive(in_elems, "input size");
      cost.output_shape = input;
      cost.compute_flops_per_sample = u64(in_elems);
      break;
    case LayerKind::Flatten:
      require_positive(in_elems, "input size");
      cost.output_shape = TensorShape::flat(in_elems);
      break;
    case LayerKind::Concat: {
      const auto& p = std::get<ConcatParams>(hyper);
      require_positive(p.channels, "concat channels");
      cost.output_shape = {input.height, input.width, p.channels};
      break;
    }
    case LayerKind::ResidualAdd:
      require_positive(in_elems, "input size");
      cost.output_shape = input;
      cost.compute_flops_per_sample = u64(in_elems);
      break;
    case LayerKind::Loss:
      require_positive(in_elems, "input size");
      cost.output_shape = {0, 0, 0};
      cost.compute_flops_per_sample = 2 * u64(in_elems);
      cost.output_elems_per_sample = 0;
      return cost;
    case LayerKind::Block: {
      const auto& p = std::get<BlockParams>(hyper);
      if (p.out_elems == 0) throw InvalidArgument("block output size must be positive");
      cost.param_count = p.params;
      cost.compute_flops_per_sample = p.flops;
      cost.output_shape = p.shape ? *p.shape : TensorShape::flat(static_cast<std::int64_t>(p.out_elems));
      if (u64(cost.output_shape.elements()) != p.out_elems)
        throw InvalidArgument(fmt::format("block shape {} holds {} elements, declared out={}",
                                          to_string(cost.output_shape), cost.output_shape.elements(),
                                          p.out_elems));
      break;
    }
  }
  cost.output_elems_per_sample = u64(cost.output_shape.elements());
  return cost;
}

// ---------------------------------------------------------------------------

ModelGraph ModelGraph::build(std::string name, std::optional<TensorShape> input,
                             std::vector<LayerDecl> decls, std::int64_t batch_size,
                             std::int64_t bytes_per_element) {
  if (decls.empty()) throw InvalidArgument(fmt::format("model '{}' has no layers", name));
  require_positive(batch_size, "batch size");
  require_positive(bytes_per_element, "element width");

  ModelGraph g;
  g.name_ = std::move(name);
  g.input_ = input;
  g.batch_size_ = batch_size;
  g.bytes_per_element_ = bytes_per_element;
  g.layers_.reserve(decls.size());

  std::optional<TensorShape> current = input;
  std::string producer = "input";
  for (std::size_t i = 0; i < decls.size(); ++i) {
    auto& d = decls[i];
    auto mismatch = [&](const std::string& detail) {
      return ShapeError(fmt::format("layer '{}' is incompatible with preceding layer '{}': {}", d.name,
                                    producer, detail));
    };
    if (current && current->elements() == 0)
      throw mismatch("nothing flows out of a loss layer");

    // Resolve implicit input dimensions and check declared ones.
    if (auto* conv = std::get_if<ConvParams>(&d.hyper)) {
      if (!current) throw mismatch("convolution needs a known input shape");
      if (conv->in_channels == 0) conv->in_channels = current->channels;
      if (conv->in_channels != current->channels)
        throw mismatch(fmt::format("declares {} input channels but receives {}", conv->in_channels,
                                   to_string(*current)));
    } else if (auto* fc = std::get_if<FcParams>(&d.hyper)) {
      if (!current && fc->in_features == 0) throw mismatch("fully connected layer needs in= or a known input");
      if (fc->in_features == 0) fc->in_features = current->elements();
      if (current && fc->in_features != current->elements())
        throw mismatch(fmt::format("declares {} inputs but receives {} elements ({})", fc->in_features,
                                   current->elements(), to_string(*current)));
    } else if (d.kind != LayerKind::Block && !current) {
      throw mismatch(fmt::format("{} layer needs a known input shape", to_string(d.kind)));
    }

    const TensorShape in = current.value_or(TensorShape::flat(
        std::holds_alternative<FcParams>(d.hyper) ? std::get<FcParams>(d.hyper).in_features : 1));
    LayerCost cost;
    try {
      cost = infer_layer(d.kind, d.hyper, in);
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(fmt::format("layer '{}': {}", d.name, e.what()));
    }

    LayerSpec spec;
    spec.index = static_cast<int>(i) + 1;
    spec.name = std::move(d.name);
    spec.kind = d.kind;
    spec.hyper = std::move(d.hyper);
    spec.param_count = cost.param_count;
    spec.output_elems_per_sample = cost.output_elems_per_sample;
    spec.compute_flops_per_sample = cost.compute_flops_per_sample;
    spec.output_shape = cost.output_shape;
    g.total_params_ += spec.param_count;
    producer = spec.name;
    current = spec.output_shape;
    g.layers_.push_back(std::move(spec));
  }
  return g;
}

const LayerSpec& ModelGraph::layer(int index) const {
  if (index < 1 || static_cast<std::size_t>(index) > layers_.size())
    throw InvalidArgument(fmt::format("layer index {} out of range 1..{}", index, layers_.size()));
  return layers_[static_cast<std::size_t>(index - 1)];
}

std::uint64_t ModelGraph::total_param_bytes() const { return total_params_ * u64(bytes_per_element_); }

std::uint64_t ModelGraph::param_bytes(int index) const {
  return layer(index).param_count * u64(bytes_per_element_);
}

std::uint64_t ModelGraph::output_bytes(int index) const {
  return layer(index).output_elems_per_sample * u64(batch_size_) * u64(bytes_per_element_);
}

std::uint64_t ModelGraph::cumulative_param_bytes(int index) const {
  if (index == 0) return 0;
  layer(index);
  std::uint64_t sum = 0;
  for (int i = 0; i < index; ++i) sum += layers_[static_cast<std::size_t>(i)].param_count;
  return sum * u64(bytes_per_element_);
}

std::uint64_t ModelGraph::forward_flops_per_sample(int first, int last) const {
  std::uint64_t sum = 0;
  for (int i = std::max(first, 1); i <= std::min<int>(last, static_cast<int>(layers_.size())); ++i)
    sum += layers_[static_cast<std::size_t>(i - 1)].compute_flops_per_sample;
  return sum;
}

std::vector<double> ModelGraph::param_bytes_series() const {
  std::vector<double> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(static_cast<double>(l.param_count * u64(bytes_per_element_)));
  return out;
}

std::vector<double> ModelGraph::output_bytes_series() const {
  std::vector<double> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_)
    out.push_back(static_cast<double>(l.output_elems_per_sample * u64(batch_size_) * u64(bytes_per_element_)));
  return out;
}

std::vector<LayerKind> ModelGraph::kinds() const {
  std::vector<LayerKind> out;
  out.reserve(layers_.size());
  for (const auto& l : layers_) out.push_back(l.kind);
  return out;
}

ModelGraph ModelGraph::with_batch_size(std::int64_t batch_size) const {
  require_positive(batch_size, "batch size");
  ModelGraph copy = *this;
  copy.batch_size_ = batch_size;
  return copy;
}

// ---------------------------------------------------------------------------
// Descriptor parsing

namespace {

class LineParser {
 public:
  LineParser(const std::string& source, int line, std::vector<detail::Token> tokens)
      : source_(source), line_(line), tokens_(std::move(tokens)) {}

  [[noreturn]] void fail(const detail::Token& at, const std::string& what) const {
    throw ParseError(source_, line_, at.column, what);
  }

  // Splits key=value tokens starting at `first`; duplicate keys are errors.
  std::map<std::string, detail::Token> keyvalues(std::size_t first) const {
    std::map<std::string, detail::Token> kv;
    for (std::size_t i = first; i < tokens_.size(); ++i) {
      const auto& t = tokens_[i];
      const auto eq = t.text.find('=');
      if (eq == std::string::npos || eq == 0 || eq + 1 == t.text.size())
        fail(t, fmt::format("expected key=value, got '{}'", t.text));
      auto key = detail::to_lower(t.text.substr(0, eq));
      detail::Token value{t.text.substr(eq + 1), t.column + static_cast<int>(eq) + 1};
      if (!kv.emplace(key, value).second) fail(t, fmt::format("duplicate key '{}'", key));
    }
    return kv;
  }

  const std::vector<detail::Token>& tokens() const { return tokens_; }

  std::int64_t integer(const detail::Token& t) const {
    auto v = detail::parse_int(t.text);
    if (!v) fail(t, fmt::format("expected an integer, got '{}'", t.text));
    return *v;
  }

  std::uint64_t count(const detail::Token& t) const {
    auto v = detail::parse_uint(t.text);
    if (!v) fail(t, fmt::format("expected a nonnegative integer, got '{}'", t.text));
    return *v;
  }

  TensorShape shape(const detail::Token& t) const {
    auto s = detail::parse_shape(t.text);
    if (!s) fail(t, fmt::format("expected HxWxC, got '{}'", t.text));
    return {(*s)[0], (*s)[1], (*s)[2]};
  }

  std::pair<Padding, std::int64_t> padding(const detail::Token& t) const {
    const auto lower = detail::to_lower(t.text);
    if (lower == "same") return {Padding::Same, 0};
    if (lower == "valid") return {Padding::Valid, 0};
    return {Padding::Explicit, integer(t)};
  }

 private:
  const std::string& source_;
  int line_;
  std::vector<detail::Token> tokens_;
};

template <typename Map>
void reject_unknown_keys(const LineParser& p, const Map& kv, std::initializer_list<std::string_view> allowed,
                         std::string_view kind) {
  for (const auto& [key, tok] : kv) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      // point at the key, not the value
      const detail::Token at{key, tok.column - static_cast<int>(key.size()) - 1};
      p.fail(at, fmt::format("unknown key '{}' for {} layer", key, kind));
    }
  }
}

LayerHyperparams parse_hyper(const LineParser& p, LayerKind kind,
                             const std::map<std::string, detail::Token>& kv, const detail::Token& kind_tok) {
  auto get = [&](const char* key) -> const detail::Token* {
    auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  auto need = [&](const char* key) -> const detail::Token& {
    if (auto* t = get(key)) return *t;
    p.fail(kind_tok, fmt::format("{} layer requires '{}='", to_string(kind), key));
  };

  switch (kind) {
    case LayerKind::Convolution: {
      reject_unknown_keys(p, kv, {"k", "kh", "kw", "in", "out", "stride", "pad"}, "conv");
      ConvParams c;
      if (auto* k = get("k")) c.kernel_h = c.kernel_w = p.integer(*k);
      if (auto* k = get("kh")) c.kernel_h = p.integer(*k);
      if (auto* k = get("kw")) c.kernel_w = p.integer(*k);
      if (!get("k") && !(get("kh") && get("kw"))) p.fail(kind_tok, "conv layer requires 'k=' or both 'kh=' and 'kw='");
      if (auto* t = get("in")) c.in_channels = p.integer(*t);
      c.out_channels = p.integer(need("out"));
      if (auto* t = get("stride")) c.stride = p.integer(*t);
      if (auto* t = get("pad")) std::tie(c.padding, c.pad) = p.padding(*t);
      return c;
    }
    case LayerKind::Pooling: {
      reject_unknown_keys(p, kv, {"op", "window", "stride", "pad"}, "pool");
      PoolParams q;
      if (auto* t = get("op")) {
        const auto op = detail::to_lower(t->text);
        if (op == "max") q.op = PoolOp::Max;
        else if (op == "avg") q.op = PoolOp::Avg;
        else p.fail(*t, fmt::format("unknown pooling op '{}'", t->text));
      }
      q.window = p.integer(need("window"));
      q.stride = get("stride") ? p.integer(*get("stride")) : q.window;
      if (auto* t = get("pad")) std::tie(q.padding, q.pad) = p.padding(*t);
      return q;
    }
    case LayerKind::FullyConnected: {
      reject_unknown_keys(p, kv, {"in", "out"}, "fc");
      FcParams f;
      if (auto* t = get("in")) f.in_features = p.integer(*t);
      f.out_features = p.integer(need("out"));
      return f;
    }
    case LayerKind::Concat:
      reject_unknown_keys(p, kv, {"channels"}, "concat");
      return ConcatParams{p.integer(need("channels"))};
    case LayerKind::Block: {
      reject_unknown_keys(p, kv, {"params", "out", "flops", "shape"}, "block");
      BlockParams b;
      b.params = p.count(need("params"));
      b.out_elems = p.count(need("out"));
      b.flops = p.count(need("flops"));
      if (auto* t = get("shape")) b.shape = p.shape(*t);
      return b;
    }
    default:
      reject_unknown_keys(p, kv, {}, to_string(kind));
      return std::monostate{};
  }
}

}  // namespace

ModelGraph parse_model(std::string_view text, const std::string& source) {
  std::optional<std::string> name;
  std::optional<TensorShape> input;
  std::int64_t batch = 0;
  std::int64_t elem_bytes = 4;
  std::vector<LayerDecl> decls;
  std::map<std::string, int> seen_names;
  int header_line = 0;

  int line_no = 0;
  for (const auto& raw : detail::split_lines(text)) {
    ++line_no;
    auto tokens = detail::tokenize(raw);
    if (tokens.empty()) continue;
    LineParser p(source, line_no, std::move(tokens));
    const auto& toks = p.tokens();

    if (!name) {
      if (detail::to_lower(toks[0].text) != "model")
        p.fail(toks[0], "expected header 'model <name> batch=<n> elem_bytes=<n>'");
      if (toks.size() < 2 || toks[1].text.find('=') != std::string::npos)
        p.fail(toks[0], "model header is missing the model name");
      name = toks[1].text;
      header_line = line_no;
      const auto kv = p.keyvalues(2);
      reject_unknown_keys(p, kv, {"batch", "elem_bytes", "input"}, "model header");
      auto it = kv.find("batch");
      if (it == kv.end()) p.fail(toks[0], "model header requires 'batch='");
      batch = p.integer(it->second);
      if (batch <= 0) p.fail(it->second, "batch must be positive");
      if (auto e = kv.find("elem_bytes"); e != kv.end()) {
        elem_bytes = p.integer(e->second);
        if (elem_bytes <= 0) p.fail(e->second, "elem_bytes must be positive");
      }
      if (auto in = kv.find("input"); in != kv.end()) input = p.shape(in->second);
      continue;
    }

    if (toks.size() < 2) p.fail(toks[0], "expected '<name> <kind> key=value ...'");
    const auto kind = parse_layer_kind(toks[1].text);
    if (!kind) p.fail(toks[1], fmt::format("unknown layer kind '{}'", toks[1].text));
    if (toks[0].text.find('=') != std::string::npos) p.fail(toks[0], "layer name may not contain '='");
    if (auto [it, fresh] = seen_names.emplace(toks[0].text, line_no); !fresh)
      p.fail(toks[0], fmt::format("duplicate layer name '{}' (first on line {})", toks[0].text, it->second));
    const auto kv = p.keyvalues(2);
    decls.push_back({toks[0].text, *kind, parse_hyper(p, *kind, kv, toks[1])});
  }

  if (!name) throw ParseError(source, line_no == 0 ? 1 : line_no, 1, "missing 'model' header");
  if (decls.empty()) throw ParseError(source, header_line, 1, fmt::format("model '{}' declares no layers", *name));
  return ModelGraph::build(*name, input, std::move(decls), batch, elem_bytes);
}

ModelGraph load_model_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), 0, 0, "cannot open model descriptor");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str(), path.string());
}

namespace {

std::string padding_text(Padding padding, std::int64_t pad) {
  switch (padding) {
    case Padding::Same: return "same";
    case Padding::Valid: return "valid";
    case Padding::Explicit: return std::to_string(pad);
  }
  return "valid";
}

}  // namespace

std::string to_descriptor(const ModelGraph& model) {
  std::string out = fmt::format("model {} batch={} elem_bytes={}", model.name(), model.batch_size(),
                                model.bytes_per_element());
  if (model.input_shape()) out += " input=" + to_string(*model.input_shape());
  out += '\n';
  for (const auto& l : model.layers()) {
    out += fmt::format("{} {}", l.name, to_string(l.kind));
    std::visit(
        [&](const auto& h) {
          using T = std::decay_t<decltype(h)>;
          if constexpr (std::is_same_v<T, ConvParams>) {
            if (h.kernel_h == h.kernel_w) out += fmt::format(" k={}", h.kernel_h);
            else out += fmt::format(" kh={} kw={}", h.kernel_h, h.kernel_w);
            out += fmt::format(" in={} out={} stride={} pad={}", h.in_channels, h.out_channels, h.stride,
                               padding_text(h.padding, h.pad));
          } else if constexpr (std::is_same_v<T, PoolParams>) {
            out += fmt::format(" op={} window={} stride={} pad={}", h.op == PoolOp::Max ? "max" : "avg",
                               h.window, h.stride, padding_text(h.padding, h.pad));
          } else if constexpr (std::is_same_v<T, FcParams>) {
            out += fmt::format(" in={} out={}", h.in_features, h.out_features);
          } else if constexpr (std::is_same_v<T, ConcatParams>) {
            out += fmt::format(" channels={}", h.channels);
          } else if constexpr (std::is_same_v<T, BlockParams>) {
            out += fmt::format(" params={} out={} flops={}", h.params, h.out_elems, h.flops);
            if (h.shape) out += " shape=" + to_string(*h.shape);
          }
        },
        l.hyper);
    out += '\n';
  }
  return out;
}

}  // namespace ralp
