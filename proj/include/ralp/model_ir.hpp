#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace ralp {

enum class LayerKind {
  Convolution,
  Pooling,
  FullyConnected,
  Normalization,
  Activation,
  Flatten,
  Concat,
  ResidualAdd,
  Loss,
  // A linearized inception/residual module; its totals are declared, not inferred.
  Block,
};

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view token);

/// Layers the split search refuses to cut between.
constexpr bool is_compute_demand(LayerKind kind) {
  return kind == LayerKind::Convolution || kind == LayerKind::Block;
}

struct TensorShape {
  std::int64_t height = 1;
  std::int64_t width = 1;
  std::int64_t channels = 0;

  std::int64_t elements() const { return height * width * channels; }
  static TensorShape flat(std::int64_t n) { return {1, 1, n}; }
  friend bool operator==(const TensorShape&, const TensorShape&) = default;
};

std::string to_string(const TensorShape& shape);

enum class Padding { Same, Valid, Explicit };

struct ConvParams {
  std::int64_t kernel_h = 0;
  std::int64_t kernel_w = 0;
  std::int64_t in_channels = 0;
  std::int64_t out_channels = 0;
  std::int64_t stride = 1;
  Padding padding = Padding::Same;
  std::int64_t pad = 0;  // only for Padding::Explicit
  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

enum class PoolOp { Max, Avg };

struct PoolParams {
  PoolOp op = PoolOp::Max;
  std::int64_t window = 0;
  std::int64_t stride = 0;
  Padding padding = Padding::Valid;
  std::int64_t pad = 0;
  friend bool operator==(const PoolParams&, const PoolParams&) = default;
};

struct FcParams {
  std::int64_t in_features = 0;
  std::int64_t out_features = 0;
  friend bool operator==(const FcParams&, const FcParams&) = default;
};

struct ConcatParams {
  std::int64_t channels = 0;
  friend bool operator==(const ConcatParams&, const ConcatParams&) = default;
};

struct BlockParams {
  std::uint64_t params = 0;
  std::uint64_t out_elems = 0;
  std::uint64_t flops = 0;
  std::optional<TensorShape> shape;
  friend bool operator==(const BlockParams&, const BlockParams&) = default;
};

using LayerHyperparams =
    std::variant<std::monostate, ConvParams, PoolParams, FcParams, ConcatParams, BlockParams>;

/// Per-sample cost of one layer given its input.
struct LayerCost {
  std::uint64_t param_count = 0;
  std::uint64_t output_elems_per_sample = 0;
  std::uint64_t compute_flops_per_sample = 0;  // forward pass, multiply-add counted as 2
  TensorShape output_shape;
  friend bool operator==(const LayerCost&, const LayerCost&) = default;
};

/// Derives parameter count, output size and forward flops. Throws
/// InvalidArgument for nonpositive dimensions or a window/stride that does not
/// fit the padded input.
LayerCost infer_layer(LayerKind kind, const LayerHyperparams& hyper, const TensorShape& input);

/// A layer as written in a descriptor, before inference.
struct LayerDecl {
  std::string name;
  LayerKind kind = LayerKind::Activation;
  LayerHyperparams hyper;
};

struct LayerSpec {
  int index = 0;  // 1-based forward position
  std::string name;
  LayerKind kind = LayerKind::Activation;
  LayerHyperparams hyper;
  std::uint64_t param_count = 0;
  std::uint64_t output_elems_per_sample = 0;
  std::uint64_t compute_flops_per_sample = 0;
  TensorShape output_shape;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Immutable, validated layer chain with its training configuration.
class ModelGraph {
 public:
  /// Runs inference over `layers` in order and checks adjacent shapes. Throws
  /// ShapeError naming both layers on a mismatch.
  static ModelGraph build(std::string name, std::optional<TensorShape> input,
                          std::vector<LayerDecl> layers, std::int64_t batch_size,
                          std::int64_t bytes_per_element = 4);

  const std::string& name() const { return name_; }
  const std::optional<TensorShape>& input_shape() const { return input_; }
  std::span<const LayerSpec> layers() const { return layers_; }
  std::size_t size() const { return layers_.size(); }
  const LayerSpec& layer(int index) const;  // 1-based
  std::int64_t batch_size() const { return batch_size_; }
  std::int64_t bytes_per_element() const { return bytes_per_element_; }

  std::uint64_t total_param_count() const { return total_params_; }
  std::uint64_t total_param_bytes() const;
  std::uint64_t param_bytes(int index) const;
  /// Activation bytes leaving layer `index` for one worker batch.
  std::uint64_t output_bytes(int index) const;
  /// Parameter bytes of layers 1..index.
  std::uint64_t cumulative_param_bytes(int index) const;
  /// Forward flops per sample of layers in [first, last], 1-based inclusive.
  std::uint64_t forward_flops_per_sample(int first, int last) const;

  std::vector<double> param_bytes_series() const;
  std::vector<double> output_bytes_series() const;
  std::vector<LayerKind> kinds() const;

  ModelGraph with_batch_size(std::int64_t batch_size) const;

  friend bool operator==(const ModelGraph&, const ModelGraph&) = default;

 private:
  ModelGraph() = default;

  std::string name_;
  std::optional<TensorShape> input_;
  std::vector<LayerSpec> layers_;
  std::int64_t batch_size_ = 1;
  std::int64_t bytes_per_element_ = 4;
  std::uint64_t total_params_ = 0;
};

/// Parses the line-oriented descriptor format. `source` names the document in
/// diagnostics.
ModelGraph parse_model(std::string_view text, const std::string& source = "<descriptor>");
ModelGraph load_model_file(const std::filesystem::path& path);

/// Canonical descriptor text; parse_model(to_descriptor(m)) == m.
std::string to_descriptor(const ModelGraph& model);

}  // namespace ralp
