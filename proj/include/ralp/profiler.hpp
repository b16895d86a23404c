#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ralp/model_ir.hpp"

namespace ralp {

enum class SkewnessMode {
  // Third standardized moment of the layer index, weighted by parameter mass.
  // Negative when parameters concentrate in late layers.
  IndexWeighted,
  // Third standardized moment of the per-layer parameter sizes themselves.
  LiteralValues,
};

std::string_view to_string(SkewnessMode mode);
std::optional<SkewnessMode> parse_skewness_mode(std::string_view text);

struct ProfilerConfig {
  double threshold_k = -0.5;
  SkewnessMode skewness_mode = SkewnessMode::IndexWeighted;

  /// Human-readable warnings about unusual settings. The config is never
  /// altered.
  std::vector<std::string> warnings() const;

  friend bool operator==(const ProfilerConfig&, const ProfilerConfig&) = default;
};

/// Population (1/n) third standardized moment. Throws InvalidArgument for
/// fewer than two layers or all-zero parameters. Returns 0 when the second
/// moment vanishes.
double compute_skewness(std::span<const double> params, SkewnessMode mode);

/// True iff `skewness < config.threshold_k`.
bool gate_eligibility(double skewness, const ProfilerConfig& config);

struct SplitResult {
  std::optional<int> split_index;  // layers 1..split on workers, the rest on the PS machine
  std::optional<double> cost_bytes;

  bool found() const { return split_index.has_value(); }
};

/// argmin over i of O_i + sum_{x<=i} P_x, skipping boundaries between two
/// compute-demand layers. Ties go to the smallest index. Throws
/// InvalidArgument when the series are empty or differ in length.
SplitResult find_split(std::span<const double> param_bytes, std::span<const double> output_bytes,
                       std::span<const LayerKind> kinds);

struct ProfileReport {
  std::string model_name;
  std::int64_t batch_size = 0;
  ProfilerConfig config;
  std::vector<std::string> layer_names;
  std::vector<LayerKind> kinds;
  std::vector<double> param_bytes;
  std::vector<double> output_bytes;
  std::vector<double> cumulative_params;
  double skewness = 0.0;
  bool eligible = false;
  bool degenerate = false;  // single layer or no parameters; skewness not defined
  std::optional<int> split_index;
  std::optional<double> split_cost_bytes;

  /// "ralp" when eligible and a split exists, otherwise "baseline-ps".
  std::string recommendation() const;

  friend bool operator==(const ProfileReport&, const ProfileReport&) = default;
};

ProfileReport profile(const ModelGraph& model, const ProfilerConfig& config = {});

nlohmann::ordered_json to_json(const ProfileReport& report);

}  // namespace ralp
