#include "ralp/profiler.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ralp/error.hpp"

namespace ralp {

std::string_view to_string(SkewnessMode mode) {
  return mode == SkewnessMode::IndexWeighted ? "index_weighted" : "literal_values";
}

std::optional<SkewnessMode> parse_skewness_mode(std::string_view text) {
  if (text == "index_weighted" || text == "index") return SkewnessMode::IndexWeighted;
  if (text == "literal_values" || text == "literal") return SkewnessMode::LiteralValues;
  return std::nullopt;
}

std::vector<std::string> ProfilerConfig::warnings() const {
  std::vector<std::string> out;
  if (!std::isfinite(threshold_k)) out.push_back(fmt::format("threshold K={} is not finite", threshold_k));
  else if (threshold_k >= 0.0)
    out.push_back(fmt::format(
        "threshold K={} is not negative; models without tail-heavy parameters may be partitioned", threshold_k));
  return out;
}

double compute_skewness(std::span<const double> params, SkewnessMode mode) {
  if (params.size() < 2)
    throw InvalidArgument(fmt::format("skewness needs at least 2 layers, got {}", params.size()));
  const double total = std::accumulate(params.begin(), params.end(), 0.0);
  if (std::none_of(params.begin(), params.end(), [](double p) { return p != 0.0; }))
    throw InvalidArgument("skewness undefined: every layer has zero parameters");
  for (double p : params)
    if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidArgument("parameter sizes must be finite and nonnegative");

  const std::size_t n = params.size();
  double m2 = 0.0;
  double m3 = 0.0;
  if (mode == SkewnessMode::LiteralValues) {
    const double mean = total / static_cast<double>(n);
    for (double p : params) {
      const double d = p - mean;
      m2 += d * d;
      m3 += d * d * d;
    }
    m2 /= static_cast<double>(n);
    m3 /= static_cast<double>(n);
  } else {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += static_cast<double>(i + 1) * (params[i] / total);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = params[i] / total;
      const double d = static_cast<double>(i + 1) - mean;
      m2 += w * d * d;
      m3 += w * d * d * d;
    }
  }
  // Relative guard: identical values leave rounding residue in m2.
  const double scale = mode == SkewnessMode::LiteralValues ? (total / static_cast<double>(n)) : 1.0;
  if (m2 <= 1e-24 * scale * scale) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

bool gate_eligibility(double skewness, const ProfilerConfig& config) { return skewness < config.threshold_k; }

SplitResult find_split(std::span<const double> param_bytes, std::span<const double> output_bytes,
                       std::span<const LayerKind> kinds) {
  const auto n = param_bytes.size();
  if (n == 0) throw InvalidArgument("split search needs at least one layer");
  if (output_bytes.size() != n || kinds.size() != n)
    throw InvalidArgument(fmt::format("series lengths differ: {} params, {} outputs, {} kinds", n,
                                      output_bytes.size(), kinds.size()));

  SplitResult best;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    cumulative += param_bytes[i];
    if (i + 1 < n && is_compute_demand(kinds[i]) && is_compute_demand(kinds[i + 1])) continue;
    const double cost = output_bytes[i] + cumulative;
    if (!best.cost_bytes || cost < *best.cost_bytes) {
      best.split_index = static_cast<int>(i) + 1;
      best.cost_bytes = cost;
    }
  }
  return best;
}

std::string ProfileReport::recommendation() const {
  return eligible && split_index ? "ralp" : "baseline-ps";
}

ProfileReport profile(const ModelGraph& model, const ProfilerConfig& config) {
  ProfileReport r;
  r.model_name = model.name();
  r.batch_size = model.batch_size();
  r.config = config;
  r.kinds = model.kinds();
  r.param_bytes = model.param_bytes_series();
  r.output_bytes = model.output_bytes_series();
  r.cumulative_params.resize(r.param_bytes.size());
  std::inclusive_scan(r.param_bytes.begin(), r.param_bytes.end(), r.cumulative_params.begin());
  for (const auto& l : model.layers()) r.layer_names.push_back(l.name);

  if (model.size() < 2 || model.total_param_count() == 0) {
    r.degenerate = true;
    return r;
  }
  r.skewness = compute_skewness(r.param_bytes, config.skewness_mode);
  r.eligible = gate_eligibility(r.skewness, config);
  if (r.eligible) {
    const auto split = find_split(r.param_bytes, r.output_bytes, r.kinds);
    r.split_index = split.split_index;
    r.split_cost_bytes = split.cost_bytes;
  }
  return r;
}

nlohmann::ordered_json to_json(const ProfileReport& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model_name;
  j["batch_size"] = r.batch_size;
  j["threshold_k"] = r.config.threshold_k;
  j["skewness_mode"] = std::string(to_string(r.config.skewness_mode));
  j["skewness"] = r.skewness;
  j["degenerate"] = r.degenerate;
  j["eligible"] = r.eligible;
  j["recommendation"] = r.recommendation();
  if (r.split_index) {
    const auto i = static_cast<std::size_t>(*r.split_index);
    j["split_index"] = *r.split_index;
    j["split_cost_bytes"] = *r.split_cost_bytes;
    j["split_after"] = r.layer_names[i - 1];
    j["split_before"] = i < r.layer_names.size() ? nlohmann::ordered_json(r.layer_names[i]) : nlohmann::ordered_json(nullptr);
  } else {
    j["split_index"] = nullptr;
    j["split_cost_bytes"] = nullptr;
    j["fallback"] = "no partitioning; training runs on the standard parameter-server architecture";
  }
  auto& layers = j["layers"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < r.layer_names.size(); ++i) {
    layers.push_back({{"index", i + 1},
                      {"name", r.layer_names[i]},
                      {"kind", std::string(to_string(r.kinds[i]))},
                      {"param_bytes", r.param_bytes[i]},
                      {"output_bytes", r.output_bytes[i]},
                      {"cumulative_param_bytes", r.cumulative_params[i]}});
  }
  return j;
}

}  // namespace ralp
