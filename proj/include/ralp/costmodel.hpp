#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ralp/model_ir.hpp"

namespace ralp {

/// Bytes per "GB" in human output. Published transfer sizes are binary
/// gigabytes.
inline constexpr double kBytesPerGiB = 1024.0 * 1024.0 * 1024.0;

inline double to_gib(std::uint64_t bytes) { return static_cast<double>(bytes) / kBytesPerGiB; }

enum class StrategyKind { BaselinePS, Ralp, RingAllreduce };

std::string_view to_string(StrategyKind kind);

struct Strategy {
  StrategyKind kind = StrategyKind::BaselinePS;
  int split_index = 0;  // meaningful for Ralp only

  static Strategy baseline() { return {StrategyKind::BaselinePS, 0}; }
  static Strategy ralp(int split) { return {StrategyKind::Ralp, split}; }
  static Strategy ring() { return {StrategyKind::RingAllreduce, 0}; }

  friend bool operator==(const Strategy&, const Strategy&) = default;
};

/// A training job as the cost model and simulator see it.
struct JobSpec {
  ModelGraph model;
  Strategy strategy;
  int worker_count = 1;
  int ps_count = 1;  // 1 for RALP, 0 for ring-allreduce, >= 1 for baseline

  /// Throws InvalidArgument when the fields are inconsistent.
  void validate() const;
};

struct StrategyVolumes {
  std::uint64_t total_bytes = 0;
  std::uint64_t per_worker_bytes = 0;
  std::uint64_t parameter_sync_bytes = 0;
  std::uint64_t activation_bytes = 0;

  friend bool operator==(const StrategyVolumes&, const StrategyVolumes&) = default;
};

/// Every worker pushes gradients of the whole model and pulls it back.
StrategyVolumes volume_baseline(const ModelGraph& model, int workers);
/// 2 * S * (W - 1) bytes across the ring.
StrategyVolumes volume_ring(const ModelGraph& model, int workers);
/// Each worker ships the split activation forward and its gradient back, and
/// synchronizes only the front-segment parameters. Requires 1 <= split < N.
StrategyVolumes volume_ralp(const ModelGraph& model, int split_index, int workers);
StrategyVolumes volumes_for(const JobSpec& job);

struct ComputeLoad {
  std::uint64_t worker_flops_per_step = 0;
  std::uint64_t ps_flops_per_step = 0;
  friend bool operator==(const ComputeLoad&, const ComputeLoad&) = default;
};

/// Forward + backward (2x forward) flops. With a split the PS machine runs the
/// back segment for all `workers` batches; without one it only aggregates
/// (one addition per parameter per worker).
ComputeLoad compute_load(const ModelGraph& model, std::optional<int> split_index, int workers = 1);

/// Worker/PS/GPU counts for a strategy under a GPU budget N.
struct GpuAccounting {
  std::string label;  // baseline, ring, ralp-h, ralp-n
  int workers = 0;
  int ps = 0;
  int total_gpus() const { return workers + ps; }
};

/// Equal workers and PSes (N/2 each).
GpuAccounting baseline_accounting(int gpus);
/// All GPUs run workers.
GpuAccounting ring_accounting(int gpus);
/// N/2 workers plus one PS GPU.
GpuAccounting ralp_h_accounting(int gpus);
/// N-1 workers plus one PS GPU.
GpuAccounting ralp_n_accounting(int gpus);

struct StrategyRow {
  std::string model;
  StrategyKind strategy = StrategyKind::BaselinePS;
  int workers = 0;
  int gpus = 0;
  std::optional<int> split_index;  // Ralp rows
  bool fallback = false;           // Ralp row without a usable split reports baseline volumes
  StrategyVolumes volumes;
};

/// One row per (strategy, W), strategies in the order given, W ascending in
/// input order. The RALP split comes from find_split on the model.
std::vector<StrategyRow> compare_strategies(const ModelGraph& model, std::span<const int> workers,
                                            std::span<const StrategyKind> strategies);
std::vector<StrategyRow> compare_strategies(const ModelGraph& model, std::span<const int> workers);

/// Header: model,strategy,W,total_bytes,param_bytes,activation_bytes
std::string to_csv(std::span<const StrategyRow> rows);
nlohmann::ordered_json to_json(std::span<const StrategyRow> rows);

/// The RALP split the planner would pick (find_split over the model), if one
/// leaves a nonempty back segment.
std::optional<int> planned_split(const ModelGraph& model);

}  // namespace ralp
