#include "ralp/costmodel.hpp"

#include <fmt/format.h>

#include "ralp/error.hpp"
#include "ralp/profiler.hpp"

namespace ralp {

namespace {

void require_workers(int workers) {
  if (workers < 1) throw InvalidArgument(fmt::format("worker count must be >= 1, got {}", workers));
}

std::uint64_t u64(std::int64_t v) { return static_cast<std::uint64_t>(v); }

}  // namespace

std::string_view to_string(StrategyKind kind) {
  switch (kind) {
    case StrategyKind::BaselinePS: return "baseline";
    case StrategyKind::Ralp: return "ralp";
    case StrategyKind::RingAllreduce: return "ring";
  }
  return "?";
}

void JobSpec::validate() const {
  require_workers(worker_count);
  switch (strategy.kind) {
    case StrategyKind::BaselinePS:
      if (ps_count < 1) throw InvalidArgument("baseline parameter-server job needs at least one PS");
      break;
    case StrategyKind::Ralp:
      if (ps_count != 1) throw InvalidArgument(fmt::format("RALP runs with exactly one PS, got {}", ps_count));
      if (strategy.split_index < 1 || static_cast<std::size_t>(strategy.split_index) >= model.size())
        throw InvalidArgument(fmt::format("RALP split {} out of range 1..{}", strategy.split_index,
                                          model.size() - 1));
      break;
    case StrategyKind::RingAllreduce:
      if (ps_count != 0) throw InvalidArgument("ring-allreduce jobs have no PS");
      break;
  }
}

StrategyVolumes volume_baseline(const ModelGraph& model, int workers) {
  require_workers(workers);
  StrategyVolumes v;
  v.per_worker_bytes = 2 * model.total_param_bytes();
  v.parameter_sync_bytes = v.per_worker_bytes * u64(workers);
  v.total_bytes = v.parameter_sync_bytes;
  return v;
}

StrategyVolumes volume_ring(const ModelGraph& model, int workers) {
  require_workers(workers);
  StrategyVolumes v;
  v.parameter_sync_bytes = 2 * model.total_param_bytes() * u64(workers - 1);
  v.total_bytes = v.parameter_sync_bytes;
  // Each worker sends 2(W-1) chunks of S/W; integer chunking makes this exact
  // only on average.
  v.per_worker_bytes = v.total_bytes / u64(workers);
  return v;
}

StrategyVolumes volume_ralp(const ModelGraph& model, int split_index, int workers) {
  require_workers(workers);
  if (split_index < 1 || static_cast<std::size_t>(split_index) >= model.size())
    throw InvalidArgument(
        fmt::format("RALP split {} out of range 1..{}", split_index, static_cast<int>(model.size()) - 1));
  const auto activation = 2 * model.output_bytes(split_index);
  const auto params = 2 * model.cumulative_param_bytes(split_index);
  StrategyVolumes v;
  v.per_worker_bytes = activation + params;
  v.activation_bytes = activation * u64(workers);
  v.parameter_sync_bytes = params * u64(workers);
  v.total_bytes = v.activation_bytes + v.parameter_sync_bytes;
  return v;
}

StrategyVolumes volumes_for(const JobSpec& job) {
  switch (job.strategy.kind) {
    case StrategyKind::BaselinePS: return volume_baseline(job.model, job.worker_count);
    case StrategyKind::Ralp: return volume_ralp(job.model, job.strategy.split_index, job.worker_count);
    case StrategyKind::RingAllreduce: return volume_ring(job.model, job.worker_count);
  }
  return {};
}

ComputeLoad compute_load(const ModelGraph& model, std::optional<int> split_index, int workers) {
  require_workers(workers);
  const auto n = static_cast<int>(model.size());
  const auto batch = u64(model.batch_size());
  ComputeLoad load;
  if (!split_index) {
    load.worker_flops_per_step = 3 * model.forward_flops_per_sample(1, n) * batch;
    load.ps_flops_per_step = model.total_param_count() * u64(workers);
    return load;
  }
  if (*split_index < 1 || *split_index > n)
    throw InvalidArgument(fmt::format("split {} out of range 1..{}", *split_index, n));
  load.worker_flops_per_step = 3 * model.forward_flops_per_sample(1, *split_index) * batch;
  load.ps_flops_per_step = 3 * model.forward_flops_per_sample(*split_index + 1, n) * batch * u64(workers);
  return load;
}

GpuAccounting baseline_accounting(int gpus) { return {"baseline", gpus / 2, gpus / 2}; }
GpuAccounting ring_accounting(int gpus) { return {"ring", gpus, 0}; }
GpuAccounting ralp_h_accounting(int gpus) { return {"ralp-h", gpus / 2, 1}; }
GpuAccounting ralp_n_accounting(int gpus) { return {"ralp-n", gpus - 1, 1}; }

std::optional<int> planned_split(const ModelGraph& model) {
  const auto p = model.param_bytes_series();
  const auto o = model.output_bytes_series();
  const auto k = model.kinds();
  const auto split = find_split(p, o, k);
  if (!split.split_index || static_cast<std::size_t>(*split.split_index) >= model.size()) return std::nullopt;
  return split.split_index;
}

std::vector<StrategyRow> compare_strategies(const ModelGraph& model, std::span<const int> workers,
                                            std::span<const StrategyKind> strategies) {
  if (workers.empty()) throw InvalidArgument("compare_strategies needs at least one worker count");
  const auto split = planned_split(model);
  std::vector<StrategyRow> rows;
  for (auto kind : strategies) {
    for (int w : workers) {
      StrategyRow row;
      row.model = model.name();
      row.strategy = kind;
      row.workers = w;
      switch (kind) {
        case StrategyKind::BaselinePS:
          row.volumes = volume_baseline(model, w);
          row.gpus = 2 * w;
          break;
        case StrategyKind::RingAllreduce:
          row.volumes = volume_ring(model, w);
          row.gpus = w;
          break;
        case StrategyKind::Ralp:
          row.gpus = w + 1;
          row.split_index = split;
          if (split) {
            row.volumes = volume_ralp(model, *split, w);
          } else {
            row.fallback = true;
            row.volumes = volume_baseline(model, w);
          }
          break;
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::vector<StrategyRow> compare_strategies(const ModelGraph& model, std::span<const int> workers) {
  static constexpr StrategyKind all[] = {StrategyKind::BaselinePS, StrategyKind::RingAllreduce, StrategyKind::Ralp};
  return compare_strategies(model, workers, all);
}

std::string to_csv(std::span<const StrategyRow> rows) {
  std::string out = "model,strategy,W,total_bytes,param_bytes,activation_bytes\n";
  for (const auto& r : rows)
    out += fmt::format("{},{},{},{},{},{}\n", r.model, to_string(r.strategy), r.workers, r.volumes.total_bytes,
                       r.volumes.parameter_sync_bytes, r.volumes.activation_bytes);
  return out;
}

nlohmann::ordered_json to_json(std::span<const StrategyRow> rows) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["model"] = r.model;
    j["strategy"] = std::string(to_string(r.strategy));
    j["W"] = r.workers;
    j["gpus"] = r.gpus;
    j["total_bytes"] = r.volumes.total_bytes;
    j["param_bytes"] = r.volumes.parameter_sync_bytes;
    j["activation_bytes"] = r.volumes.activation_bytes;
    j["per_worker_bytes"] = r.volumes.per_worker_bytes;
    j["total_gib"] = to_gib(r.volumes.total_bytes);
    if (r.strategy == StrategyKind::Ralp) {
      j["split_index"] = r.split_index ? nlohmann::ordered_json(*r.split_index) : nlohmann::ordered_json(nullptr);
      j["fallback"] = r.fallback;
    }
    arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace ralp
