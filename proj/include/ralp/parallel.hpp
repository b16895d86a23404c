#pragma once

#include <span>
#include <vector>

#include "ralp/profiler.hpp"
#include "ralp/simulator.hpp"

namespace ralp {

/// Inputs to one find_split call.
struct SplitProblem {
  std::vector<double> param_bytes;
  std::vector<double> output_bytes;
  std::vector<LayerKind> kinds;
};

// Batch entry points. The OpenMP versions return results in input order and
// are equal element for element to the serial ones. When several items throw,
// the exception of the lowest index is rethrown.

std::vector<ProfileReport> profile_many(std::span<const ModelGraph> models, const ProfilerConfig& config = {});
std::vector<ProfileReport> profile_many_serial(std::span<const ModelGraph> models,
                                               const ProfilerConfig& config = {});

std::vector<SplitResult> find_split_many(std::span<const SplitProblem> problems);
std::vector<SplitResult> find_split_many_serial(std::span<const SplitProblem> problems);

std::vector<SimReport> simulate_many(std::span<const Scenario> scenarios);
std::vector<SimReport> simulate_many_serial(std::span<const Scenario> scenarios);

/// Threads the OpenMP versions will use.
int parallel_threads();

}  // namespace ralp
