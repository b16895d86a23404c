#include "ralp/parallel.hpp"

#include <omp.h>

#include <exception>
#include <optional>

namespace ralp {

namespace {

template <class Out, class In, class F>
std::vector<Out> map_serial(std::span<const In> in, F f) {
  std::vector<Out> out;
  out.reserve(in.size());
  for (const auto& x : in) out.push_back(f(x));
  return out;
}

// Results go to preallocated slots so ordering never depends on scheduling.
template <class Out, class In, class F>
std::vector<Out> map_parallel(std::span<const In> in, F f) {
  const auto n = static_cast<std::ptrdiff_t>(in.size());
  std::vector<std::optional<Out>> slots(in.size());
  std::vector<std::exception_ptr> errors(in.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      slots[k].emplace(f(in[k]));
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<Out> out;
  out.reserve(in.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

SplitResult solve(const SplitProblem& p) { return find_split(p.param_bytes, p.output_bytes, p.kinds); }

}  // namespace

std::vector<ProfileReport> profile_many(std::span<const ModelGraph> models, const ProfilerConfig& config) {
  return map_parallel<ProfileReport>(models, [&](const ModelGraph& m) { return profile(m, config); });
}

std::vector<ProfileReport> profile_many_serial(std::span<const ModelGraph> models, const ProfilerConfig& config) {
  return map_serial<ProfileReport>(models, [&](const ModelGraph& m) { return profile(m, config); });
}

std::vector<SplitResult> find_split_many(std::span<const SplitProblem> problems) {
  return map_parallel<SplitResult>(problems, solve);
}

std::vector<SplitResult> find_split_many_serial(std::span<const SplitProblem> problems) {
  return map_serial<SplitResult>(problems, solve);
}

std::vector<SimReport> simulate_many(std::span<const Scenario> scenarios) {
  return map_parallel<SimReport>(scenarios, simulate_run);
}

std::vector<SimReport> simulate_many_serial(std::span<const Scenario> scenarios) {
  return map_serial<SimReport>(scenarios, simulate_run);
}

int parallel_threads() { return omp_get_max_threads(); }

}  // namespace ralp
