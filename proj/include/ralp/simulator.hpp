#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ralp/costmodel.hpp"

namespace ralp {

/// Simulated time. Integer ticks keep the per-category accounting exact.
using SimDuration = std::chrono::nanoseconds;

inline double seconds(SimDuration d) { return std::chrono::duration<double>(d).count(); }

struct ClusterSpec {
  int machines = 8;
  int gpus_per_machine = 4;
  double gpu_flops_per_sec = 0;      // effective per-device rate
  double memcopy_bytes_per_sec = 0;  // host <-> device
  double link_bytes_per_sec = 0;     // per machine, each direction
  double intra_machine_bytes_per_sec = 0;

  /// 8 machines x 4 GPUs on a 56 Gbps fabric, with the calibrated effective
  /// device rate.
  static ClusterSpec testbed();

  int total_gpus() const { return machines * gpus_per_machine; }
  /// Throws InvalidArgument for nonpositive counts or rates (infinite rates
  /// are allowed).
  void validate() const;
};

struct Slot {
  int machine = 0;
  int gpu = 0;
  friend auto operator<=>(const Slot&, const Slot&) = default;
};

struct Placement {
  std::vector<Slot> ps;
  std::vector<Slot> workers;
  friend bool operator==(const Placement&, const Placement&) = default;
};

enum class PlacementPolicy {
  // Round-robin over machines: slot order m0g0, m1g0, ..., m0g1, ...
  Spread,
  // Fill one machine before the next.
  Pack,
};

std::string_view to_string(PlacementPolicy policy);

struct SimJob {
  std::string name;
  JobSpec spec;
  Placement placement;
  std::optional<PlacementPolicy> policy;  // set when the placement was allocated, not given
};

/// A job before placement.
struct JobRequest {
  std::string name;
  JobSpec spec;
  std::optional<Placement> placement;  // explicit slots; otherwise allocated with `policy`
  PlacementPolicy policy = PlacementPolicy::Spread;
};

struct Scenario {
  std::string name;
  ClusterSpec cluster;
  std::vector<SimJob> jobs;
  int steps = 1;
  int warmup = 0;

  /// Throws InvalidArgument / CapacityError.
  void validate() const;
};

/// Allocates placements (explicit slots first, then policy jobs in order) and
/// validates. Throws CapacityError when a job does not fit or a slot is
/// claimed twice.
Scenario make_scenario(std::string name, ClusterSpec cluster, std::vector<JobRequest> jobs, int steps,
                       int warmup = 0);

struct WorkerTimes {
  SimDuration worker_computation{0};
  SimDuration ps_computation{0};
  SimDuration memcopy{0};
  SimDuration communication{0};
  SimDuration step{0};  // from step start to this worker's last task
};

struct StepBreakdown {
  SimDuration start{0};
  std::vector<WorkerTimes> workers;
  double avg_step_seconds = 0;  // mean over workers
  SimDuration max_step_time{0};  // slowest worker; the job's barrier-to-barrier time
  std::uint64_t bytes_transferred = 0;  // worker<->PS and ring traffic, any tier
  std::uint64_t network_bytes = 0;      // the part that crossed machines
};

struct CategorySeconds {
  double worker_computation = 0;
  double ps_computation = 0;
  double memcopy = 0;
  double communication = 0;
  double total() const { return worker_computation + ps_computation + memcopy + communication; }
};

struct JobReport {
  std::string name;
  Strategy strategy;
  int workers = 0;
  int ps = 0;
  std::int64_t batch_size = 0;
  std::vector<StepBreakdown> steps;  // measured steps (after warmup)
  double avg_step_seconds = 0;       // mean over measured steps of the slowest worker
  double images_per_sec = 0;         // workers * batch / avg_step_seconds
  std::uint64_t bytes_on_wire_per_step = 0;
  std::uint64_t network_bytes_per_step = 0;
  CategorySeconds mean_worker;   // averaged over workers and steps
  CategorySeconds mean_slowest;  // averaged over steps, slowest worker of each step
  double comm_fraction() const;
};

struct SimReport {
  std::string scenario;
  std::vector<JobReport> jobs;
  double simulated_seconds = 0;
};

/// One synchronous step of every job, all starting at t=0.
std::vector<StepBreakdown> simulate_step(const Scenario& scenario);

/// `warmup + steps` consecutive steps per job; jobs advance independently
/// and contend only on network links.
SimReport simulate_run(const Scenario& scenario);

struct ConsolidationReport {
  SimReport isolated;
  SimReport consolidated;
  /// One entry per consolidated job: its avg step time over that of the
  /// matching isolated job.
  std::vector<double> slowdown;
};

/// Runs `base` as is, then `copies` replicas of its jobs placed with the same
/// policies on the same cluster. Throws CapacityError when they do not fit.
ConsolidationReport simulate_consolidation(const Scenario& base, int copies);

nlohmann::ordered_json to_json(const SimReport& report);
nlohmann::ordered_json to_json(const ConsolidationReport& report);
/// job,step,start_s,worker,step_s,worker_computation_s,ps_computation_s,memcopy_s,communication_s
std::string timeline_csv(const SimReport& report);

}  // namespace ralp
