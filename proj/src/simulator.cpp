#include "ralp/simulator.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <tuple>

#include "ralp/error.hpp"
#include "ralp/network.hpp"

namespace ralp {

// Effective device rate and host-device copy rate. The device rate is
// calibrated so baseline PS training on the catalog spends about half of each
// step communicating; see README.
ClusterSpec ClusterSpec::testbed() {
  ClusterSpec c;
  c.machines = 8;
  c.gpus_per_machine = 4;
  c.gpu_flops_per_sec = 10.0e12;
  c.memcopy_bytes_per_sec = 12.0e9;
  c.link_bytes_per_sec = 56.0e9 / 8.0;
  c.intra_machine_bytes_per_sec = std::numeric_limits<double>::infinity();
  return c;
}

void ClusterSpec::validate() const {
  if (machines < 1) throw InvalidArgument(fmt::format("cluster needs at least one machine, got {}", machines));
  if (gpus_per_machine < 1)
    throw InvalidArgument(fmt::format("gpus_per_machine must be >= 1, got {}", gpus_per_machine));
  auto rate = [](double v, const char* what) {
    if (!(v > 0.0)) throw InvalidArgument(fmt::format("{} must be positive, got {}", what, v));
  };
  rate(gpu_flops_per_sec, "gpu_flops_per_sec");
  rate(memcopy_bytes_per_sec, "memcopy_bytes_per_sec");
  rate(link_bytes_per_sec, "link_bytes_per_sec");
  rate(intra_machine_bytes_per_sec, "intra_machine_bytes_per_sec");
}

std::string_view to_string(PlacementPolicy policy) {
  return policy == PlacementPolicy::Spread ? "spread" : "pack";
}

double JobReport::comm_fraction() const {
  const double total = mean_worker.total();
  return total > 0 ? mean_worker.communication / total : 0.0;
}

// ---------------------------------------------------------------------------
// Scenario construction

namespace {

void check_slot(const ClusterSpec& c, const Slot& s, const std::string& job) {
  if (s.machine < 0 || s.machine >= c.machines || s.gpu < 0 || s.gpu >= c.gpus_per_machine)
    throw CapacityError(fmt::format("job '{}' uses slot {}:{} outside the {}x{} cluster", job, s.machine, s.gpu,
                                    c.machines, c.gpus_per_machine));
}

int required_ps(const JobSpec& spec) { return spec.strategy.kind == StrategyKind::RingAllreduce ? 0 : spec.ps_count; }

class SlotAllocator {
 public:
  explicit SlotAllocator(const ClusterSpec& c) : cluster_(c), used_(static_cast<std::size_t>(c.total_gpus()), 0) {}

  void claim(const Slot& s, const std::string& job) {
    check_slot(cluster_, s, job);
    auto& u = used_[index(s)];
    if (u) throw CapacityError(fmt::format("slot {}:{} is claimed twice (job '{}')", s.machine, s.gpu, job));
    u = 1;
  }

  Slot next(PlacementPolicy policy, const std::string& job) {
    const int m = cluster_.machines;
    const int g = cluster_.gpus_per_machine;
    for (int k = 0; k < m * g; ++k) {
      const Slot s = policy == PlacementPolicy::Spread ? Slot{k % m, k / m} : Slot{k / g, k % g};
      if (!used_[index(s)]) {
        used_[index(s)] = 1;
        return s;
      }
    }
    throw CapacityError(fmt::format("job '{}' does not fit: all {} GPU slots are taken", job, m * g));
  }

 private:
  std::size_t index(const Slot& s) const {
    return static_cast<std::size_t>(s.machine * cluster_.gpus_per_machine + s.gpu);
  }

  const ClusterSpec& cluster_;
  std::vector<char> used_;
};

}  // namespace

void Scenario::validate() const {
  cluster.validate();
  if (steps < 1) throw InvalidArgument(fmt::format("steps must be >= 1, got {}", steps));
  if (warmup < 0) throw InvalidArgument("warmup must be nonnegative");
  if (jobs.empty()) throw InvalidArgument("scenario has no jobs");
  std::set<Slot> used;
  for (const auto& j : jobs) {
    j.spec.validate();
    if (static_cast<int>(j.placement.workers.size()) != j.spec.worker_count)
      throw InvalidArgument(fmt::format("job '{}' places {} workers but declares {}", j.name,
                                        j.placement.workers.size(), j.spec.worker_count));
    if (static_cast<int>(j.placement.ps.size()) != required_ps(j.spec))
      throw InvalidArgument(fmt::format("job '{}' places {} PS slots but needs {}", j.name, j.placement.ps.size(),
                                        required_ps(j.spec)));
    for (const auto* group : {&j.placement.ps, &j.placement.workers})
      for (const auto& s : *group) {
        check_slot(cluster, s, j.name);
        if (!used.insert(s).second)
          throw CapacityError(fmt::format("slot {}:{} is claimed twice (job '{}')", s.machine, s.gpu, j.name));
      }
  }
}

Scenario make_scenario(std::string name, ClusterSpec cluster, std::vector<JobRequest> requests, int steps,
                       int warmup) {
  cluster.validate();
  Scenario sc;
  sc.name = std::move(name);
  sc.cluster = cluster;
  sc.steps = steps;
  sc.warmup = warmup;

  int needed = 0;
  for (const auto& r : requests) needed += r.spec.worker_count + required_ps(r.spec);
  if (needed > cluster.total_gpus())
    throw CapacityError(
        fmt::format("scenario needs {} GPUs but the cluster has {}", needed, cluster.total_gpus()));

  SlotAllocator alloc(sc.cluster);
  for (const auto& r : requests) {
    if (!r.placement) continue;
    for (const auto& s : r.placement->ps) alloc.claim(s, r.name);
    for (const auto& s : r.placement->workers) alloc.claim(s, r.name);
  }
  for (auto& r : requests) {
    SimJob job{r.name, std::move(r.spec), {}, std::nullopt};
    if (r.placement) {
      job.placement = std::move(*r.placement);
    } else {
      job.policy = r.policy;
      for (int i = 0; i < required_ps(job.spec); ++i) job.placement.ps.push_back(alloc.next(r.policy, r.name));
      for (int i = 0; i < job.spec.worker_count; ++i) job.placement.workers.push_back(alloc.next(r.policy, r.name));
    }
    sc.jobs.push_back(std::move(job));
  }
  sc.validate();
  return sc;
}

// ---------------------------------------------------------------------------
// Step task graphs

namespace {

using Ticks = std::int64_t;
constexpr Ticks kNever = std::numeric_limits<Ticks>::max();

enum class TaskKind { Compute, Delay, Flow };
enum class Category { None, WorkerCompute, PsCompute, Memcopy, Communication };

struct Task {
  TaskKind kind = TaskKind::Delay;
  Category category = Category::None;
  int worker = -1;  // owning worker; -1 for shared PS work
  int group = -1;   // shared PS work: each worker is charged the longest task of a group
  int gpu = -1;
  Ticks duration = 0;
  int src = -1;
  int dst = -1;
  std::uint64_t bytes = 0;
  std::vector<int> successors;
  int deps = 0;
  // runtime
  int pending = 0;
  Ticks start = -1;
  Ticks end = -1;
};

Ticks to_ticks(double seconds_value) {
  if (std::isinf(seconds_value)) throw InvalidArgument("unbounded task duration");
  return static_cast<Ticks>(std::llround(seconds_value * 1e9));
}

class GraphBuilder {
 public:
  GraphBuilder(const ClusterSpec& c, const SimJob& job) : cluster_(c), job_(job) {}

  int compute(const Slot& slot, double flops, Category cat, int worker, int group = -1) {
    Task t;
    t.kind = TaskKind::Compute;
    t.category = cat;
    t.worker = worker;
    t.group = group;
    t.gpu = slot.machine * cluster_.gpus_per_machine + slot.gpu;
    t.duration = to_ticks(flops / cluster_.gpu_flops_per_sec);
    return add(std::move(t));
  }

  int memcopy(std::uint64_t bytes, int worker) {
    Task t;
    t.category = Category::Memcopy;
    t.worker = worker;
    t.duration = to_ticks(static_cast<double>(bytes) / cluster_.memcopy_bytes_per_sec);
    return add(std::move(t));
  }

  int marker(int worker) {
    Task t;
    t.worker = worker;
    return add(std::move(t));
  }

  int transfer(const Slot& from, const Slot& to, std::uint64_t bytes, int worker) {
    Task t;
    t.category = Category::Communication;
    t.worker = worker;
    t.bytes = bytes;
    bytes_ += bytes;
    if (from.machine == to.machine) {
      t.kind = TaskKind::Delay;
      t.duration = to_ticks(static_cast<double>(bytes) / cluster_.intra_machine_bytes_per_sec);
    } else {
      t.kind = TaskKind::Flow;
      t.src = from.machine;
      t.dst = to.machine;
      network_bytes_ += bytes;
    }
    return add(std::move(t));
  }

  void edge(int before, int after) {
    tasks_[static_cast<std::size_t>(before)].successors.push_back(after);
    ++tasks_[static_cast<std::size_t>(after)].deps;
  }

  std::vector<Task> take() { return std::move(tasks_); }
  std::uint64_t bytes() const { return bytes_; }
  std::uint64_t network_bytes() const { return network_bytes_; }

 private:
  int add(Task t) {
    tasks_.push_back(std::move(t));
    return static_cast<int>(tasks_.size()) - 1;
  }

  const ClusterSpec& cluster_;
  const SimJob& job_;
  std::vector<Task> tasks_;
  std::uint64_t bytes_ = 0;
  std::uint64_t network_bytes_ = 0;
};

struct StepTemplate {
  std::vector<Task> tasks;
  std::uint64_t bytes = 0;
  std::uint64_t network_bytes = 0;
  int workers = 0;
};

// Greedy largest-first assignment of whole layers to PS shards, the way a
// parameter-server framework places variables.
std::vector<std::uint64_t> shard_layers(const ModelGraph& model, int shards) {
  std::vector<int> order;
  for (int i = 1; i <= static_cast<int>(model.size()); ++i)
    if (model.layer(i).param_count > 0) order.push_back(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return model.layer(a).param_count > model.layer(b).param_count; });
  std::vector<std::uint64_t> load(static_cast<std::size_t>(shards), 0);
  for (int i : order) {
    auto it = std::min_element(load.begin(), load.end());
    *it += model.layer(i).param_count;
  }
  return load;  // parameter counts per shard
}

StepTemplate build_baseline(const ClusterSpec& c, const SimJob& job) {
  GraphBuilder g(c, job);
  const auto& m = job.spec.model;
  const int W = job.spec.worker_count;
  const auto& ps = job.placement.ps;
  const auto& workers = job.placement.workers;
  const auto elem = static_cast<std::uint64_t>(m.bytes_per_element());
  const auto shard_params = shard_layers(m, static_cast<int>(ps.size()));
  const double step_flops = 3.0 * static_cast<double>(m.forward_flops_per_sample(1, static_cast<int>(m.size()))) *
                            static_cast<double>(m.batch_size());
  const auto model_bytes = m.total_param_bytes();

  std::vector<std::vector<int>> push(static_cast<std::size_t>(W));
  for (int w = 0; w < W; ++w) {
    const auto& slot = workers[static_cast<std::size_t>(w)];
    const int fb = g.compute(slot, step_flops, Category::WorkerCompute, w);
    const int d2h = g.memcopy(model_bytes, w);
    g.edge(fb, d2h);
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const int p = g.transfer(slot, ps[k], shard_params[k] * elem, w);
      g.edge(d2h, p);
      push[static_cast<std::size_t>(w)].push_back(p);
    }
  }
  std::vector<int> aggregate;
  for (std::size_t k = 0; k < ps.size(); ++k) {
    const int a = g.compute(ps[k], static_cast<double>(shard_params[k]) * W, Category::PsCompute, -1, 0);
    for (int w = 0; w < W; ++w) g.edge(push[static_cast<std::size_t>(w)][k], a);
    aggregate.push_back(a);
  }
  for (int w = 0; w < W; ++w) {
    const auto& slot = workers[static_cast<std::size_t>(w)];
    const int h2d = g.memcopy(model_bytes, w);
    for (std::size_t k = 0; k < ps.size(); ++k) {
      const int pull = g.transfer(ps[k], slot, shard_params[k] * elem, w);
      g.edge(aggregate[k], pull);
      g.edge(pull, h2d);
    }
  }
  return {g.take(), g.bytes(), g.network_bytes(), W};
}

StepTemplate build_ralp(const ClusterSpec& c, const SimJob& job) {
  GraphBuilder g(c, job);
  const auto& m = job.spec.model;
  const int W = job.spec.worker_count;
  const int split = job.spec.strategy.split_index;
  const int n = static_cast<int>(m.size());
  const Slot ps = job.placement.ps.front();
  const double batch = static_cast<double>(m.batch_size());
  const double front_fwd = static_cast<double>(m.forward_flops_per_sample(1, split)) * batch;
  const double back_fwd = static_cast<double>(m.forward_flops_per_sample(split + 1, n)) * batch;
  const auto activation = m.output_bytes(split);
  const auto front_params = m.cumulative_param_bytes(split);

  std::vector<int> pushes;
  std::vector<int> back_done;
  for (int w = 0; w < W; ++w) {
    const auto& slot = job.placement.workers[static_cast<std::size_t>(w)];
    const int fwd = g.compute(slot, front_fwd, Category::WorkerCompute, w);
    const int d2h_act = g.memcopy(activation, w);
    const int send_act = g.transfer(slot, ps, activation, w);
    // The PS GPU serves one batch of activations at a time, in arrival order.
    const int back = g.compute(ps, 3.0 * back_fwd, Category::PsCompute, w);
    const int recv_grad = g.transfer(ps, slot, activation, w);
    const int h2d_grad = g.memcopy(activation, w);
    const int bwd = g.compute(slot, 2.0 * front_fwd, Category::WorkerCompute, w);
    const int d2h_params = g.memcopy(front_params, w);
    const int push = g.transfer(slot, ps, front_params, w);
    for (auto [a, b] : {std::pair{fwd, d2h_act}, {d2h_act, send_act}, {send_act, back}, {back, recv_grad},
                        {recv_grad, h2d_grad}, {h2d_grad, bwd}, {bwd, d2h_params}, {d2h_params, push}})
      g.edge(a, b);
    pushes.push_back(push);
    back_done.push_back(back);
  }
  const int aggregate =
      g.compute(ps, static_cast<double>(m.total_param_count()) * W, Category::PsCompute, -1, 0);
  for (int p : pushes) g.edge(p, aggregate);
  for (int b : back_done) g.edge(b, aggregate);
  for (int w = 0; w < W; ++w) {
    const auto& slot = job.placement.workers[static_cast<std::size_t>(w)];
    const int pull = g.transfer(ps, slot, front_params, w);
    const int h2d = g.memcopy(front_params, w);
    g.edge(aggregate, pull);
    g.edge(pull, h2d);
  }
  return {g.take(), g.bytes(), g.network_bytes(), W};
}

// Reduce-scatter then all-gather around the ring of workers in placement
// order. Chunk c of the model has S/W bytes (remainder spread over the first
// chunks), so each phase moves exactly S bytes in total.
StepTemplate build_ring(const ClusterSpec& c, const SimJob& job) {
  GraphBuilder g(c, job);
  const auto& m = job.spec.model;
  const int W = job.spec.worker_count;
  const auto& workers = job.placement.workers;
  const double step_flops = 3.0 * static_cast<double>(m.forward_flops_per_sample(1, static_cast<int>(m.size()))) *
                            static_cast<double>(m.batch_size());
  const auto S = m.total_param_bytes();

  std::vector<int> ready(static_cast<std::size_t>(W));
  for (int w = 0; w < W; ++w) {
    ready[static_cast<std::size_t>(w)] = g.compute(workers[static_cast<std::size_t>(w)], step_flops,
                                                   Category::WorkerCompute, w);
  }
  if (W == 1) return {g.take(), g.bytes(), g.network_bytes(), W};

  for (int w = 0; w < W; ++w) {
    const int d2h = g.memcopy(S, w);
    g.edge(ready[static_cast<std::size_t>(w)], d2h);
    ready[static_cast<std::size_t>(w)] = d2h;
  }
  const auto uw = static_cast<std::uint64_t>(W);
  auto chunk_bytes = [&](int chunk) { return S / uw + (static_cast<std::uint64_t>(chunk) < S % uw ? 1 : 0); };
  auto mod = [W](int v) { return ((v % W) + W) % W; };
  const double elem = static_cast<double>(m.bytes_per_element());

  for (int t = 0; t < 2 * (W - 1); ++t) {
    const bool reduce = t < W - 1;
    std::vector<int> sends(static_cast<std::size_t>(W));
    std::vector<int> chunks(static_cast<std::size_t>(W));
    for (int w = 0; w < W; ++w) {
      const int chunk = reduce ? mod(w - t) : mod(w + 1 - (t - (W - 1)));
      chunks[static_cast<std::size_t>(w)] = chunk;
      const auto& from = workers[static_cast<std::size_t>(w)];
      const auto& to = workers[static_cast<std::size_t>(mod(w + 1))];
      const int s = g.transfer(from, to, chunk_bytes(chunk), w);
      g.edge(ready[static_cast<std::size_t>(w)], s);
      sends[static_cast<std::size_t>(w)] = s;
    }
    for (int w = 0; w < W; ++w) {
      const int recv = sends[static_cast<std::size_t>(mod(w - 1))];
      const int done = g.marker(w);
      g.edge(sends[static_cast<std::size_t>(w)], done);
      if (reduce) {
        const double elems = static_cast<double>(chunk_bytes(chunks[static_cast<std::size_t>(mod(w - 1))])) / elem;
        const int add = g.compute(workers[static_cast<std::size_t>(w)], elems, Category::WorkerCompute, w);
        g.edge(recv, add);
        g.edge(ready[static_cast<std::size_t>(w)], add);
        g.edge(add, done);
      } else {
        g.edge(recv, done);
      }
      ready[static_cast<std::size_t>(w)] = done;
    }
  }
  for (int w = 0; w < W; ++w) {
    const int h2d = g.memcopy(S, w);
    g.edge(ready[static_cast<std::size_t>(w)], h2d);
  }
  return {g.take(), g.bytes(), g.network_bytes(), W};
}

StepTemplate build_step(const ClusterSpec& c, const SimJob& job) {
  switch (job.spec.strategy.kind) {
    case StrategyKind::BaselinePS: return build_baseline(c, job);
    case StrategyKind::Ralp: return build_ralp(c, job);
    case StrategyKind::RingAllreduce: return build_ring(c, job);
  }
  throw InvalidArgument("unknown strategy");
}

// ---------------------------------------------------------------------------
// Event loop

struct TaskRef {
  int job;
  int worker;
  int task;
  friend auto operator<=>(const TaskRef&, const TaskRef&) = default;
};

struct ActiveFlow {
  TaskRef ref;
  double remaining;
  double rate = 0;
  net::FlowLinks links;
};

struct JobRun {
  const SimJob* job = nullptr;
  StepTemplate tmpl;
  std::vector<Task> tasks;
  int steps_total = 0;
  int steps_done = 0;
  int outstanding = 0;
  Ticks step_start = 0;
  std::vector<StepBreakdown> breakdowns;
};

class Engine {
 public:
  Engine(const Scenario& sc, int steps_per_job) : sc_(sc) {
    sc.validate();
    gpu_busy_.assign(static_cast<std::size_t>(sc.cluster.total_gpus()), 0);
    gpu_queue_.resize(static_cast<std::size_t>(sc.cluster.total_gpus()));
    capacity_.assign(2 * static_cast<std::size_t>(sc.cluster.machines), sc.cluster.link_bytes_per_sec);
    for (const auto& j : sc.jobs) {
      JobRun run;
      run.job = &j;
      run.tmpl = build_step(sc.cluster, j);
      run.steps_total = steps_per_job;
      jobs_.push_back(std::move(run));
    }
  }

  std::vector<std::vector<StepBreakdown>> run() {
    for (int j = 0; j < static_cast<int>(jobs_.size()); ++j) begin_step(j);
    flush_ready();
    while (true) {
      const Ticks next = next_event_time();
      if (next == kNever) break;
      advance_flows(next);
      now_ = next;
      collect_completions();
      flush_ready();
    }
    for (const auto& j : jobs_)
      if (j.steps_done != j.steps_total) throw Error("simulation stalled before all steps completed");
    std::vector<std::vector<StepBreakdown>> out;
    for (auto& j : jobs_) out.push_back(std::move(j.breakdowns));
    return out;
  }

  Ticks end_time() const { return now_; }

 private:
  Task& task(const TaskRef& r) { return jobs_[static_cast<std::size_t>(r.job)].tasks[static_cast<std::size_t>(r.task)]; }

  void begin_step(int j) {
    auto& run = jobs_[static_cast<std::size_t>(j)];
    run.tasks = run.tmpl.tasks;
    run.outstanding = static_cast<int>(run.tasks.size());
    run.step_start = now_;
    for (int i = 0; i < static_cast<int>(run.tasks.size()); ++i) {
      auto& t = run.tasks[static_cast<std::size_t>(i)];
      t.pending = t.deps;
      if (t.pending == 0) ready_.push_back({j, t.worker, i});
    }
  }

  void flush_ready() {
    std::sort(ready_.begin(), ready_.end());
    bool flows_changed = false;
    for (const auto& r : ready_) {
      auto& t = task(r);
      switch (t.kind) {
        case TaskKind::Delay:
          t.start = now_;
          timed_.push({now_ + t.duration, r});
          break;
        case TaskKind::Compute:
          gpu_queue_[static_cast<std::size_t>(t.gpu)].push_back(r);
          break;
        case TaskKind::Flow:
          t.start = now_;
          if (t.bytes == 0 || std::isinf(sc_.cluster.link_bytes_per_sec)) {
            timed_.push({now_, r});
          } else {
            ActiveFlow f{r, static_cast<double>(t.bytes), 0.0, {}};
            f.links.links = {net::uplink(t.src), net::downlink(t.dst)};
            flows_.push_back(f);
            flows_changed = true;
          }
          break;
      }
    }
    ready_.clear();
    for (std::size_t gpu = 0; gpu < gpu_queue_.size(); ++gpu) {
      auto& q = gpu_queue_[gpu];
      if (gpu_busy_[gpu] || q.empty()) continue;
      const auto r = q.front();
      q.pop_front();
      auto& t = task(r);
      t.start = now_;
      gpu_busy_[gpu] = 1;
      timed_.push({now_ + t.duration, r});
    }
    if (flows_changed) recompute_rates();
  }

  void recompute_rates() {
    std::vector<net::FlowLinks> links;
    links.reserve(flows_.size());
    for (const auto& f : flows_) links.push_back(f.links);
    const auto rates = net::max_min_rates(capacity_, links);
    for (std::size_t i = 0; i < flows_.size(); ++i) flows_[i].rate = rates[i];
  }

  Ticks flow_finish(const ActiveFlow& f) const {
    if (std::isinf(f.rate)) return now_;
    if (f.rate <= 0) return kNever;
    return now_ + static_cast<Ticks>(std::ceil(f.remaining / f.rate * 1e9));
  }

  Ticks next_event_time() const {
    Ticks next = timed_.empty() ? kNever : timed_.top().first;
    for (const auto& f : flows_) next = std::min(next, flow_finish(f));
    return next;
  }

  void advance_flows(Ticks until) {
    const double dt = static_cast<double>(until - now_) * 1e-9;
    for (auto& f : flows_) f.remaining = std::isinf(f.rate) ? 0.0 : f.remaining - f.rate * dt;
  }

  void collect_completions() {
    std::vector<TaskRef> done;
    while (!timed_.empty() && timed_.top().first == now_) {
      done.push_back(timed_.top().second);
      timed_.pop();
    }
    const auto before = flows_.size();
    std::erase_if(flows_, [&](const ActiveFlow& f) {
      const double eps = 1e-9 * static_cast<double>(task(f.ref).bytes) + 1e-6;
      if (f.remaining > eps) return false;
      done.push_back(f.ref);
      return true;
    });
    if (flows_.size() != before) recompute_rates();
    std::sort(done.begin(), done.end());
    for (const auto& r : done) finish(r);
  }

  void finish(const TaskRef& r) {
    auto& run = jobs_[static_cast<std::size_t>(r.job)];
    auto& t = task(r);
    t.end = now_;
    if (t.kind == TaskKind::Compute) gpu_busy_[static_cast<std::size_t>(t.gpu)] = 0;
    for (int s : t.successors) {
      auto& succ = run.tasks[static_cast<std::size_t>(s)];
      if (--succ.pending == 0) ready_.push_back({r.job, succ.worker, s});
    }
    if (--run.outstanding == 0) {
      run.breakdowns.push_back(summarize(run));
      if (++run.steps_done < run.steps_total) begin_step(r.job);
    }
  }

  StepBreakdown summarize(const JobRun& run) const {
    StepBreakdown b;
    b.start = SimDuration(run.step_start);
    b.bytes_transferred = run.tmpl.bytes;
    b.network_bytes = run.tmpl.network_bytes;
    const auto W = static_cast<std::size_t>(run.tmpl.workers);
    std::vector<Ticks> cat[4];
    for (auto& v : cat) v.assign(W, 0);
    std::vector<Ticks> last(W, run.step_start);
    std::vector<Ticks> group_max;
    for (const auto& t : run.tasks) {
      const Ticks d = t.end - t.start;
      if (t.worker < 0) {
        if (t.group >= 0) {
          if (group_max.size() <= static_cast<std::size_t>(t.group)) group_max.resize(static_cast<std::size_t>(t.group) + 1, 0);
          group_max[static_cast<std::size_t>(t.group)] = std::max(group_max[static_cast<std::size_t>(t.group)], d);
        }
        continue;
      }
      const auto w = static_cast<std::size_t>(t.worker);
      last[w] = std::max(last[w], t.end);
      switch (t.category) {
        case Category::WorkerCompute: cat[0][w] += d; break;
        case Category::PsCompute: cat[1][w] += d; break;
        case Category::Memcopy: cat[2][w] += d; break;
        default: break;
      }
    }
    const Ticks shared_ps = std::accumulate(group_max.begin(), group_max.end(), Ticks{0});
    Ticks sum = 0;
    for (std::size_t w = 0; w < W; ++w) {
      WorkerTimes wt;
      wt.worker_computation = SimDuration(cat[0][w]);
      wt.ps_computation = SimDuration(cat[1][w] + shared_ps);
      wt.memcopy = SimDuration(cat[2][w]);
      wt.step = SimDuration(last[w] - run.step_start);
      wt.communication = wt.step - wt.worker_computation - wt.ps_computation - wt.memcopy;
      if (wt.communication.count() < 0) throw Error("category accounting exceeded the worker's step time");
      b.max_step_time = std::max(b.max_step_time, wt.step);
      sum += wt.step.count();
      b.workers.push_back(wt);
    }
    b.avg_step_seconds = static_cast<double>(sum) / static_cast<double>(W) * 1e-9;
    // Barrier: the step ends when every task, including PS work, is done.
    b.max_step_time = std::max(b.max_step_time, SimDuration(now_ - run.step_start));
    return b;
  }

  const Scenario& sc_;
  Ticks now_ = 0;
  std::vector<JobRun> jobs_;
  std::vector<TaskRef> ready_;
  std::priority_queue<std::pair<Ticks, TaskRef>, std::vector<std::pair<Ticks, TaskRef>>, std::greater<>> timed_;
  std::vector<std::deque<TaskRef>> gpu_queue_;
  std::vector<char> gpu_busy_;
  std::vector<double> capacity_;
  std::vector<ActiveFlow> flows_;
};

CategorySeconds to_seconds(const WorkerTimes& w) {
  return {seconds(w.worker_computation), seconds(w.ps_computation), seconds(w.memcopy), seconds(w.communication)};
}

void accumulate(CategorySeconds& into, const CategorySeconds& v, double weight) {
  into.worker_computation += v.worker_computation * weight;
  into.ps_computation += v.ps_computation * weight;
  into.memcopy += v.memcopy * weight;
  into.communication += v.communication * weight;
}

}  // namespace

std::vector<StepBreakdown> simulate_step(const Scenario& scenario) {
  Engine engine(scenario, 1);
  auto per_job = engine.run();
  std::vector<StepBreakdown> out;
  for (auto& steps : per_job) out.push_back(std::move(steps.front()));
  return out;
}

SimReport simulate_run(const Scenario& scenario) {
  Engine engine(scenario, scenario.warmup + scenario.steps);
  auto per_job = engine.run();
  SimReport report;
  report.scenario = scenario.name;
  report.simulated_seconds = static_cast<double>(engine.end_time()) * 1e-9;
  for (std::size_t j = 0; j < scenario.jobs.size(); ++j) {
    const auto& job = scenario.jobs[j];
    JobReport r;
    r.name = job.name;
    r.strategy = job.spec.strategy;
    r.workers = job.spec.worker_count;
    r.ps = static_cast<int>(job.placement.ps.size());
    r.batch_size = job.spec.model.batch_size();
    r.steps.assign(std::make_move_iterator(per_job[j].begin() + scenario.warmup),
                   std::make_move_iterator(per_job[j].end()));
    const double n_steps = static_cast<double>(r.steps.size());
    double step_sum = 0;
    for (const auto& s : r.steps) {
      step_sum += seconds(s.max_step_time);
      const WorkerTimes* slowest = &s.workers.front();
      for (const auto& w : s.workers) {
        accumulate(r.mean_worker, to_seconds(w), 1.0 / (n_steps * static_cast<double>(s.workers.size())));
        if (w.step > slowest->step) slowest = &w;
      }
      accumulate(r.mean_slowest, to_seconds(*slowest), 1.0 / n_steps);
    }
    r.avg_step_seconds = step_sum / n_steps;
    r.images_per_sec =
        static_cast<double>(r.workers) * static_cast<double>(r.batch_size) / r.avg_step_seconds;
    r.bytes_on_wire_per_step = r.steps.front().bytes_transferred;
    r.network_bytes_per_step = r.steps.front().network_bytes;
    report.jobs.push_back(std::move(r));
  }
  return report;
}

ConsolidationReport simulate_consolidation(const Scenario& base, int copies) {
  if (copies < 1) throw InvalidArgument(fmt::format("copies must be >= 1, got {}", copies));
  std::vector<JobRequest> requests;
  for (int k = 0; k < copies; ++k) {
    for (const auto& j : base.jobs) {
      JobRequest r{copies == 1 ? j.name : fmt::format("{}#{}", j.name, k), j.spec, std::nullopt,
                   PlacementPolicy::Spread};
      if (j.policy) {
        r.policy = *j.policy;
      } else if (copies == 1) {
        r.placement = j.placement;
      } else {
        throw CapacityError(
            fmt::format("job '{}' has explicit slots and cannot be replicated", j.name));
      }
      requests.push_back(std::move(r));
    }
  }
  const auto consolidated =
      make_scenario(fmt::format("{} x{}", base.name, copies), base.cluster, std::move(requests), base.steps,
                    base.warmup);
  ConsolidationReport out;
  out.isolated = simulate_run(base);
  out.consolidated = simulate_run(consolidated);
  for (std::size_t i = 0; i < out.consolidated.jobs.size(); ++i) {
    const auto& iso = out.isolated.jobs[i % base.jobs.size()];
    out.slowdown.push_back(out.consolidated.jobs[i].avg_step_seconds / iso.avg_step_seconds);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::ordered_json categories_json(const CategorySeconds& c) {
  nlohmann::ordered_json j;
  j["worker_computation"] = c.worker_computation;
  j["ps_computation"] = c.ps_computation;
  j["memcopy"] = c.memcopy;
  j["communication"] = c.communication;
  return j;
}

}  // namespace

nlohmann::ordered_json to_json(const SimReport& report) {
  nlohmann::ordered_json j;
  j["scenario"] = report.scenario;
  j["simulated_seconds"] = report.simulated_seconds;
  auto& jobs = j["jobs"] = nlohmann::ordered_json::array();
  for (const auto& r : report.jobs) {
    nlohmann::ordered_json jr;
    jr["name"] = r.name;
    jr["strategy"] = std::string(to_string(r.strategy.kind));
    if (r.strategy.kind == StrategyKind::Ralp) jr["split_index"] = r.strategy.split_index;
    jr["workers"] = r.workers;
    jr["ps"] = r.ps;
    jr["batch_size"] = r.batch_size;
    jr["steps"] = r.steps.size();
    jr["avg_step_seconds"] = r.avg_step_seconds;
    jr["images_per_sec"] = r.images_per_sec;
    jr["comm_fraction"] = r.comm_fraction();
    jr["bytes_on_wire_per_step"] = r.bytes_on_wire_per_step;
    jr["network_bytes_per_step"] = r.network_bytes_per_step;
    jr["breakdown_avg"] = categories_json(r.mean_worker);
    jr["breakdown_slowest"] = categories_json(r.mean_slowest);
    jobs.push_back(std::move(jr));
  }
  return j;
}

nlohmann::ordered_json to_json(const ConsolidationReport& report) {
  nlohmann::ordered_json j;
  j["isolated"] = to_json(report.isolated);
  j["consolidated"] = to_json(report.consolidated);
  j["slowdown"] = report.slowdown;
  return j;
}

std::string timeline_csv(const SimReport& report) {
  std::string out =
      "job,step,start_s,worker,step_s,worker_computation_s,ps_computation_s,memcopy_s,communication_s\n";
  for (const auto& r : report.jobs) {
    for (std::size_t s = 0; s < r.steps.size(); ++s) {
      const auto& b = r.steps[s];
      for (std::size_t w = 0; w < b.workers.size(); ++w) {
        const auto& t = b.workers[w];
        out += fmt::format("{},{},{:.9f},{},{:.9f},{:.9f},{:.9f},{:.9f},{:.9f}\n", r.name, s, seconds(b.start), w,
                           seconds(t.step), seconds(t.worker_computation), seconds(t.ps_computation),
                           seconds(t.memcopy), seconds(t.communication));
      }
    }
  }
  return out;
}

}  // namespace ralp
