#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ralp/catalog.hpp"
#include "ralp/costmodel.hpp"
#include "ralp/error.hpp"
#include "ralp/simulator.hpp"
#include "support.hpp"

using namespace ralp;
using testutil::block_chain;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ClusterSpec unit_cluster(int machines = 2, int gpus = 4) {
  ClusterSpec c;
  c.machines = machines;
  c.gpus_per_machine = gpus;
  c.gpu_flops_per_sec = 1e9;
  c.memcopy_bytes_per_sec = kInf;
  c.link_bytes_per_sec = 1e9;
  c.intra_machine_bytes_per_sec = kInf;
  return c;
}

Scenario one_job(ClusterSpec c, JobSpec spec, int steps = 1, PlacementPolicy p = PlacementPolicy::Spread) {
  return make_scenario("t", c, {JobRequest{"j", std::move(spec), std::nullopt, p}}, steps);
}

std::int64_t ns(SimDuration d) { return d.count(); }

}  // namespace

TEST(Simulator, SingleResourceExact) {
  // Ring with one worker: compute only.
  const auto m = block_chain({{10, 4, 1'000'000}, {10, 4, 2'000'000}}, 2);
  const auto steps = simulate_step(one_job(unit_cluster(), {m, Strategy::ring(), 1, 0}));
  const double flops = 3.0 * 3'000'000 * 2;
  ASSERT_EQ(steps.size(), 1u);
  const auto& w = steps[0].workers.at(0);
  EXPECT_EQ(ns(w.worker_computation), std::llround(flops / 1e9 * 1e9));
  EXPECT_EQ(w.step, w.worker_computation);
  EXPECT_EQ(ns(w.communication), 0);
  EXPECT_EQ(steps[0].bytes_transferred, 0u);
}

TEST(Simulator, InfiniteLinkNoCommunication) {
  auto c = unit_cluster(4, 2);
  c.link_bytes_per_sec = kInf;
  c.memcopy_bytes_per_sec = 1e9;
  const auto m = block_chain({{1000, 4, 1'000'000}, {50'000, 4, 2'000'000}}, 2);
  const auto ring = simulate_step(one_job(c, {m, Strategy::ring(), 4, 0}));
  for (const auto& w : ring[0].workers) {
    EXPECT_EQ(ns(w.communication), 0);
    EXPECT_EQ(w.step, w.worker_computation + w.memcopy);
  }
  EXPECT_EQ(ring[0].max_step_time, ring[0].workers[0].worker_computation + ring[0].workers[0].memcopy);
  const auto b = simulate_step(one_job(c, {m, Strategy::baseline(), 3, 2}));
  for (const auto& w : b[0].workers) EXPECT_EQ(ns(w.communication), 0);
  // RALP: the PS serves back segments one at a time, so with free links the only
  // non-compute time is the queue/barrier wait: (W - 1) back-segment runs.
  const auto r = simulate_step(one_job(c, {m, Strategy::ralp(1), 3, 1}));
  const auto back = compute_load(m, 1, 1).ps_flops_per_step / c.gpu_flops_per_sec;
  for (const auto& w : r[0].workers) EXPECT_NEAR(seconds(w.communication), 2 * back, 1e-8);
}

TEST(Simulator, TwoFlowsShareLink) {
  // One worker + one PS per job, workers on machine 1 and PSes on machine 0.
  // Each push and pull is B bytes; two jobs share both links.
  const std::uint64_t params = 250'000'000;  // B = 1e9 bytes at 4 bytes each
  const auto m = block_chain({{params, 1, 0}, {0, 1, 0}});
  auto c = unit_cluster();
  c.gpu_flops_per_sec = kInf;
  const auto single = one_job(c, {m, Strategy::baseline(), 1, 1});
  const auto iso = simulate_step(single);
  EXPECT_EQ(ns(iso[0].max_step_time), 2'000'000'000);  // B/L each way
  const auto two = simulate_consolidation(single, 2);
  ASSERT_EQ(two.slowdown.size(), 2u);
  for (const auto& j : two.consolidated.jobs) EXPECT_EQ(ns(j.steps[0].max_step_time), 4'000'000'000);  // 2B/L each way
  EXPECT_DOUBLE_EQ(two.slowdown[0], 2.0);
  for (int k : {3, 4}) {
    const auto r = simulate_consolidation(single, k);
    for (double s : r.slowdown) EXPECT_DOUBLE_EQ(s, k);
  }
}

TEST(Simulator, RalpPsServesOneBatchAtATime) {
  auto c = unit_cluster(4, 1);
  c.link_bytes_per_sec = kInf;
  const auto m = block_chain({{100, 8, 1'000'000}, {100, 8, 4'000'000}});
  const auto steps = simulate_step(one_job(c, {m, Strategy::ralp(1), 3, 1}));
  const std::int64_t fwd = 1'000'000, back = 3 * 4'000'000, bwd = 2'000'000, agg = 3 * 200;
  EXPECT_EQ(ns(steps[0].max_step_time), fwd + 3 * back + bwd + agg);
  std::vector<std::int64_t> finish;
  for (const auto& w : steps[0].workers) {
    EXPECT_EQ(ns(w.ps_computation), back + agg);
    finish.push_back(ns(w.step));
  }
  EXPECT_EQ(finish[0], finish[1]);  // the barrier before the pull aligns everyone
}

TEST(Simulator, WireBytesMatchCostModel) {
  for (const auto& name : catalog_names()) {
    const auto m = catalog_lookup(name);
    std::vector<JobSpec> specs{{m, Strategy::baseline(), 4, 3}, {m, Strategy::ring(), 5, 0}};
    if (auto s = planned_split(m)) specs.push_back({m, Strategy::ralp(*s), 6, 1});
    for (const auto& spec : specs) {
      const auto r = simulate_run(one_job(ClusterSpec::testbed(), spec));
      EXPECT_EQ(r.jobs[0].bytes_on_wire_per_step, volumes_for(spec).total_bytes) << name;
    }
  }
}

TEST(Simulator, RandomScenarioConservation) {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 60; ++t) {
    const auto sc = testutil::random_scenario(rng);
    const auto r = simulate_run(sc);
    ASSERT_EQ(r.jobs.size(), sc.jobs.size());
    for (std::size_t j = 0; j < r.jobs.size(); ++j) {
      const auto& job = r.jobs[j];
      EXPECT_EQ(job.bytes_on_wire_per_step, volumes_for(sc.jobs[j].spec).total_bytes);
      for (const auto& s : job.steps) {
        double sum = 0;
        for (const auto& w : s.workers) {
          EXPECT_EQ(w.worker_computation + w.ps_computation + w.memcopy + w.communication, w.step);
          EXPECT_GE(ns(w.communication), 0);
          EXPECT_LE(w.step, s.max_step_time);
          sum += seconds(w.step);
        }
        EXPECT_GE(seconds(s.max_step_time) + 1e-12, sum / static_cast<double>(s.workers.size()));
      }
      EXPECT_NEAR(job.images_per_sec,
                  static_cast<double>(job.workers * job.batch_size) / job.avg_step_seconds, 1e-9 * job.images_per_sec);
    }
  }
}

TEST(Simulator, Deterministic) {
  std::mt19937_64 rng(8);
  for (int t = 0; t < 10; ++t) {
    const auto sc = testutil::random_scenario(rng);
    const auto a = simulate_run(sc);
    const auto b = simulate_run(sc);
    EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
    EXPECT_EQ(timeline_csv(a), timeline_csv(b));
  }
}

TEST(Simulator, MonotoneInBandwidth) {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 40; ++t) {
    auto sc = testutil::random_scenario(rng);
    const auto fast = simulate_run(sc);
    sc.cluster.link_bytes_per_sec *= 0.5;
    const auto slow = simulate_run(sc);
    for (std::size_t j = 0; j < fast.jobs.size(); ++j)
      EXPECT_GE(slow.jobs[j].avg_step_seconds, fast.jobs[j].avg_step_seconds) << "case " << t << " job " << j;
  }
}

TEST(Simulator, RalpDominatesUnderSkew) {
  const auto c = ClusterSpec::testbed();
  int checked = 0;
  for (const auto& name : catalog_names()) {
    const auto m = catalog_lookup(name);
    const auto s = planned_split(m);
    if (!s) continue;
    const auto back = m.total_param_bytes() - m.cumulative_param_bytes(*s);
    if (2 * back <= m.total_param_bytes() || m.output_bytes(*s) >= back) continue;
    for (int w : {2, 4, 7}) {
      std::vector<Slot> workers;
      for (int i = 0; i < w; ++i) workers.push_back({1 + i, 0});
      const Placement pl{{{0, 0}}, workers};
      auto run = [&](Strategy st) {
        return simulate_run(make_scenario("d", c, {JobRequest{"j", {m, st, w, 1}, pl, PlacementPolicy::Spread}}, 1))
            .jobs[0]
            .avg_step_seconds;
      };
      EXPECT_LE(run(Strategy::ralp(*s)), run(Strategy::baseline())) << name << " W=" << w;
      ++checked;
    }
  }
  EXPECT_GE(checked, 12);
}

TEST(Simulator, WarmupExcluded) {
  const auto m = catalog_lookup("lenet");
  auto sc = one_job(ClusterSpec::testbed(), {m, Strategy::baseline(), 3, 1}, 4);
  sc.warmup = 2;
  const auto r = simulate_run(sc);
  EXPECT_EQ(r.jobs[0].steps.size(), 4u);
  EXPECT_GT(seconds(r.jobs[0].steps[0].start), 0);
}

TEST(Placement, SpreadAndPack) {
  const auto m = catalog_lookup("lenet");
  const auto c = unit_cluster(4, 2);
  const auto spread = one_job(c, {m, Strategy::baseline(), 3, 1});
  EXPECT_EQ(spread.jobs[0].placement.ps, (std::vector<Slot>{{0, 0}}));
  EXPECT_EQ(spread.jobs[0].placement.workers, (std::vector<Slot>{{1, 0}, {2, 0}, {3, 0}}));
  const auto pack = one_job(c, {m, Strategy::baseline(), 3, 1}, 1, PlacementPolicy::Pack);
  EXPECT_EQ(pack.jobs[0].placement.workers, (std::vector<Slot>{{0, 1}, {1, 0}, {1, 1}}));
}

TEST(Placement, CapacityErrors) {
  const auto m = catalog_lookup("lenet");
  const auto c = unit_cluster(2, 2);
  EXPECT_THROW(one_job(c, {m, Strategy::baseline(), 3, 2}), CapacityError);
  const Placement twice{{{0, 0}}, {{0, 0}}};
  EXPECT_THROW(make_scenario("t", c, {JobRequest{"j", {m, Strategy::baseline(), 1, 1}, twice, PlacementPolicy::Spread}}, 1),
               CapacityError);
  const Placement outside{{{0, 0}}, {{5, 0}}};
  EXPECT_THROW(make_scenario("t", c, {JobRequest{"j", {m, Strategy::baseline(), 1, 1}, outside, PlacementPolicy::Spread}}, 1),
               CapacityError);
  const auto base = one_job(c, {m, Strategy::baseline(), 1, 1});
  EXPECT_THROW(simulate_consolidation(base, 3), CapacityError);
}

TEST(Placement, Validation) {
  const auto m = catalog_lookup("lenet");
  auto c = unit_cluster();
  c.link_bytes_per_sec = 0;
  EXPECT_THROW(one_job(c, {m, Strategy::baseline(), 1, 1}), InvalidArgument);
  EXPECT_THROW(one_job(unit_cluster(), {m, Strategy::baseline(), 1, 1}, 0), InvalidArgument);
  EXPECT_THROW(simulate_consolidation(one_job(unit_cluster(), {m, Strategy::baseline(), 1, 1}), 0), InvalidArgument);
}

TEST(Consolidation, SingleCopyIsExactlyOne) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const auto sc = testutil::random_scenario(rng);
    const auto r = simulate_consolidation(sc, 1);
    for (double s : r.slowdown) EXPECT_EQ(s, 1.0);
  }
}

TEST(Trends, CalibratedCluster) {
  const auto c = ClusterSpec::testbed();
  const auto vgg = catalog_lookup("vgg11");
  const auto base = simulate_run(make_scenario(
      "b", c, {JobRequest{"b", {vgg, Strategy::baseline(), 8, 8}, std::nullopt, PlacementPolicy::Spread}}, 3, 1));
  EXPECT_GT(base.jobs[0].comm_fraction(), 0.5);
  const auto ralp = simulate_run(make_scenario(
      "r", c, {JobRequest{"r", {vgg, Strategy::ralp(*planned_split(vgg)), 15, 1}, std::nullopt, PlacementPolicy::Spread}},
      3, 1));
  EXPECT_GE(ralp.jobs[0].images_per_sec / base.jobs[0].images_per_sec, 3.0);

  const auto lenet = make_scenario(
      "l", c, {JobRequest{"l", {catalog_lookup("lenet"), Strategy::baseline(), 3, 1}, std::nullopt, PlacementPolicy::Spread}},
      3, 1);
  const auto cons = simulate_consolidation(lenet, 8);
  for (double s : cons.slowdown) EXPECT_GT(s, 2.0);
}

TEST(Report, JsonAndTimeline) {
  const auto r = simulate_run(one_job(ClusterSpec::testbed(), {catalog_lookup("lenet"), Strategy::baseline(), 2, 1}, 2));
  const auto j = to_json(r);
  EXPECT_EQ(j["jobs"][0]["strategy"], "baseline");
  EXPECT_EQ(j["jobs"][0]["steps"], 2);
  const auto csv = timeline_csv(r);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 2 * 2);
}
