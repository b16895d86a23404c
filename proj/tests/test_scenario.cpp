#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "ralp/catalog.hpp"
#include "ralp/error.hpp"
#include "ralp/scenario.hpp"

using namespace ralp;

TEST(Scenario, ParsesJobsAndDefaults) {
  const auto sc = parse_scenario(
      "# comment\n"
      "scenario demo steps=3 warmup=1\n"
      "cluster machines=4 gpus_per_machine=3 link_bw=1e9 intra_bw=inf\n"
      "job a model=vgg11 strategy=ralp workers=3\n"
      "job b model=LeNet strategy=baseline workers=2 batch=16 placement=pack\n"
      "job c model=alexnet strategy=ring workers=1\n",
      "demo.scn");
  EXPECT_EQ(sc.name, "demo");
  EXPECT_EQ(sc.steps, 3);
  EXPECT_EQ(sc.warmup, 1);
  EXPECT_EQ(sc.cluster.machines, 4);
  EXPECT_EQ(sc.cluster.link_bytes_per_sec, 1e9);
  EXPECT_TRUE(std::isinf(sc.cluster.intra_machine_bytes_per_sec));
  EXPECT_EQ(sc.cluster.gpu_flops_per_sec, ClusterSpec::testbed().gpu_flops_per_sec);
  ASSERT_EQ(sc.jobs.size(), 3u);
  EXPECT_EQ(sc.jobs[0].spec.strategy, Strategy::ralp(*planned_split(catalog_lookup("vgg11"))));
  EXPECT_EQ(sc.jobs[0].spec.ps_count, 1);
  EXPECT_EQ(sc.jobs[1].spec.ps_count, 2);
  EXPECT_EQ(sc.jobs[1].spec.model.batch_size(), 16);
  EXPECT_EQ(sc.jobs[1].policy, PlacementPolicy::Pack);
  EXPECT_EQ(sc.jobs[2].spec.ps_count, 0);
}

TEST(Scenario, ExplicitSlots) {
  const auto sc = parse_scenario(
      "scenario s\ncluster machines=2 gpus_per_machine=2\n"
      "job a model=lenet strategy=baseline workers=2 ps=1 ps_slots=1:1 worker_slots=0:0,0:1\n"
      "job b model=lenet strategy=ring workers=1 worker_slots=1:0\n",
      "s");
  EXPECT_EQ(sc.jobs[0].placement.ps, (std::vector<Slot>{{1, 1}}));
  EXPECT_EQ(sc.jobs[0].placement.workers, (std::vector<Slot>{{0, 0}, {0, 1}}));
  EXPECT_FALSE(sc.jobs[0].policy);
}

TEST(Scenario, ParseErrors) {
  auto expect_at = [](const char* text, int line, int column) {
    try {
      parse_scenario(text, "x.scn");
      ADD_FAILURE() << "no error for: " << text;
    } catch (const ParseError& e) {
      EXPECT_EQ(e.line(), line) << text;
      EXPECT_EQ(e.column(), column) << text;
    }
  };
  expect_at("job a model=lenet strategy=ring\n", 1, 1);
  expect_at("scenario s steps=0\njob a model=lenet strategy=ring\n", 1, 12);
  expect_at("scenario s\njob a model=lenet strategy=sgd\n", 2, 19);
  expect_at("scenario s\njob a model=lenet strategy=ring colour=red\n", 2, 33);
  expect_at("scenario s\njob a model=lenet strategy=ring\njob a model=lenet strategy=ring\n", 3, 5);
  expect_at("scenario s\nnode x\n", 2, 1);
  expect_at("scenario s\ncluster machines=0\njob a model=lenet strategy=ring\n", 2, 9);
  expect_at("scenario s\njob a model=lenet strategy=baseline worker_slots=0:0 ps_slots=zz\n", 2, 54);
  expect_at("scenario s\n", 1, 1);
  EXPECT_THROW(parse_scenario("scenario s\njob a model=lenet strategy=ralp workers=2 ps=2\n", "x"), ParseError);
  EXPECT_THROW(parse_scenario("scenario s\njob a model=lenet strategy=ralp split=99\n", "x"), ParseError);
  EXPECT_THROW(parse_scenario("scenario s\njob a model=nope strategy=ring\n", "x"), UnknownModelError);
  EXPECT_THROW(parse_scenario("scenario s\njob a model=missing.model strategy=ring\n", "x"), ParseError);
}

TEST(Scenario, Capacity) {
  EXPECT_THROW(parse_scenario("scenario s\ncluster machines=2 gpus_per_machine=2\n"
                              "job a model=lenet strategy=baseline workers=3\n",
                              "x"),
               CapacityError);
  EXPECT_THROW(parse_scenario("scenario s\ncluster machines=2 gpus_per_machine=2\n"
                              "job a model=lenet strategy=ring workers=1 worker_slots=0:0\n"
                              "job b model=lenet strategy=ring workers=1 worker_slots=0:0\n",
                              "x"),
               CapacityError);
}

TEST(Scenario, ModelPathRelativeToFile) {
  const auto dir = std::filesystem::temp_directory_path() / "ralp_scn_test";
  std::filesystem::create_directories(dir / "models");
  std::ofstream(dir / "models" / "tiny.model") << "model tiny batch=2\nfc1 fc in=10 out=2\nfc2 fc out=2\n";
  std::ofstream(dir / "run.scn") << "scenario r\njob t model=models/tiny.model strategy=ralp workers=2 split=1\n";
  const auto sc = load_scenario_file(dir / "run.scn");
  EXPECT_EQ(sc.jobs[0].spec.model.name(), "tiny");
  EXPECT_EQ(sc.jobs[0].spec.strategy.split_index, 1);
  EXPECT_THROW(load_scenario_file(dir / "absent.scn"), ParseError);
  std::filesystem::remove_all(dir);
}

TEST(Scenario, BundledFilesLoad) {
  for (const char* f : {"vgg11_16gpu_baseline.scn", "vgg11_16gpu_ralp.scn", "lenet_3w1ps.scn"}) {
    const auto sc = load_scenario_file(std::filesystem::path(RALP_SCENARIO_DIR) / f);
    EXPECT_EQ(sc.jobs.size(), 1u) << f;
  }
}
