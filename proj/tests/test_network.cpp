#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "ralp/network.hpp"

using namespace ralp::net;

TEST(MaxMin, EqualSplit) {
  const std::vector<double> cap{10, 10};
  const std::vector<FlowLinks> flows{{{0, 1}}, {{0, 1}}};
  const auto r = max_min_rates(cap, flows);
  EXPECT_DOUBLE_EQ(r[0], 5);
  EXPECT_DOUBLE_EQ(r[1], 5);
}

TEST(MaxMin, BottleneckFreesCapacity) {
  // Flow 0 crosses links 0 and 1, flow 1 only link 1, flows 2,3 only link 0 with capacity 3.
  const std::vector<double> cap{3, 10};
  const std::vector<FlowLinks> flows{{{0, 1}}, {{1, -1}}, {{0, -1}}, {{0, -1}}};
  const auto r = max_min_rates(cap, flows);
  EXPECT_DOUBLE_EQ(r[0], 1);
  EXPECT_DOUBLE_EQ(r[1], 9);
  EXPECT_DOUBLE_EQ(r[2], 1);
}

TEST(MaxMin, InfiniteLinks) {
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<double> cap{inf, 4};
  const std::vector<FlowLinks> flows{{{0, -1}}, {{0, 1}}};
  const auto r = max_min_rates(cap, flows);
  EXPECT_TRUE(std::isinf(r[0]));
  EXPECT_DOUBLE_EQ(r[1], 4);
}

TEST(MaxMin, FeasibleAndSaturating) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> link(0, 7);
  std::uniform_real_distribution<double> c(1, 100);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> cap(8);
    for (auto& x : cap) x = c(rng);
    std::vector<FlowLinks> flows(1 + t % 20);
    for (auto& f : flows) f.links = {link(rng), link(rng)};
    const auto r = max_min_rates(cap, flows);
    std::vector<double> load(8, 0);
    for (std::size_t i = 0; i < flows.size(); ++i)
      for (int l : flows[i].links)
        if (l >= 0) load[static_cast<std::size_t>(l)] += r[i];
    for (std::size_t l = 0; l < 8; ++l) EXPECT_LE(load[l], cap[l] * (1 + 1e-9));
    // Every flow is limited by some saturated link where it has a maximal rate.
    for (std::size_t i = 0; i < flows.size(); ++i) {
      bool bottlenecked = false;
      for (int l : flows[i].links) {
        if (l < 0 || load[static_cast<std::size_t>(l)] < cap[static_cast<std::size_t>(l)] * (1 - 1e-9)) continue;
        bool max_here = true;
        for (std::size_t j = 0; j < flows.size(); ++j)
          for (int lj : flows[j].links)
            if (lj == l && r[j] > r[i] * (1 + 1e-9)) max_here = false;
        bottlenecked |= max_here;
      }
      EXPECT_TRUE(bottlenecked) << "flow " << i << " case " << t;
    }
  }
}
