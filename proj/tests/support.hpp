#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "ralp/model_ir.hpp"

namespace ralp::testutil {

// A chain of composite blocks; each entry is (params, out_elems, flops).
struct BlockSpec {
  std::uint64_t params;
  std::uint64_t out;
  std::uint64_t flops;
};

inline ModelGraph block_chain(const std::vector<BlockSpec>& blocks, std::int64_t batch = 1,
                              std::int64_t elem = 4, const std::string& name = "chain") {
  std::vector<LayerDecl> decls;
  for (std::size_t i = 0; i < blocks.size(); ++i)
    decls.push_back({"b" + std::to_string(i + 1), LayerKind::Block,
                     BlockParams{blocks[i].params, blocks[i].out, blocks[i].flops, std::nullopt}});
  return ModelGraph::build(name, std::nullopt, std::move(decls), batch, elem);
}

// conv-ish front blocks followed by fc layers, with random sizes.
inline ModelGraph random_model(std::mt19937_64& rng, int max_front = 6, int max_back = 3) {
  std::uniform_int_distribution<int> nfront(1, max_front), nback(1, max_back);
  std::uniform_int_distribution<std::uint64_t> small(1, 200'000), out(1, 50'000), flops(1'000'000, 2'000'000'000);
  std::vector<LayerDecl> decls;
  const int f = nfront(rng);
  std::uint64_t last_out = 0;
  for (int i = 0; i < f; ++i) {
    last_out = out(rng);
    decls.push_back({"front" + std::to_string(i), LayerKind::Block, BlockParams{small(rng), last_out, flops(rng), std::nullopt}});
  }
  const int b = nback(rng);
  std::uniform_int_distribution<std::int64_t> width(1, 4096);
  for (int i = 0; i < b; ++i)
    decls.push_back({"fc" + std::to_string(i), LayerKind::FullyConnected, FcParams{0, width(rng)}});
  std::uniform_int_distribution<std::int64_t> batch(1, 64);
  return ModelGraph::build("random", std::nullopt, std::move(decls), batch(rng));
}

}  // namespace ralp::testutil

#include "ralp/costmodel.hpp"
#include "ralp/simulator.hpp"

namespace ralp::testutil {

// A few jobs of random strategy and size on a random small cluster, placed by
// policy. Always fits.
inline Scenario random_scenario(std::mt19937_64& rng, int max_jobs = 3) {
  std::uniform_int_distribution<int> machines(2, 6), gpus(1, 4), njobs(1, max_jobs), strat(0, 2), pol(0, 1);
  std::uniform_real_distribution<double> log_flops(11.0, 13.5), log_link(8.5, 10.5), log_copy(9.0, 10.5);
  ClusterSpec c;
  c.machines = machines(rng);
  c.gpus_per_machine = gpus(rng);
  c.gpu_flops_per_sec = std::pow(10.0, log_flops(rng));
  c.link_bytes_per_sec = std::pow(10.0, log_link(rng));
  c.memcopy_bytes_per_sec = std::pow(10.0, log_copy(rng));
  c.intra_machine_bytes_per_sec = std::bernoulli_distribution(0.5)(rng) ? HUGE_VAL : 4 * c.link_bytes_per_sec;
  int free = c.total_gpus();
  std::vector<JobRequest> jobs;
  const int n = njobs(rng);
  for (int j = 0; j < n && free >= 2; ++j) {
    const auto model = random_model(rng);
    const int kind = strat(rng);
    const int max_workers = std::max(1, std::min(6, kind == 0 ? free / 2 : (kind == 1 ? free - 1 : free)));
    const int w = std::uniform_int_distribution<int>(1, max_workers)(rng);
    JobSpec spec{model, Strategy::baseline(), w, 0};
    if (kind == 0) {
      spec.ps_count = std::uniform_int_distribution<int>(1, std::min(w, free - w))(rng);
    } else if (kind == 1) {
      spec.strategy = Strategy::ralp(1 + static_cast<int>(rng() % (model.size() - 1)));
      spec.ps_count = 1;
    } else {
      spec.strategy = Strategy::ring();
    }
    free -= w + spec.ps_count;
    jobs.push_back({"job" + std::to_string(j), spec, std::nullopt,
                    pol(rng) ? PlacementPolicy::Pack : PlacementPolicy::Spread});
  }
  return make_scenario("random", c, std::move(jobs), 2, 1);
}

}  // namespace ralp::testutil
