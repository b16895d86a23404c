#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "ralp/simulator.hpp"

namespace ralp {

/// Scenario text, one directive per line:
///
///   scenario <name> [steps=N] [warmup=N]
///   cluster [machines=N] [gpus_per_machine=N] [gpu_flops=R] [memcopy_bw=R] [link_bw=R] [intra_bw=R]
///   job <name> model=<catalog name|path.model> strategy=baseline|ralp|ring [workers=N] [ps=N]
///       [split=auto|I] [batch=N] [placement=spread|pack] [ps_slots=m:g,...] [worker_slots=m:g,...]
///
/// Omitted cluster fields take ClusterSpec::testbed() values. Model paths are
/// resolved against `base_dir`. Syntax problems raise ParseError; capacity
/// problems raise CapacityError.
Scenario parse_scenario(std::string_view text, const std::string& source,
                        const std::filesystem::path& base_dir = {});
Scenario load_scenario_file(const std::filesystem::path& path);

}  // namespace ralp
