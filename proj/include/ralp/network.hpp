#pragma once

#include <array>
#include <span>
#include <vector>

namespace ralp::net {

/// Links a flow traverses; -1 marks an unused entry. Inter-machine flows use
/// the sender's uplink and the receiver's downlink.
struct FlowLinks {
  std::array<int, 2> links{-1, -1};
};

inline int uplink(int machine) { return 2 * machine; }
inline int downlink(int machine) { return 2 * machine + 1; }

/// Max-min fair rates by progressive filling: repeatedly saturate the link
/// with the smallest equal share and freeze its flows. Ties resolve to the
/// lower link index. Capacities may be +inf; a flow touching only infinite
/// links gets an infinite rate.
std::vector<double> max_min_rates(std::span<const double> capacity, std::span<const FlowLinks> flows);

}  // namespace ralp::net
