#include "ralp/network.hpp"

#include <cmath>
#include <limits>

#include "ralp/error.hpp"

namespace ralp::net {

std::vector<double> max_min_rates(std::span<const double> capacity, std::span<const FlowLinks> flows) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> rates(flows.size(), inf);
  std::vector<double> left(capacity.begin(), capacity.end());
  std::vector<int> users(capacity.size(), 0);
  std::vector<char> frozen(flows.size(), 0);

  for (const auto& f : flows)
    for (int l : f.links)
      if (l >= 0) {
        if (static_cast<std::size_t>(l) >= capacity.size()) throw InvalidArgument("flow references unknown link");
        ++users[static_cast<std::size_t>(l)];
      }

  std::size_t unfrozen = flows.size();
  while (unfrozen > 0) {
    int bottleneck = -1;
    double share = inf;
    for (std::size_t l = 0; l < left.size(); ++l) {
      if (users[l] == 0) continue;
      const double s = std::max(left[l], 0.0) / users[l];
      if (bottleneck < 0 || s < share) {
        bottleneck = static_cast<int>(l);
        share = s;
      }
    }
    if (bottleneck < 0 || std::isinf(share)) break;  // the rest only cross infinite links

    for (std::size_t i = 0; i < flows.size(); ++i) {
      if (frozen[i]) continue;
      const auto& links = flows[i].links;
      if (links[0] != bottleneck && links[1] != bottleneck) continue;
      rates[i] = share;
      frozen[i] = 1;
      --unfrozen;
      for (int l : links)
        if (l >= 0) {
          left[static_cast<std::size_t>(l)] -= share;
          --users[static_cast<std::size_t>(l)];
        }
    }
  }
  return rates;
}

}  // namespace ralp::net
