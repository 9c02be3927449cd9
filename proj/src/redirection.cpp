#include "ncdn/redirection.hpp"

#include <cmath>
#include <bit>
#include <limits>

namespace ncdn {

const char* to_string(RedirectReason r) {
  switch (r) {
    case RedirectReason::local_hit: return "local-hit";
    case RedirectReason::remote_replica: return "remote-replica";
    case RedirectReason::origin: return "origin";
  }
  return "?";
}

namespace {

RedirectDecision decide(PopId client, PopId server, PopId origin) {
  if (server == origin) return {server, RedirectReason::origin};
  return {server, server == client ? RedirectReason::local_hit : RedirectReason::remote_replica};
}

}  // namespace

RedirectDecision redirect_closest(PopId client, PopMask replicas, PopId origin,
                                  const Eigen::MatrixXd& distance) {
  if (client == origin || (replicas & pop_bit(client))) return decide(client, client, origin);
  replicas &= ~pop_bit(origin);
  PopId best = -1;
  for (PopMask m = replicas; m; m &= m - 1) {
    const PopId p = std::countr_zero(m);
    if (best < 0 || distance(client, p) < distance(client, best)) best = p;
  }
  return decide(client, best < 0 ? origin : best, origin);
}

RedirectDecision redirect_utilization_aware(PopId client, PopMask replicas, PopId origin,
                                            const Eigen::MatrixXd& distance,
                                            const Eigen::VectorXd& loads,
                                            const Eigen::VectorXd& capacity,
                                            const RoutingSolution& routing, double rate) {
  if (client == origin || (replicas & pop_bit(client))) return decide(client, client, origin);
  const PopMask candidates = replicas | pop_bit(origin);
  PopId best = -1;
  double best_metric = 0.0;
  for (PopMask m = candidates; m; m &= m - 1) {
    const PopId p = std::countr_zero(m);
    double metric = 0.0;
    const auto frac = routing.fractions(p, client);
    for (Eigen::Index l = 0; l < frac.size(); ++l) {
      if (frac(l) > 0.0) metric = std::max(metric, (loads(l) + frac(l) * rate) / capacity(l));
    }
    // Bits are visited in increasing id order, so strict comparisons keep the
    // lower id on exact ties.
    const bool better = best < 0 || metric < best_metric ||
                        (metric == best_metric && distance(client, p) < distance(client, best));
    if (better) {
      best = p;
      best_metric = metric;
    }
  }
  return decide(client, best, origin);
}

}  // namespace ncdn
