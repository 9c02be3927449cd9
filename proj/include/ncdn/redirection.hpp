#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "ncdn/routing_solution.hpp"
#include "ncdn/types.hpp"

namespace ncdn {

// Bit p set when PoP p holds a replica (planned store or cache).
using PopMask = std::uint64_t;
inline constexpr int max_mask_pops = 64;

inline PopMask pop_bit(PopId p) { return PopMask{1} << p; }

enum class RedirectReason { local_hit, remote_replica, origin };

const char* to_string(RedirectReason r);

struct RedirectDecision {
  PopId server = 0;
  RedirectReason reason = RedirectReason::origin;
};

// Local copy first, else the replica nearest to the client (distance(client,
// server), ties to the lower id), else the origin. A server equal to the
// origin is always reported with reason `origin`.
RedirectDecision redirect_closest(PopId client, PopMask replicas, PopId origin,
                                  const Eigen::MatrixXd& distance);

// Replicas and the origin compete on the bottleneck utilization their path
// would reach after adding `rate` on the current routing:
// max over links with positive fraction of (load + frac * rate) / capacity.
// Ties go to the closer server, then the lower id.
RedirectDecision redirect_utilization_aware(PopId client, PopMask replicas, PopId origin,
                                            const Eigen::MatrixXd& distance,
                                            const Eigen::VectorXd& loads,
                                            const Eigen::VectorXd& capacity,
                                            const RoutingSolution& routing, double rate);

}  // namespace ncdn
