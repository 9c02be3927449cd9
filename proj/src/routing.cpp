#include "ncdn/routing.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/core.h>

#include "ncdn/csv.hpp"
#include "ncdn/error.hpp"
#include "ncdn/lp/builders.hpp"

namespace ncdn {

void TrafficMatrix::set(PopId s, PopId t, double bps) {
  if (!(bps >= 0.0) || !std::isfinite(bps)) throw ValidationError("traffic rates must be finite and >= 0");
  if (s == t && bps != 0.0) throw ValidationError("traffic matrix diagonal must stay empty");
  rate_(s, t) = bps;
}

void TrafficMatrix::add(PopId s, PopId t, double bps) { set(s, t, rate_(s, t) + bps); }

TrafficMatrix& TrafficMatrix::operator+=(const TrafficMatrix& other) {
  if (other.num_pops() != num_pops()) throw ValidationError("traffic matrix size mismatch");
  rate_ += other.rate_;
  return *this;
}

TrafficMatrix& TrafficMatrix::operator*=(double k) {
  if (!(k >= 0.0)) throw ValidationError("traffic scale must be >= 0");
  rate_ *= k;
  return *this;
}

TrafficMatrix parse_traffic_matrix(std::string_view text, const Topology& topo) {
  TrafficMatrix tm(topo.num_pops());
  const auto rows = csv::lines(text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int row = static_cast<int>(i) + 1;
    if (csv::trim(rows[i]).empty()) continue;
    if (i == 0 && csv::trim(rows[i]).starts_with("src_pop")) continue;
    const auto f = csv::split(rows[i]);
    auto fail = [&](std::string_view what) {
      throw ValidationError(fmt::format("traffic matrix row {}: {}", row, what));
    };
    if (f.size() != 3) fail("expected src_pop,dst_pop,rate_mbps");
    const auto s = csv::number<int>(f[0]);
    const auto t = csv::number<int>(f[1]);
    const auto mbps = csv::number<double>(f[2]);
    if (!s || !t || *s < 0 || *t < 0 || *s >= topo.num_pops() || *t >= topo.num_pops()) {
      fail("unknown PoP");
    }
    if (!mbps || !std::isfinite(*mbps) || *mbps < 0.0) fail("rate must be a non-negative number");
    if (*s == *t) {
      if (*mbps != 0.0) fail("source and destination coincide");
      continue;
    }
    tm.add(*s, *t, *mbps * 1e6);
  }
  return tm;
}

TrafficMatrix load_traffic_matrix(const std::filesystem::path& path, const Topology& topo) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open traffic matrix '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_traffic_matrix(buf.str(), topo);
}

std::string format_traffic_matrix(const TrafficMatrix& tm) {
  std::string out = "src_pop,dst_pop,rate_mbps\n";
  for (PopId s = 0; s < tm.num_pops(); ++s) {
    for (PopId t = 0; t < tm.num_pops(); ++t) {
      if (tm(s, t) > 0.0) out += fmt::format("{},{},{}\n", s, t, tm(s, t) / 1e6);
    }
  }
  return out;
}

LinkLoads apply_routing(const RoutingSolution& routing, const TrafficMatrix& tm) {
  if (tm.num_pops() != routing.num_pops()) throw ValidationError("routing/traffic size mismatch");
  LinkLoads out;
  out.load = Eigen::VectorXd::Zero(routing.num_links());
  for (PopId s = 0; s < tm.num_pops(); ++s) {
    for (PopId t = 0; t < tm.num_pops(); ++t) {
      const double r = tm(s, t);
      if (r == 0.0) continue;
      if (!routing.defined(s, t)) {
        throw ValidationError(fmt::format("routing has no entry for commodity {} -> {}", s, t));
      }
      out.load += r * routing.fractions(s, t).transpose();
    }
  }
  return out;
}

double mlu(const Eigen::VectorXd& loads, const Topology& topo) {
  if (topo.num_links() == 0) return 0.0;
  return loads.cwiseQuotient(topo.capacities()).maxCoeff();
}

double mlu(const LinkLoads& loads, const Topology& topo) { return mlu(loads.load, topo); }

LinkLoads overlay_transit(const LinkLoads& loads, const TrafficMatrix& transit,
                          const RoutingSolution& routing) {
  LinkLoads out = loads;
  out.load += apply_routing(routing, transit).load;
  return out;
}

namespace {

// Removes circulations from a single-source flow; they carry no demand and
// only add load.
void cancel_cycles(const Topology& topo, Eigen::VectorXd& g, double eps) {
  const int n = topo.num_pops();
  for (;;) {
    std::vector<int> color(n, 0);
    std::vector<LinkId> via(n, -1);
    std::vector<LinkId> cycle;
    for (PopId root = 0; root < n && cycle.empty(); ++root) {
      if (color[root]) continue;
      // Iterative DFS over positive-flow arcs.
      std::vector<std::pair<PopId, std::size_t>> stack = {{root, 0}};
      color[root] = 1;
      while (!stack.empty() && cycle.empty()) {
        auto& [v, k] = stack.back();
        const auto out = topo.out_links(v);
        if (k == out.size()) {
          color[v] = 2;
          stack.pop_back();
          continue;
        }
        const LinkId l = out[k++];
        if (g(l) <= eps) continue;
        const PopId w = topo.link(l).dst;
        if (color[w] == 0) {
          color[w] = 1;
          via[w] = l;
          stack.emplace_back(w, 0);
        } else if (color[w] == 1) {
          cycle.push_back(l);
          for (PopId u = v; u != w; u = topo.link(via[u]).src) cycle.push_back(via[u]);
        }
      }
    }
    if (cycle.empty()) return;
    double m = g(cycle[0]);
    for (LinkId l : cycle) m = std::min(m, g(l));
    for (LinkId l : cycle) g(l) = g(l) - m <= eps ? 0.0 : g(l) - m;
  }
}

}  // namespace

RoutingSolution decompose_source_flows(const Topology& topo, const Eigen::MatrixXd& flows,
                                       const Eigen::MatrixXd& demand,
                                       const RoutingSolution& fallback) {
  const int n = topo.num_pops();
  const int links = topo.num_links();
  RoutingSolution routes(n, links);
  for (PopId s = 0; s < n; ++s) {
    const double scale = std::max(1.0, demand.row(s).sum());
    const double eps = 1e-12 * scale;
    Eigen::VectorXd g = flows.row(s).transpose();
    for (LinkId l = 0; l < links; ++l) {
      if (g(l) <= eps) g(l) = 0.0;
    }
    cancel_cycles(topo, g, eps);

    Eigen::VectorXd remaining = demand.row(s).transpose();
    remaining(s) = 0.0;
    Eigen::MatrixXd carried = Eigen::MatrixXd::Zero(n, links);
    Eigen::VectorXd delivered = Eigen::VectorXd::Zero(n);
    // Peel source-to-sink paths off the acyclic flow.
    for (int guard = 0; guard < 4 * (links + n) + 16 && remaining.maxCoeff() > eps; ++guard) {
      std::vector<LinkId> path;
      PopId v = s;
      bool stuck = false;
      while (v == s || remaining(v) <= eps) {
        LinkId next = -1;
        for (LinkId l : topo.out_links(v)) {
          if (g(l) > eps && (next < 0 || g(l) > g(next))) next = l;
        }
        if (next < 0) {
          stuck = true;
          break;
        }
        path.push_back(next);
        v = topo.link(next).dst;
      }
      if (stuck) {
        if (path.empty()) break;
        g(path.back()) = 0.0;  // numerical residue with nowhere to go
        continue;
      }
      double bottleneck = remaining(v);
      for (LinkId l : path) bottleneck = std::min(bottleneck, g(l));
      for (LinkId l : path) {
        g(l) -= bottleneck;
        if (g(l) <= eps) g(l) = 0.0;
        carried(v, l) += bottleneck;
      }
      remaining(v) -= bottleneck;
      delivered(v) += bottleneck;
    }
    for (PopId t = 0; t < n; ++t) {
      if (t == s) continue;
      const double d = demand(s, t);
      if (d > 0.0 && delivered(t) > 0.0) {
        if (delivered(t) < d * (1.0 - 1e-6)) {
          throw NumericError(fmt::format("flow decomposition delivered {} of {} for {} -> {}",
                                         delivered(t), d, s, t));
        }
        routes.set(s, t, carried.row(t) / delivered(t));
      } else {
        routes.set(s, t, fallback.fractions(s, t));
      }
    }
  }
  return routes;
}

double max_conservation_error(const Topology& topo, const RoutingSolution& routing) {
  double worst = 0.0;
  const int n = topo.num_pops();
  for (PopId s = 0; s < n; ++s) {
    for (PopId t = 0; t < n; ++t) {
      if (s == t || !routing.defined(s, t)) continue;
      const auto f = routing.fractions(s, t);
      for (PopId v = 0; v < n; ++v) {
        double net = 0.0;
        for (LinkId l : topo.out_links(v)) net += f(l);
        for (LinkId l : topo.in_links(v)) net -= f(l);
        const double want = v == s ? 1.0 : (v == t ? -1.0 : 0.0);
        worst = std::max(worst, std::abs(net - want));
      }
      worst = std::max(worst, std::max(0.0, f.maxCoeff() - 1.0));
    }
  }
  return worst;
}

RoutingPlan solve_min_mlu_routing(const Topology& topo, const TrafficMatrix& tm,
                                  const lp::SimplexOptions& options, bool tie_break) {
  const RoutingSolution fallback = shortest_path_routes(topo, inverse_cap_weights(topo));
  RoutingPlan plan{fallback, 0.0, 0};
  if (tm.empty()) return plan;

  const lp::MinMluProgram prog = lp::build_min_mlu_lp(topo, tm, lp::FlowModel::per_source);
  const auto mm = lp::solve_min_max(prog.lp, prog.alpha, topo, prog.flow_var, options, tie_break);
  const auto& sol = mm.solution;
  plan.lp_iterations = mm.iterations;
  if (!sol.optimal()) {
    throw NumericError(fmt::format("min-MLU LP ended {}: {}", lp::to_string(sol.status), sol.message));
  }
  plan.alpha = mm.alpha;

  const int n = topo.num_pops();
  Eigen::MatrixXd flows = Eigen::MatrixXd::Zero(n, topo.num_links());
  for (PopId s = 0; s < n; ++s) {
    for (LinkId l = 0; l < topo.num_links(); ++l) {
      const Eigen::Index v = prog.flow_var[s][l];
      if (v >= 0) flows(s, l) = sol.x(v);
    }
  }
  plan.routing = decompose_source_flows(topo, flows, tm.matrix() / prog.unit_bps, fallback);
  return plan;
}

}  // namespace ncdn
