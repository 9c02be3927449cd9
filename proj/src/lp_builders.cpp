#include "ncdn/lp/builders.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/core.h>

#include "ncdn/error.hpp"

namespace ncdn::lp {

namespace {

using Index = Eigen::Index;
constexpr double inf = LinearProgram<double>::infinity;

Index add_alpha(LinearProgram<double>& lp) { return lp.add_variable(0.0, inf, 1.0, "alpha"); }

// Σ_k f(k, l) - cap(l) / unit * alpha <= 0 for every link.
void add_capacity_rows(LinearProgram<double>& lp, const Topology& topo, Index alpha,
                       const std::vector<std::vector<Index>>& flow_var, double unit) {
  std::vector<Term<double>> row;
  for (LinkId l = 0; l < topo.num_links(); ++l) {
    row.clear();
    for (const auto& vars : flow_var) {
      if (vars[l] >= 0) row.push_back({vars[l], 1.0});
    }
    if (row.empty()) continue;
    row.push_back({alpha, -static_cast<double>(topo.link(l).capacity_bps) / unit});
    lp.add_constraint(std::span<const Term<double>>(row), Relation::less_equal, 0.0,
                      fmt::format("cap_{}", l));
  }
}

// out(v) - in(v) over the variables in `vars`.
void add_divergence(std::vector<Term<double>>& row, const Topology& topo,
                    const std::vector<Index>& vars, PopId v) {
  for (LinkId l : topo.out_links(v)) row.push_back({vars[l], 1.0});
  for (LinkId l : topo.in_links(v)) row.push_back({vars[l], -1.0});
}

std::vector<Index> add_flow_vars(LinearProgram<double>& lp, const Topology& topo,
                                 std::string_view prefix) {
  std::vector<Index> vars(topo.num_links());
  for (LinkId l = 0; l < topo.num_links(); ++l) {
    vars[l] = lp.add_variable(0.0, inf, 0.0, fmt::format("{}_{}", prefix, l));
  }
  return vars;
}

}  // namespace

MinMluProgram build_min_mlu_lp(const Topology& topo, const TrafficMatrix& tm, FlowModel model) {
  if (tm.num_pops() != topo.num_pops()) throw ValidationError("traffic matrix size mismatch");
  const int n = topo.num_pops();
  MinMluProgram prog;
  prog.model = model;
  prog.unit_bps = topo.max_capacity();
  const double unit = prog.unit_bps;
  auto& lp = prog.lp;
  prog.alpha = add_alpha(lp);
  const std::vector<Index> none(topo.num_links(), -1);
  std::vector<Term<double>> row;

  if (model == FlowModel::per_commodity) {
    prog.flow_var.assign(static_cast<std::size_t>(n) * n, none);
    for (PopId s = 0; s < n; ++s) {
      for (PopId t = 0; t < n; ++t) {
        const double r = tm(s, t) / unit;
        if (s == t || r <= 0.0) continue;
        auto& vars = prog.flow_var[static_cast<std::size_t>(s) * n + t];
        vars = add_flow_vars(lp, topo, fmt::format("f_{}_{}", s, t));
        // The sink row is implied by the others.
        for (PopId v = 0; v < n; ++v) {
          if (v == t) continue;
          row.clear();
          add_divergence(row, topo, vars, v);
          lp.add_constraint(std::span<const Term<double>>(row), Relation::equal, v == s ? r : 0.0,
                            fmt::format("flow_{}_{}_{}", s, t, v));
        }
      }
    }
  } else {
    prog.flow_var.assign(n, none);
    for (PopId s = 0; s < n; ++s) {
      if (tm.matrix().row(s).maxCoeff() <= 0.0) continue;
      auto& vars = prog.flow_var[s];
      vars = add_flow_vars(lp, topo, fmt::format("g_{}", s));
      // Every other node absorbs its demand from s; the source row is implied.
      for (PopId v = 0; v < n; ++v) {
        if (v == s) continue;
        row.clear();
        add_divergence(row, topo, vars, v);
        lp.add_constraint(std::span<const Term<double>>(row), Relation::equal, -tm(s, v) / unit,
                          fmt::format("flow_{}_{}", s, v));
      }
    }
  }
  add_capacity_rows(lp, topo, prog.alpha, prog.flow_var, unit);
  return prog;
}

std::vector<PopId> candidate_servers(const Eigen::MatrixXd& distance, PopId client, int k) {
  const int n = static_cast<int>(distance.rows());
  std::vector<PopId> others;
  for (PopId j = 0; j < n; ++j) {
    if (j != client) others.push_back(j);
  }
  std::stable_sort(others.begin(), others.end(), [&](PopId a, PopId b) {
    return distance(client, a) < distance(client, b);
  });
  if (k > 0 && static_cast<int>(others.size()) > k) others.resize(k);
  others.insert(others.begin(), client);
  return others;
}

JointProgram build_joint_lp(const Topology& topo, const DemandMatrix& dm,
                            const std::vector<Bytes>& storage, const ChunkedCatalog& chunks,
                            const JointOptions& options) {
  const int n = topo.num_pops();
  if (static_cast<int>(storage.size()) != n) throw ValidationError("one storage budget per PoP required");
  if (!(dm.length() > 0.0)) throw ValidationError("demand window must have positive length");
  if (options.candidate_servers < 0) throw ValidationError("candidate_servers must be >= 0");

  JointProgram prog;
  prog.unit_bps = topo.max_capacity();
  auto& lp = prog.lp;
  prog.alpha = add_alpha(lp);

  const Eigen::MatrixXd dist = distance_matrix(topo, inverse_cap_weights(topo));
  std::vector<std::vector<PopId>> cands(n);
  for (PopId i = 0; i < n; ++i) cands[i] = candidate_servers(dist, i, options.candidate_servers);

  double size_unit = 1.0;
  for (const auto& [key, bytes] : dm.demand) {
    size_unit = std::max(size_unit, static_cast<double>(chunks.chunk(key.chunk).size));
  }

  // rate(server, client) that cannot be avoided: demand only the origin serves.
  Eigen::MatrixXd fixed = Eigen::MatrixXd::Zero(n, n);
  // Per (server, client): the y variables and their rates.
  std::vector<std::vector<std::vector<Term<double>>>> served(
      n, std::vector<std::vector<Term<double>>>(n));
  std::vector<std::vector<Term<double>>> store(n);
  std::vector<Term<double>> row;

  for (const auto& [key, bytes] : dm.demand) {
    const ChunkId c = key.chunk;
    const PopId i = key.pop;
    const PopId origin = chunks.origin(c);
    if (bytes == 0 || i == origin) continue;
    const double rate = static_cast<double>(bytes) * 8.0 / dm.length() / prog.unit_bps;

    std::vector<PopId> servers;
    for (PopId j : cands[i]) {
      if (j != origin && storage[j] > 0) servers.push_back(j);
    }
    if (servers.empty()) {
      fixed(origin, i) += rate;
      continue;
    }
    servers.push_back(origin);
    if (prog.chunks.empty() || prog.chunks.back() != c) prog.chunks.push_back(c);

    row.clear();
    for (PopId j : servers) {
      const Index y = lp.add_variable(0.0, inf, 0.0,
                                      fmt::format("y_{}_{}_{}_{}", c.content, c.index, i, j));
      prog.y.push_back({c, i, j, y});
      row.push_back({y, 1.0});
      if (j != i) served[j][i].push_back({y, rate});
      if (j == origin) continue;
      auto [it, fresh] = prog.x.try_emplace({c, j}, -1);
      if (fresh) {
        it->second = lp.add_variable(0.0, 1.0, 0.0, fmt::format("x_{}_{}_{}", c.content, c.index, j));
        store[j].push_back(
            {it->second, static_cast<double>(chunks.chunk(c).size) / size_unit});
      }
      lp.add_constraint({{y, 1.0}, {it->second, -1.0}}, Relation::less_equal, 0.0,
                        fmt::format("avail_{}_{}_{}_{}", c.content, c.index, i, j));
    }
    lp.add_constraint(std::span<const Term<double>>(row), Relation::equal, 1.0,
                      fmt::format("serve_{}_{}_{}", c.content, c.index, i));
  }

  for (PopId j = 0; j < n; ++j) {
    if (store[j].empty()) continue;
    lp.add_constraint(std::span<const Term<double>>(store[j]), Relation::less_equal,
                      static_cast<double>(storage[j]) / size_unit, fmt::format("storage_{}", j));
  }

  const std::vector<Index> none(topo.num_links(), -1);
  prog.flow_var.assign(n, none);
  for (PopId s = 0; s < n; ++s) {
    bool active = false;
    for (PopId v = 0; v < n; ++v) active = active || !served[s][v].empty() || fixed(s, v) > 0.0;
    if (!active) continue;
    prog.flow_var[s] = add_flow_vars(lp, topo, fmt::format("g_{}", s));
    // out(v) - in(v) + (rate delivered to v) = 0 for every v != s.
    for (PopId v = 0; v < n; ++v) {
      if (v == s) continue;
      row.clear();
      add_divergence(row, topo, prog.flow_var[s], v);
      row.insert(row.end(), served[s][v].begin(), served[s][v].end());
      lp.add_constraint(std::span<const Term<double>>(row), Relation::equal, -fixed(s, v),
                        fmt::format("flow_{}_{}", s, v));
    }
  }
  add_capacity_rows(lp, topo, prog.alpha, prog.flow_var, prog.unit_bps);
  return prog;
}

MinMaxSolution solve_min_max(const LinearProgram<double>& lp, Index alpha, const Topology& topo,
                             const std::vector<std::vector<Index>>& flow_var, const SimplexOptions& options,
                             bool tie_break) {
  RevisedSimplex<double> simplex(lp, options);
  MinMaxSolution out{simplex.solve(), 0.0, 0};
  out.iterations = out.solution.iterations;
  if (!out.solution.optimal()) return out;
  out.alpha = out.solution.x(alpha);
  if (!tie_break) return out;

  LinearProgram<double> second = lp;
  for (Index j = 0; j < second.num_variables(); ++j) second.set_cost(j, 0.0);
  second.set_bounds(alpha, 0.0, out.alpha * (1.0 + 1e-12) + 1e-15);
  const WeightMap w = inverse_cap_weights(topo);
  bool any = false;
  for (const auto& vars : flow_var) {
    for (LinkId l = 0; l < topo.num_links(); ++l) {
      if (vars[l] < 0) continue;
      second.set_cost(vars[l], w(l));
      any = true;
    }
  }
  if (!any) return out;
  auto sol = simplex.reoptimize(second);
  out.iterations += sol.iterations;
  if (sol.optimal()) out.solution = std::move(sol);
  return out;
}

}  // namespace ncdn::lp
