#include "ncdn/topology.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <sstream>

#include <fmt/core.h>

#include "ncdn/error.hpp"
#include "ncdn/random.hpp"

namespace ncdn {

namespace {

bool reaches_all(int n, const std::vector<std::vector<LinkId>>& adj, const std::vector<Link>& links,
                 bool forward) {
  std::vector<bool> seen(n, false);
  std::vector<PopId> stack = {0};
  seen[0] = true;
  int count = 1;
  while (!stack.empty()) {
    const PopId v = stack.back();
    stack.pop_back();
    for (LinkId l : adj[v]) {
      const PopId w = forward ? links[l].dst : links[l].src;
      if (!seen[w]) {
        seen[w] = true;
        ++count;
        stack.push_back(w);
      }
    }
  }
  return count == n;
}

}  // namespace

Topology::Topology(std::vector<std::string> pop_names, std::vector<Link> links, PopId origin)
    : names_(std::move(pop_names)), links_(std::move(links)), origin_(origin) {
  const int n = num_pops();
  if (n == 0) throw ValidationError("topology has no PoPs");
  if (origin_ < 0 || origin_ >= n) {
    throw ValidationError(fmt::format("origin PoP {} is not a member of the topology", origin_));
  }
  out_.assign(n, {});
  in_.assign(n, {});
  std::set<std::pair<PopId, PopId>> seen;
  for (std::size_t i = 0; i < links_.size(); ++i) {
    Link& l = links_[i];
    l.id = static_cast<LinkId>(i);
    if (l.src < 0 || l.src >= n || l.dst < 0 || l.dst >= n) {
      throw ValidationError(fmt::format("link {} references an unknown PoP", i));
    }
    if (l.src == l.dst) throw ValidationError(fmt::format("self-loop at PoP {}", l.src));
    if (l.capacity_bps <= 0) {
      throw ValidationError(fmt::format("link {} -> {} has non-positive capacity", l.src, l.dst));
    }
    if (!seen.emplace(l.src, l.dst).second) {
      throw ValidationError(fmt::format("duplicate directed link {} -> {}", l.src, l.dst));
    }
    out_[l.src].push_back(l.id);
    in_[l.dst].push_back(l.id);
  }
  if (!reaches_all(n, out_, links_, true) || !reaches_all(n, in_, links_, false)) {
    throw ValidationError("topology is not strongly connected");
  }
}

std::optional<LinkId> Topology::find_link(PopId src, PopId dst) const {
  for (LinkId l : out_[src]) {
    if (links_[l].dst == dst) return l;
  }
  return std::nullopt;
}

Eigen::VectorXd Topology::capacities() const {
  Eigen::VectorXd c(num_links());
  for (const Link& l : links_) c(l.id) = static_cast<double>(l.capacity_bps);
  return c;
}

double Topology::max_capacity() const {
  std::int64_t best = 0;
  for (const Link& l : links_) best = std::max(best, l.capacity_bps);
  return static_cast<double>(best);
}

Topology Topology::with_origin(PopId origin) const { return Topology(names_, links_, origin); }

Topology Topology::scaled_capacities(std::int64_t numerator, std::int64_t denominator) const {
  std::vector<Link> links = links_;
  for (Link& l : links) l.capacity_bps = l.capacity_bps * numerator / denominator;
  return Topology(names_, std::move(links), origin_);
}

namespace {

// Decimal megabits/sec to exact bits/sec.
std::optional<std::int64_t> parse_mbps(std::string_view text) {
  if (text.empty() || text.front() == '-' || text.front() == '+') return std::nullopt;
  const auto dot = text.find('.');
  const std::string_view whole = text.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : text.substr(dot + 1);
  std::int64_t mbps = 0;
  if (!whole.empty()) {
    auto [p, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), mbps);
    if (ec != std::errc{} || p != whole.data() + whole.size()) return std::nullopt;
  } else if (frac.empty()) {
    return std::nullopt;
  }
  if (mbps > std::numeric_limits<std::int64_t>::max() / 1'000'000) return std::nullopt;
  while (frac.size() > 6 && frac.back() == '0') frac.remove_suffix(1);
  if (frac.size() > 6) return std::nullopt;
  std::int64_t sub = 0;
  for (char c : frac) {
    if (c < '0' || c > '9') return std::nullopt;
    sub = sub * 10 + (c - '0');
  }
  for (std::size_t i = frac.size(); i < 6; ++i) sub *= 10;
  return mbps * 1'000'000 + sub;
}

std::optional<int> parse_int(std::string_view text) {
  int v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || p != text.data() + text.size()) return std::nullopt;
  return v;
}

}  // namespace

Topology parse_topology(std::string_view text) {
  std::map<int, std::string> pops;
  std::map<int, int> pop_line;
  struct PendingLink {
    int src, dst;
    std::int64_t bps;
    int line;
  };
  std::vector<PendingLink> pending;
  std::optional<int> origin;
  int origin_line = 0;

  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw ValidationError(fmt::format("topology line {}: {}", line_no, what));
  };
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.resize(hash);
    std::istringstream fields(raw);
    std::vector<std::string> tok;
    for (std::string t; fields >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    const std::string& kind = tok[0];
    if (kind == "pop") {
      if (tok.size() != 3) fail("expected `pop <id> <name>`");
      const auto id = parse_int(tok[1]);
      if (!id || *id < 0) fail(fmt::format("bad PoP id '{}'", tok[1]));
      if (pops.count(*id)) fail(fmt::format("PoP {} declared twice", *id));
      pops[*id] = tok[2];
      pop_line[*id] = line_no;
    } else if (kind == "link" || kind == "arc") {
      if (tok.size() != 4) fail(fmt::format("expected `{} <src> <dst> <capacity-mbps>`", kind));
      const auto a = parse_int(tok[1]);
      const auto b = parse_int(tok[2]);
      if (!a || !b) fail("bad PoP id in link");
      const auto bps = parse_mbps(tok[3]);
      if (!bps) fail(fmt::format("bad capacity '{}'", tok[3]));
      if (*bps <= 0) fail("capacity must be positive");
      if (*a == *b) fail("self-loop");
      pending.push_back({*a, *b, *bps, line_no});
      if (kind == "link") pending.push_back({*b, *a, *bps, line_no});
    } else if (kind == "origin") {
      if (tok.size() != 2) fail("expected `origin <pop-id>`");
      if (origin) fail("origin declared twice");
      origin = parse_int(tok[1]);
      if (!origin) fail(fmt::format("bad origin '{}'", tok[1]));
      origin_line = line_no;
    } else {
      fail(fmt::format("unknown directive '{}'", kind));
    }
  }

  const int n = static_cast<int>(pops.size());
  for (int i = 0; i < n; ++i) {
    if (!pops.count(i)) {
      throw ValidationError(fmt::format("PoP ids must be contiguous from 0; {} is missing", i));
    }
  }
  if (!origin) throw ValidationError("topology declares no origin");
  if (!pops.count(*origin)) {
    throw ValidationError(fmt::format("topology line {}: unknown origin PoP {}", origin_line, *origin));
  }

  std::set<std::pair<int, int>> seen;
  std::vector<Link> links;
  for (const PendingLink& p : pending) {
    line_no = p.line;
    if (!pops.count(p.src) || !pops.count(p.dst)) fail("link references an undeclared PoP");
    if (!seen.emplace(p.src, p.dst).second) {
      fail(fmt::format("duplicate directed link {} -> {}", p.src, p.dst));
    }
    links.push_back(Link{0, p.src, p.dst, p.bps});
  }
  std::vector<std::string> names;
  for (auto& [id, name] : pops) names.push_back(name);
  return Topology(std::move(names), std::move(links), *origin);
}

Topology load_topology(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError(fmt::format("cannot open topology file '{}'", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_topology(buf.str());
}

namespace {

std::string format_mbps(std::int64_t bps) {
  std::string s = std::to_string(bps / 1'000'000);
  if (const std::int64_t frac = bps % 1'000'000; frac != 0) {
    std::string f = fmt::format("{:06d}", frac);
    while (f.back() == '0') f.pop_back();
    s += "." + f;
  }
  return s;
}

}  // namespace

std::string format_topology(const Topology& topo) {
  std::string out;
  for (PopId p = 0; p < topo.num_pops(); ++p) out += fmt::format("pop {} {}\n", p, topo.name(p));
  std::vector<bool> done(topo.num_links(), false);
  for (const Link& l : topo.links()) {
    if (done[l.id]) continue;
    done[l.id] = true;
    const auto back = topo.find_link(l.dst, l.src);
    if (back && !done[*back] && topo.link(*back).capacity_bps == l.capacity_bps) {
      done[*back] = true;
      out += fmt::format("link {} {} {}\n", l.src, l.dst, format_mbps(l.capacity_bps));
    } else {
      out += fmt::format("arc {} {} {}\n", l.src, l.dst, format_mbps(l.capacity_bps));
    }
  }
  out += fmt::format("origin {}\n", topo.origin());
  return out;
}

Topology random_topology(const RandomTopologyParams& params) {
  if (params.pops < 2) throw ValidationError("random topology needs at least 2 PoPs");
  if (params.capacity_choices_mbps.empty()) throw ValidationError("no capacity choices given");
  Rng rng(params.seed);
  const int n = params.pops;
  std::set<std::pair<int, int>> edges;
  // Random spanning tree: attach each PoP to an earlier one.
  for (int v = 1; v < n; ++v) {
    const int u = static_cast<int>(rng.below(static_cast<std::uint64_t>(v)));
    edges.emplace(u, v);
  }
  const int max_edges = n * (n - 1) / 2;
  const int target = std::min<int>(max_edges, static_cast<int>(edges.size()) + params.extra_links);
  while (static_cast<int>(edges.size()) < target) {
    int a = static_cast<int>(rng.below(n));
    int b = static_cast<int>(rng.below(n));
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    edges.emplace(a, b);
  }
  std::vector<Link> links;
  for (auto [a, b] : edges) {
    const double mbps =
        params.capacity_choices_mbps[rng.below(params.capacity_choices_mbps.size())];
    const auto bps = static_cast<std::int64_t>(std::llround(mbps * 1e6));
    links.push_back(Link{0, a, b, bps});
    links.push_back(Link{0, b, a, bps});
  }
  std::vector<std::string> names;
  for (int p = 0; p < n; ++p) names.push_back(fmt::format("pop{}", p));
  return Topology(std::move(names), std::move(links), 0);
}

WeightMap inverse_cap_weights(const Topology& topo) {
  const Eigen::VectorXd cap = topo.capacities();
  if (cap.size() == 0) return cap;
  return (cap.maxCoeff() / cap.array()).matrix();
}

namespace {

// Dijkstra toward `t` over reversed links: dist[v] = weight of best v -> t path.
Eigen::VectorXd distances_to(const Topology& topo, const WeightMap& w, PopId t) {
  const double inf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd dist = Eigen::VectorXd::Constant(topo.num_pops(), inf);
  using Entry = std::pair<double, PopId>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  dist(t) = 0.0;
  heap.emplace(0.0, t);
  while (!heap.empty()) {
    auto [d, v] = heap.top();
    heap.pop();
    if (d > dist(v)) continue;
    for (LinkId l : topo.in_links(v)) {
      const PopId u = topo.link(l).src;
      const double nd = d + w(l);
      if (nd < dist(u)) {
        dist(u) = nd;
        heap.emplace(nd, u);
      }
    }
  }
  return dist;
}

bool on_shortest_path(double d_from, double w, double d_to) {
  const double lhs = w + d_to;
  return std::abs(lhs - d_from) <= 1e-12 * std::max(1.0, d_from);
}

}  // namespace

Eigen::MatrixXd distance_matrix(const Topology& topo, const WeightMap& w) {
  const int n = topo.num_pops();
  Eigen::MatrixXd d(n, n);
  for (PopId t = 0; t < n; ++t) d.col(t) = distances_to(topo, w, t);
  return d;
}

double path_distance(const Topology& topo, const WeightMap& w, PopId s, PopId t) {
  if (s == t) return 0.0;
  return distances_to(topo, w, t)(s);
}

RoutingSolution shortest_path_routes(const Topology& topo, const WeightMap& w) {
  const int n = topo.num_pops();
  RoutingSolution routes(n, topo.num_links());
  for (PopId t = 0; t < n; ++t) {
    const Eigen::VectorXd dist = distances_to(topo, w, t);
    // Equal-cost next hops toward t from every node.
    std::vector<std::vector<LinkId>> next(n);
    for (PopId v = 0; v < n; ++v) {
      if (v == t) continue;
      for (LinkId l : topo.out_links(v)) {
        if (on_shortest_path(dist(v), w(l), dist(topo.link(l).dst))) next[v].push_back(l);
      }
    }
    std::vector<PopId> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](PopId a, PopId b) { return dist(a) > dist(b); });
    for (PopId s = 0; s < n; ++s) {
      if (s == t) continue;
      if (!std::isfinite(dist(s))) {
        throw ValidationError(fmt::format("PoP {} cannot reach PoP {}", s, t));
      }
      Eigen::VectorXd inflow = Eigen::VectorXd::Zero(n);
      Eigen::VectorXd frac = Eigen::VectorXd::Zero(topo.num_links());
      inflow(s) = 1.0;
      for (PopId v : order) {
        if (v == t || inflow(v) == 0.0) continue;
        const double share = inflow(v) / static_cast<double>(next[v].size());
        for (LinkId l : next[v]) {
          frac(l) += share;
          inflow(topo.link(l).dst) += share;
        }
      }
      routes.set(s, t, frac.transpose());
    }
  }
  return routes;
}

}  // namespace ncdn
