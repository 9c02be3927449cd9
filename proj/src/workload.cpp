#include "ncdn/workload.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include <fmt/core.h>

#include "ncdn/csv.hpp"
#include "ncdn/error.hpp"
#include "ncdn/random.hpp"

namespace ncdn {

ContentId Catalog::add(std::string name, Bytes size, PopId origin) {
  if (size == 0) throw ValidationError(fmt::format("object '{}' has zero size", name));
  const auto id = static_cast<ContentId>(objects_.size());
  if (!by_name_.emplace(name, id).second) {
    throw ValidationError(fmt::format("object '{}' listed twice", name));
  }
  objects_.push_back(ContentObject{id, std::move(name), size, origin});
  return id;
}

std::optional<ContentId> Catalog::find(std::string_view name) const {
  const auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

Bytes Catalog::total_bytes() const {
  Bytes total = 0;
  for (const auto& o : objects_) total += o.size;
  return total;
}

namespace {

std::string read_file(const std::filesystem::path& path, std::string_view what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(fmt::format("cannot open {} file '{}'", what, path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

bool is_header(std::string_view line, std::string_view first_field) {
  return csv::trim(line).substr(0, first_field.size()) == first_field;
}

}  // namespace

Catalog parse_catalog(std::string_view text, const Topology& topo) {
  Catalog catalog;
  const auto rows = csv::lines(text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int row = static_cast<int>(i) + 1;
    if (csv::trim(rows[i]).empty()) continue;
    if (i == 0 && is_header(rows[i], "content_id")) continue;
    const auto f = csv::split(rows[i]);
    if (f.size() != 3 || f[0].empty()) {
      throw ValidationError(fmt::format("catalog row {}: expected content_id,size_bytes,origin_pop", row));
    }
    const auto size = csv::number<Bytes>(f[1]);
    const auto origin = csv::number<int>(f[2]);
    if (!size || *size == 0) throw ValidationError(fmt::format("catalog row {}: size must be positive", row));
    if (!origin || *origin < 0 || *origin >= topo.num_pops()) {
      throw ValidationError(fmt::format("catalog row {}: unknown PoP '{}'", row, f[2]));
    }
    if (catalog.find(f[0])) throw ValidationError(fmt::format("catalog row {}: duplicate object", row));
    catalog.add(std::string(f[0]), *size, *origin);
  }
  return catalog;
}

Workload parse_trace(std::string_view text, const Topology& topo, const Catalog* given) {
  Workload w;
  if (given) w.catalog = *given;
  const auto rows = csv::lines(text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const int row = static_cast<int>(i) + 1;
    if (csv::trim(rows[i]).empty()) continue;
    if (i == 0 && is_header(rows[i], "timestamp_s")) continue;
    const auto f = csv::split(rows[i]);
    auto fail = [&](std::string_view what) {
      throw ValidationError(fmt::format("trace row {}: {}", row, what));
    };
    if (f.size() != 4 || f[2].empty()) fail("expected timestamp_s,pop_id,content_id,bytes");
    const auto ts = csv::number<double>(f[0]);
    const auto pop = csv::number<int>(f[1]);
    const auto bytes = csv::number<std::int64_t>(f[3]);
    if (!ts || !std::isfinite(*ts) || *ts < 0.0) fail("bad timestamp");
    if (!pop) fail("bad PoP id");
    if (*pop < 0 || *pop >= topo.num_pops()) fail(fmt::format("unknown PoP {}", *pop));
    if (!bytes) fail("bad byte count");
    if (*bytes <= 0) fail("bytes must be positive");
    const auto b = static_cast<Bytes>(*bytes);
    ContentId id;
    if (const auto found = w.catalog.find(f[2])) {
      id = *found;
      if (given) {
        if (b > w.catalog[id].size) fail("request exceeds the catalog object size");
      } else {
        w.catalog[id].size = std::max(w.catalog[id].size, b);
      }
    } else {
      if (given) fail(fmt::format("object '{}' is not in the catalog", f[2]));
      id = w.catalog.add(std::string(f[2]), b, topo.origin());
    }
    w.trace.push_back(Request{*ts, *pop, id, b});
  }
  std::stable_sort(w.trace.begin(), w.trace.end(),
                   [](const Request& a, const Request& b) { return a.timestamp < b.timestamp; });
  return w;
}

Workload load_trace(const std::filesystem::path& trace_path, const Topology& topo,
                    const std::optional<std::filesystem::path>& catalog_path) {
  if (catalog_path) {
    const Catalog catalog = parse_catalog(read_file(*catalog_path, "catalog"), topo);
    return parse_trace(read_file(trace_path, "trace"), topo, &catalog);
  }
  return parse_trace(read_file(trace_path, "trace"), topo);
}

std::string format_trace(const Workload& w) {
  std::string out = "timestamp_s,pop_id,content_id,bytes\n";
  for (const Request& r : w.trace) {
    out += fmt::format("{},{},{},{}\n", r.timestamp, r.pop, w.catalog[r.content].name, r.bytes);
  }
  return out;
}

std::string format_catalog(const Catalog& c) {
  std::string out = "content_id,size_bytes,origin_pop\n";
  for (const auto& o : c.objects()) out += fmt::format("{},{},{}\n", o.name, o.size, o.origin);
  return out;
}

void validate(const SynthParams& p, const Topology& topo) {
  if (p.catalog_size < 1) throw ValidationError("catalog_size must be >= 1");
  if (p.requests_per_day < 1) throw ValidationError("requests_per_day must be >= 1");
  if (p.days < 1) throw ValidationError("days must be >= 1");
  if (!(p.zipf_alpha >= 0.0)) throw ValidationError("zipf_alpha must be >= 0");
  if (!(p.churn >= 0.0 && p.churn <= 1.0)) throw ValidationError("churn must lie in [0, 1]");
  if (p.object_size_min < 1 || p.object_size_max < p.object_size_min) {
    throw ValidationError("object size range must satisfy 1 <= min <= max");
  }
  if (!(p.diurnal_peak_ratio >= 1.0)) throw ValidationError("diurnal_peak_ratio must be >= 1");
  if (!(p.day_length > 0.0)) throw ValidationError("day_length must be positive");
  if (!p.pop_weights.empty()) {
    if (static_cast<int>(p.pop_weights.size()) != topo.num_pops()) {
      throw ValidationError("pop_weights must list one weight per PoP");
    }
    double sum = 0.0;
    for (double x : p.pop_weights) {
      if (!(x >= 0.0)) throw ValidationError("pop_weights must be non-negative");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ValidationError("pop_weights must sum to 1");
  }
}

namespace {

std::size_t sample_cdf(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u * cdf.back());
  return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

}  // namespace

Workload generate_synthetic_trace(const SynthParams& p, const Topology& topo) {
  validate(p, topo);
  Rng rng(p.seed);
  Workload w;
  const double log_lo = std::log(static_cast<double>(p.object_size_min));
  const double log_hi = std::log(static_cast<double>(p.object_size_max));
  auto fresh_object = [&]() {
    const auto size = static_cast<Bytes>(std::llround(std::exp(rng.uniform(log_lo, log_hi))));
    const std::string name = fmt::format("obj{}", w.catalog.size());
    return w.catalog.add(name, std::clamp(size, p.object_size_min, p.object_size_max), topo.origin());
  };

  const int n = p.catalog_size;
  std::vector<double> mass(n);
  for (int r = 0; r < n; ++r) mass[r] = std::pow(static_cast<double>(r + 1), -p.zipf_alpha);
  const double total_mass = std::accumulate(mass.begin(), mass.end(), 0.0);
  std::vector<double> rank_cdf(n);
  std::partial_sum(mass.begin(), mass.end(), rank_cdf.begin());

  std::vector<double> pop_cdf(topo.num_pops());
  for (PopId i = 0; i < topo.num_pops(); ++i) {
    pop_cdf[i] = (i ? pop_cdf[i - 1] : 0.0) +
                 (p.pop_weights.empty() ? 1.0 : p.pop_weights[i]);
  }

  std::vector<ContentId> ranking(n);
  for (int r = 0; r < n; ++r) ranking[r] = fresh_object();

  // rate(t) = 1 - a cos(2 pi t / day): trough at midnight, peak at noon.
  const double a = (p.diurnal_peak_ratio - 1.0) / (p.diurnal_peak_ratio + 1.0);
  const double two_pi = 2.0 * std::numbers::pi;

  for (int day = 0; day < p.days; ++day) {
    if (day > 0 && p.churn > 0.0) {
      // Visit rank positions in random order, replacing objects until the
      // reassigned share of Zipf mass reaches `churn`.
      std::vector<int> order(n);
      std::iota(order.begin(), order.end(), 0);
      for (int i = n - 1; i > 0; --i) {
        std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(i) + 1)]);
      }
      double moved = 0.0;
      std::vector<int> chosen;
      for (int r : order) {
        if (moved >= p.churn * total_mass) break;
        chosen.push_back(r);
        moved += mass[r];
      }
      std::sort(chosen.begin(), chosen.end());
      for (int r : chosen) ranking[r] = fresh_object();
    }

    const double day_start = day * p.day_length;
    std::vector<Request> today;
    today.reserve(p.requests_per_day);
    for (int k = 0; k < p.requests_per_day; ++k) {
      double offset;
      do {
        offset = rng.uniform() * p.day_length;
      } while (rng.uniform() * (1.0 + a) > 1.0 - a * std::cos(two_pi * offset / p.day_length));
      // Millisecond resolution keeps the CSV text an exact round trip.
      const double ms = std::floor((day_start + offset) * 1000.0);
      const ContentId obj = ranking[sample_cdf(rank_cdf, rng.uniform())];
      const auto pop = static_cast<PopId>(sample_cdf(pop_cdf, rng.uniform()));
      today.push_back(Request{ms / 1000.0, pop, obj, w.catalog[obj].size});
    }
    std::stable_sort(today.begin(), today.end(),
                     [](const Request& x, const Request& y) { return x.timestamp < y.timestamp; });
    w.trace.insert(w.trace.end(), today.begin(), today.end());
  }
  return w;
}

ChunkedCatalog::ChunkedCatalog(const Catalog& catalog, std::optional<Bytes> chunk_size)
    : chunk_size_(chunk_size) {
  if (chunk_size_ && *chunk_size_ == 0) throw ValidationError("chunk size must be positive");
  first_.reserve(catalog.size() + 1);
  first_.push_back(0);
  for (const auto& o : catalog.objects()) {
    const Bytes cs = chunk_size_.value_or(o.size);
    const Bytes count = (o.size + cs - 1) / cs;
    for (Bytes k = 0; k < count; ++k) {
      const Bytes size = (k + 1 < count) ? cs : o.size - cs * (count - 1);
      chunks_.push_back(Chunk{ChunkId{o.id, static_cast<int>(k)}, size});
    }
    first_.push_back(static_cast<int>(chunks_.size()));
    origins_.push_back(o.origin);
    total_ += o.size;
  }
}

std::vector<std::pair<ChunkId, Bytes>> ChunkedCatalog::expand(ContentId content, Bytes bytes) const {
  std::vector<std::pair<ChunkId, Bytes>> out;
  expand(content, bytes, [&](ChunkId c, Bytes b) { out.emplace_back(c, b); });
  return out;
}

std::string format_chunk(const Catalog& catalog, ChunkId id) {
  return fmt::format("{}#{}", catalog[id.content].name, id.index);
}

Bytes DemandMatrix::total() const {
  Bytes t = 0;
  for (const auto& [k, v] : demand) t += v;
  return t;
}

Bytes DemandMatrix::at(ChunkId c, PopId p) const {
  const auto it = demand.find(DemandKey{c, p});
  return it == demand.end() ? 0 : it->second;
}

DemandMatrix aggregate_demand(const Trace& trace, Seconds start, Seconds end,
                              const ChunkedCatalog& chunks) {
  if (!(end > start)) throw ValidationError("demand window must satisfy end > start");
  DemandMatrix dm{start, end, {}};
  const auto first = std::lower_bound(trace.begin(), trace.end(), start,
                                      [](const Request& r, Seconds t) { return r.timestamp < t; });
  for (auto it = first; it != trace.end() && it->timestamp < end; ++it) {
    chunks.expand(it->content, it->bytes,
                  [&](ChunkId c, Bytes b) { dm.demand[DemandKey{c, it->pop}] += b; });
  }
  return dm;
}

}  // namespace ncdn
