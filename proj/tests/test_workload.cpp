#include <doctest.h>

#include <cmath>
#include <set>

#include "ncdn/error.hpp"
#include "ncdn/workload.hpp"
#include "support.hpp"

using namespace ncdn;

namespace {

const Topology& three() {
  static const Topology t = test::triangle();
  return t;
}

Catalog one_object(Bytes size) {
  Catalog c;
  c.add("vid", size, 0);
  return c;
}

std::vector<std::set<ContentId>> objects_per_day(const Workload& w, int days, double day_len) {
  std::vector<std::set<ContentId>> out(days);
  for (const Request& r : w.trace) out[static_cast<int>(r.timestamp / day_len)].insert(r.content);
  return out;
}

}  // namespace

TEST_CASE("single row trace") {
  const Workload w = parse_trace("0,0,vidA,1000\n", three());
  REQUIRE(w.trace.size() == 1);
  REQUIRE(w.catalog.size() == 1);
  CHECK(w.catalog[0].name == "vidA");
  CHECK(w.catalog[0].size == 1000);
  CHECK(w.catalog[0].origin == 0);
  CHECK(w.trace[0].bytes == 1000);
}

TEST_CASE("trace rows are sorted stably") {
  const Workload w = parse_trace(
      "timestamp_s,pop_id,content_id,bytes\n5,1,a,10\n1,2,b,20\n5,0,c,30\n0.5,1,a,40\n", three());
  REQUIRE(w.trace.size() == 4);
  CHECK(w.trace[0].timestamp == 0.5);
  CHECK(w.trace[1].timestamp == 1.0);
  CHECK(w.trace[2].pop == 1);  // first of the two t=5 rows
  CHECK(w.trace[3].pop == 0);
  CHECK(w.catalog[*w.catalog.find("a")].size == 40);
}

TEST_CASE("trace errors name the row") {
  auto message = [](std::string_view csv) {
    try {
      parse_trace(csv, three());
    } catch (const ValidationError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("0,0,a,10\n1,0,b,0\n").find("row 2") != std::string::npos);
  CHECK(message("0,9,a,10\n").find("row 1") != std::string::npos);
  CHECK(message("0,0,a\n").find("row 1") != std::string::npos);
  CHECK(message("-1,0,a,5\n").find("row 1") != std::string::npos);
  CHECK(message("x,0,a,5\n").find("row 1") != std::string::npos);
}

TEST_CASE("catalog overrides inferred sizes") {
  const Catalog cat = parse_catalog("content_id,size_bytes,origin_pop\na,5000,2\n", three());
  const Workload w = parse_trace("0,0,a,1000\n", three(), &cat);
  CHECK(w.catalog[0].size == 5000);
  CHECK(w.catalog[0].origin == 2);
  CHECK_THROWS_AS(parse_trace("0,0,zzz,1000\n", three(), &cat), ValidationError);
  CHECK_THROWS_AS(parse_trace("0,0,a,6000\n", three(), &cat), ValidationError);
}

TEST_CASE("format and parse round trip") {
  SynthParams p;
  p.catalog_size = 20;
  p.requests_per_day = 300;
  p.days = 2;
  const Workload w = generate_synthetic_trace(p, three());
  const Catalog cat = parse_catalog(format_catalog(w.catalog), three());
  const Workload back = parse_trace(format_trace(w), three(), &cat);
  REQUIRE(back.trace.size() == w.trace.size());
  for (std::size_t i = 0; i < w.trace.size(); ++i) {
    CHECK(back.trace[i].timestamp == w.trace[i].timestamp);
    CHECK(back.trace[i].pop == w.trace[i].pop);
    CHECK(w.catalog[back.trace[i].content].name == w.catalog[w.trace[i].content].name);
    CHECK(back.trace[i].bytes == w.trace[i].bytes);
  }
  CHECK(format_trace(back) == format_trace(w));
}

TEST_CASE("generator is deterministic") {
  SynthParams p;
  p.requests_per_day = 500;
  p.days = 3;
  p.seed = 1234;
  CHECK(format_trace(generate_synthetic_trace(p, three())) ==
        format_trace(generate_synthetic_trace(p, three())));
  SynthParams q = p;
  q.seed = 1235;
  CHECK(format_trace(generate_synthetic_trace(p, three())) !=
        format_trace(generate_synthetic_trace(q, three())));
}

TEST_CASE("request count per day is exact") {
  SynthParams p;
  p.requests_per_day = 777;
  p.days = 4;
  p.day_length = 1000.0;
  const Workload w = generate_synthetic_trace(p, three());
  std::vector<int> count(p.days, 0);
  for (const Request& r : w.trace) {
    CHECK(r.timestamp >= 0.0);
    CHECK(r.bytes == w.catalog[r.content].size);
    ++count[static_cast<int>(r.timestamp / p.day_length)];
  }
  for (int c : count) CHECK(c == 777);
  for (std::size_t i = 1; i < w.trace.size(); ++i) CHECK(w.trace[i - 1].timestamp <= w.trace[i].timestamp);
}

TEST_CASE("churn zero keeps the assignment") {
  SynthParams p;
  p.catalog_size = 30;
  p.churn = 0.0;
  p.requests_per_day = 2000;
  p.days = 5;
  const Workload w = generate_synthetic_trace(p, three());
  CHECK(w.catalog.size() == 30);
  // No fresh objects are ever introduced.
  const auto days = objects_per_day(w, p.days, p.day_length);
  for (const auto& d : days) CHECK(*d.rbegin() < 30);
}

TEST_CASE("churn one gives disjoint days") {
  SynthParams p;
  p.catalog_size = 40;
  p.churn = 1.0;
  p.requests_per_day = 1000;
  p.days = 4;
  const Workload w = generate_synthetic_trace(p, three());
  CHECK(w.catalog.size() == 40 * 4);
  const auto days = objects_per_day(w, p.days, p.day_length);
  for (int d = 1; d < p.days; ++d) {
    for (ContentId c : days[d]) CHECK(days[d - 1].count(c) == 0);
  }
}

TEST_CASE("partial churn replaces roughly that share of mass") {
  SynthParams p;
  p.catalog_size = 200;
  p.churn = 0.2;
  p.requests_per_day = 40000;
  p.days = 2;
  const Workload w = generate_synthetic_trace(p, three());
  int fresh = 0, day1 = 0;
  for (const Request& r : w.trace) {
    if (r.timestamp < p.day_length) continue;
    ++day1;
    if (r.content >= p.catalog_size) ++fresh;
  }
  const double share = static_cast<double>(fresh) / day1;
  CHECK(share >= 0.18);
  CHECK(share <= 0.30);
}

TEST_CASE("alpha zero is uniform (chi-square)") {
  SynthParams p;
  p.catalog_size = 50;
  p.zipf_alpha = 0.0;
  p.churn = 0.0;
  p.requests_per_day = 100000;
  p.days = 1;
  const Workload w = generate_synthetic_trace(p, three());
  std::vector<double> count(p.catalog_size, 0.0);
  for (const Request& r : w.trace) count[r.content] += 1.0;
  const double expect = static_cast<double>(p.requests_per_day) / p.catalog_size;
  const double sd = std::sqrt(expect * (1.0 - 1.0 / p.catalog_size));
  double chi2 = 0.0;
  for (double c : count) {
    CHECK(std::abs(c - expect) <= 4.0 * sd);
    chi2 += (c - expect) * (c - expect) / expect;
  }
  const double dof = p.catalog_size - 1;
  CHECK(chi2 <= dof + 3.0 * std::sqrt(2.0 * dof));
}

TEST_CASE("arrivals follow the diurnal shape") {
  SynthParams p;
  p.requests_per_day = 60000;
  p.days = 1;
  p.diurnal_peak_ratio = 3.0;
  const Workload w = generate_synthetic_trace(p, three());
  int trough = 0, peak = 0;
  for (const Request& r : w.trace) {
    const double h = r.timestamp / 3600.0;
    if (h < 1.0 || h >= 23.0) ++trough;
    if (h >= 11.0 && h < 13.0) ++peak;
  }
  // Over +-1h of the extremes: ratio of the integrals of 1 - a cos.
  const double a = 0.5, x = std::numbers::pi / 12.0;
  const double want = (1.0 + a * std::sin(x) / x) / (1.0 - a * std::sin(x) / x);
  CHECK(static_cast<double>(peak) / trough == doctest::Approx(want).epsilon(0.1));
}

TEST_CASE("pop weights steer requests") {
  SynthParams p;
  p.requests_per_day = 5000;
  p.days = 1;
  p.pop_weights = {0.0, 0.25, 0.75};
  const Workload w = generate_synthetic_trace(p, three());
  int ones = 0;
  for (const Request& r : w.trace) {
    CHECK(r.pop != 0);
    ones += r.pop == 1;
  }
  CHECK(ones / 5000.0 == doctest::Approx(0.25).epsilon(0.1));
  p.pop_weights = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(generate_synthetic_trace(p, three()), ValidationError);
}

TEST_CASE("synthetic parameters are validated") {
  SynthParams p;
  p.days = 0;
  CHECK_THROWS_AS(validate(p, three()), ValidationError);
  p = {};
  p.churn = 1.5;
  CHECK_THROWS_AS(validate(p, three()), ValidationError);
  p = {};
  p.diurnal_peak_ratio = 0.5;
  CHECK_THROWS_AS(validate(p, three()), ValidationError);
  p = {};
  p.object_size_min = 10;
  p.object_size_max = 5;
  CHECK_THROWS_AS(validate(p, three()), ValidationError);
}

TEST_CASE("chunking examples") {
  const Catalog cat = one_object(2500);
  const ChunkedCatalog big(cat, Bytes{5000});
  CHECK(big.num_chunks() == 1);
  CHECK(big.chunk(0).size == 2500);
  const ChunkedCatalog none(cat, std::nullopt);
  CHECK(none.num_chunks() == 1);

  const ChunkedCatalog k(cat, Bytes{1000});
  REQUIRE(k.num_chunks() == 3);
  CHECK(k.chunk(0).size == 1000);
  CHECK(k.chunk(1).size == 1000);
  CHECK(k.chunk(2).size == 500);
  const auto parts = k.expand(0, 1500);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0] == std::pair{ChunkId{0, 0}, Bytes{1000}});
  CHECK(parts[1] == std::pair{ChunkId{0, 1}, Bytes{500}});
  CHECK(format_chunk(cat, ChunkId{0, 2}) == "vid#2");

  const ChunkedCatalog even(one_object(3000), Bytes{1000});
  CHECK(even.num_chunks() == 3);
  CHECK(even.chunk(2).size == 1000);
  CHECK_THROWS_AS(ChunkedCatalog(cat, Bytes{0}), ValidationError);
}

TEST_CASE("chunking conserves bytes") {
  Rng rng(3);
  SynthParams p;
  p.catalog_size = 40;
  p.requests_per_day = 2000;
  p.days = 2;
  p.object_size_min = 1;
  p.object_size_max = 100000;
  const Workload w = generate_synthetic_trace(p, three());
  for (int trial = 0; trial < 10; ++trial) {
    const ChunkedCatalog k(w.catalog, Bytes{1 + rng.below(20000)});
    Bytes chunked_total = 0;
    for (const auto& c : k.chunks()) {
      CHECK(c.size > 0);
      CHECK(c.size <= *k.chunk_size());
    }
    for (int o = 0; o < w.catalog.size(); ++o) {
      Bytes sum = 0;
      for (int i = 0; i < k.chunks_of(o); ++i) sum += k.chunk(ChunkId{o, i}).size;
      CHECK(sum == w.catalog[o].size);
    }
    Bytes raw_total = 0;
    for (const Request& r : w.trace) {
      raw_total += r.bytes;
      // Partial requests too.
      const Bytes part = 1 + rng.below(r.bytes);
      Bytes got = 0;
      k.expand(r.content, part, [&](ChunkId, Bytes b) { got += b; });
      CHECK(got == part);
      k.expand(r.content, r.bytes, [&](ChunkId, Bytes b) { chunked_total += b; });
    }
    CHECK(chunked_total == raw_total);
  }
}

TEST_CASE("aggregate demand") {
  const Catalog cat = one_object(1000);
  const ChunkedCatalog k(cat, std::nullopt);
  CHECK(aggregate_demand({}, 0, 10, k).demand.empty());
  const Trace t = {{1.0, 1, 0, 100}, {2.0, 1, 0, 200}, {10.0, 1, 0, 50}};
  const DemandMatrix dm = aggregate_demand(t, 0, 10, k);
  CHECK(dm.at(ChunkId{0, 0}, 1) == 300);
  CHECK(dm.total() == 300);
  CHECK(aggregate_demand(t, 5, 7, k).demand.empty());
  CHECK_THROWS_AS(aggregate_demand(t, 5, 5, k), ValidationError);
}

TEST_CASE("aggregate demand is additive over windows") {
  Rng rng(8);
  SynthParams p;
  p.catalog_size = 30;
  p.requests_per_day = 3000;
  p.days = 2;
  p.object_size_min = 1000;
  p.object_size_max = 50000;
  const Workload w = generate_synthetic_trace(p, three());
  const ChunkedCatalog k(w.catalog, Bytes{7000});
  for (int trial = 0; trial < 20; ++trial) {
    const double a = rng.uniform(0, 50000), b = a + rng.uniform(1, 60000), c = b + rng.uniform(1, 60000);
    const DemandMatrix ab = aggregate_demand(w.trace, a, b, k);
    const DemandMatrix bc = aggregate_demand(w.trace, b, c, k);
    const DemandMatrix ac = aggregate_demand(w.trace, a, c, k);
    std::map<DemandKey, Bytes> sum = ab.demand;
    for (const auto& [key, v] : bc.demand) sum[key] += v;
    CHECK(sum == ac.demand);
  }
}
