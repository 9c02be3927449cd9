#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ncdn/topology.hpp"
#include "ncdn/types.hpp"

namespace ncdn {

struct ContentObject {
  ContentId id = 0;
  std::string name;
  Bytes size = 0;
  PopId origin = 0;
};

class Catalog {
 public:
  ContentId add(std::string name, Bytes size, PopId origin);
  std::optional<ContentId> find(std::string_view name) const;

  const ContentObject& operator[](ContentId id) const { return objects_[id]; }
  ContentObject& operator[](ContentId id) { return objects_[id]; }
  int size() const { return static_cast<int>(objects_.size()); }
  const std::vector<ContentObject>& objects() const { return objects_; }
  Bytes total_bytes() const;

 private:
  std::vector<ContentObject> objects_;
  std::unordered_map<std::string, ContentId> by_name_;
};

struct Request {
  Seconds timestamp = 0.0;
  PopId pop = 0;
  ContentId content = 0;
  Bytes bytes = 0;
};

// Requests sorted by timestamp; ties keep their input order.
using Trace = std::vector<Request>;

struct Workload {
  Catalog catalog;
  Trace trace;
};

// Catalog CSV: `content_id,size_bytes,origin_pop`.
Catalog parse_catalog(std::string_view csv, const Topology& topo);

// Trace CSV: `timestamp_s,pop_id,content_id,bytes`. Object sizes are the
// largest byte count seen per object unless `catalog` is given.
Workload parse_trace(std::string_view csv, const Topology& topo,
                     const Catalog* catalog = nullptr);
Workload load_trace(const std::filesystem::path& trace_path, const Topology& topo,
                    const std::optional<std::filesystem::path>& catalog_path = std::nullopt);

std::string format_trace(const Workload& w);
std::string format_catalog(const Catalog& c);

struct SynthParams {
  int catalog_size = 100;
  double zipf_alpha = 0.8;
  int requests_per_day = 10000;
  int days = 7;
  // Share of Zipf probability mass handed to never-seen objects each day.
  double churn = 0.2;
  Bytes object_size_min = 10'000'000;
  Bytes object_size_max = 1'000'000'000;
  double diurnal_peak_ratio = 3.0;
  // Per-PoP request share; empty means uniform.
  std::vector<double> pop_weights;
  std::uint64_t seed = 42;
  Seconds day_length = 86400.0;
};

void validate(const SynthParams& p, const Topology& topo);

Workload generate_synthetic_trace(const SynthParams& params, const Topology& topo);

struct Chunk {
  ChunkId id;
  Bytes size = 0;
};

// Splits every object into ceil(size / chunk_size) chunks; the last one holds
// the remainder. Without a chunk size each object is a single chunk. Chunks
// also get a dense "flat" index for array-backed bookkeeping.
class ChunkedCatalog {
 public:
  ChunkedCatalog(const Catalog& catalog, std::optional<Bytes> chunk_size);

  std::optional<Bytes> chunk_size() const { return chunk_size_; }
  int num_objects() const { return static_cast<int>(first_.size()) - 1; }
  int num_chunks() const { return static_cast<int>(chunks_.size()); }
  int chunks_of(ContentId c) const { return first_[c + 1] - first_[c]; }

  int flat(ChunkId id) const { return first_[id.content] + id.index; }
  const Chunk& chunk(int flat) const { return chunks_[flat]; }
  const Chunk& chunk(ChunkId id) const { return chunks_[flat(id)]; }
  const std::vector<Chunk>& chunks() const { return chunks_; }
  PopId origin(ChunkId id) const { return origins_[id.content]; }
  Bytes total_bytes() const { return total_; }

  // A request for `bytes` of an object touches its first ceil(bytes / chunk)
  // chunks, the last one partially. Bytes are preserved exactly.
  template <typename Visit>
  void expand(ContentId content, Bytes bytes, Visit&& visit) const {
    const int n = chunks_of(content);
    for (int k = 0; k < n && bytes > 0; ++k) {
      const Bytes part = std::min(bytes, chunks_[first_[content] + k].size);
      visit(ChunkId{content, k}, part);
      bytes -= part;
    }
  }

  std::vector<std::pair<ChunkId, Bytes>> expand(ContentId content, Bytes bytes) const;

 private:
  std::optional<Bytes> chunk_size_;
  std::vector<int> first_;
  std::vector<Chunk> chunks_;
  std::vector<PopId> origins_;
  Bytes total_ = 0;
};

std::string format_chunk(const Catalog& catalog, ChunkId id);

struct DemandKey {
  ChunkId chunk;
  PopId pop = 0;
  auto operator<=>(const DemandKey&) const = default;
};

struct DemandMatrix {
  Seconds start = 0.0;
  Seconds end = 0.0;
  std::map<DemandKey, Bytes> demand;

  Seconds length() const { return end - start; }
  Bytes total() const;
  Bytes at(ChunkId c, PopId p) const;
};

// Bytes per (chunk, PoP) requested in [start, end).
DemandMatrix aggregate_demand(const Trace& trace, Seconds start, Seconds end,
                              const ChunkedCatalog& chunks);

}  // namespace ncdn
