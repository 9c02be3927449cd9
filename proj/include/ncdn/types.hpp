#pragma once

#include <compare>
#include <cstdint>
#include <functional>

namespace ncdn {

using PopId = int;
using LinkId = int;
using ContentId = int;
using Bytes = std::uint64_t;
using Seconds = double;

// A chunk is addressed by its object and its position inside the object.
struct ChunkId {
  ContentId content = 0;
  int index = 0;

  auto operator<=>(const ChunkId&) const = default;
};

struct ChunkIdHash {
  std::size_t operator()(const ChunkId& c) const noexcept {
    return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(c.content) << 32) |
                                      static_cast<std::uint32_t>(c.index));
  }
};

}  // namespace ncdn
