#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mixergan/common.hpp"

namespace mixergan {

// Checkpoint blob: "MXGN" magic, u32 version, u64 geometry hash, u64
// iteration, u64 entry count, then per entry (u32 name length, name bytes,
// u32 rank, u64 extents, little-endian f64 payload). Round-trips bit-exactly.
struct CheckpointEntry {
    Shape shape;
    std::vector<double> data;
};

struct Checkpoint {
    uint32_t version = 1;
    uint64_t geometry_hash = 0;
    uint64_t iteration = 0;
    // Ordered: serialization order is the insertion order of `names`.
    std::vector<std::string> names;
    std::map<std::string, CheckpointEntry> entries;

    void add(const std::string& name, const Shape& shape, std::vector<double> data);
    const CheckpointEntry& get(const std::string& name) const;
    bool has(const std::string& name) const { return entries.count(name) != 0; }
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace mixergan
