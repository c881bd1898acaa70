#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mixergan {

using Shape = std::vector<int64_t>;

// Shape/extent violations (mismatched operands, bad geometry).
struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& m) : std::runtime_error(m) {}
};

// Invalid argument values outside of shape problems.
struct ValidationError : std::runtime_error {
    explicit ValidationError(const std::string& m) : std::runtime_error(m) {}
};

// Malformed file contents; carries the byte offset where parsing stopped.
struct ParseError : std::runtime_error {
    size_t offset;
    ParseError(const std::string& m, size_t off)
        : std::runtime_error(m + " (byte offset " + std::to_string(off) + ")"), offset(off) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

struct TrainingError : std::runtime_error {
    explicit TrainingError(const std::string& m) : std::runtime_error(m) {}
};

inline int64_t numel_of(const Shape& s) {
    int64_t n = 1;
    for (int64_t e : s) n *= e;
    return n;
}

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < s.size(); ++i) os << (i ? " " : "") << s[i];
    os << "]";
    return os.str();
}

inline uint64_t fnv1a64(const void* ptr, size_t len, uint64_t h = 1469598103934665603ull) {
    const unsigned char* p = static_cast<const unsigned char*>(ptr);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 1469598103934665603ull) {
    return fnv1a64(s.data(), s.size(), h);
}

// Sub-seed derivation: mixes a label into a master seed so independent
// random streams (domains, networks, subsets) never alias.
inline uint64_t derive_seed(uint64_t master, const std::string& label) {
    uint64_t h = fnv1a64(&master, sizeof(master));
    return fnv1a64(label, h);
}

}  // namespace mixergan
