#include "mixergan/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace mixergan {

namespace {

constexpr char kMagic[4] = {'M', 'X', 'G', 'N'};

template <class T>
void write_raw(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T read_raw(std::istream& is, const std::string& path) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw IoError("checkpoint: truncated file " + path);
    return v;
}

}  // namespace

void Checkpoint::add(const std::string& name, const Shape& shape, std::vector<double> data) {
    if (entries.count(name)) throw ValidationError("checkpoint: duplicate entry '" + name + "'");
    if (static_cast<int64_t>(data.size()) != numel_of(shape))
        throw DimensionError("checkpoint: entry '" + name + "' data length " +
                             std::to_string(data.size()) + " != shape " + shape_str(shape));
    names.push_back(name);
    entries[name] = CheckpointEntry{shape, std::move(data)};
}

const CheckpointEntry& Checkpoint::get(const std::string& name) const {
    auto it = entries.find(name);
    if (it == entries.end())
        throw ValidationError("checkpoint: missing entry '" + name + "'");
    return it->second;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("checkpoint: cannot write " + path);
    os.write(kMagic, 4);
    write_raw(os, ck.version);
    write_raw(os, ck.geometry_hash);
    write_raw(os, ck.iteration);
    write_raw(os, static_cast<uint64_t>(ck.names.size()));
    for (const auto& name : ck.names) {
        const auto& e = ck.entries.at(name);
        write_raw(os, static_cast<uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_raw(os, static_cast<uint32_t>(e.shape.size()));
        for (int64_t ext : e.shape) write_raw(os, static_cast<uint64_t>(ext));
        os.write(reinterpret_cast<const char*>(e.data.data()),
                 static_cast<std::streamsize>(e.data.size() * sizeof(double)));
    }
    if (!os) throw IoError("checkpoint: write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checkpoint: cannot open " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("checkpoint: bad magic in " + path);
    Checkpoint ck;
    ck.version = read_raw<uint32_t>(is, path);
    if (ck.version != 1)
        throw IoError("checkpoint: unsupported version " + std::to_string(ck.version) + " in " +
                      path);
    ck.geometry_hash = read_raw<uint64_t>(is, path);
    ck.iteration = read_raw<uint64_t>(is, path);
    uint64_t count = read_raw<uint64_t>(is, path);
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t nlen = read_raw<uint32_t>(is, path);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        if (!is) throw IoError("checkpoint: truncated file " + path);
        uint32_t rank = read_raw<uint32_t>(is, path);
        Shape shape(rank);
        for (uint32_t r = 0; r < rank; ++r)
            shape[r] = static_cast<int64_t>(read_raw<uint64_t>(is, path));
        std::vector<double> data(static_cast<size_t>(numel_of(shape)));
        is.read(reinterpret_cast<char*>(data.data()),
                static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!is) throw IoError("checkpoint: truncated payload for '" + name + "' in " + path);
        ck.add(name, shape, std::move(data));
    }
    return ck;
}

}  // namespace mixergan
