#include "mixergan/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "mixergan/common.hpp"

namespace mixergan {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct Field {
    std::string name;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
    bool geometry = false;
};

int64_t parse_i64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        int64_t r = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ValidationError("config: bad integer for '" + key + "': " + v);
    }
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ValidationError("config: bad unsigned integer for '" + key + "': " + v);
    }
}

double parse_f64(const std::string& key, const std::string& v) {
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ValidationError("config: bad number for '" + key + "': " + v);
    }
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ValidationError("config: bad boolean for '" + key + "': " + v);
}

#define FIELD_I64(nm, geo) \
    Field{#nm, [](const RunConfig& c) { return std::to_string(c.nm); }, \
          [](RunConfig& c, const std::string& v) { c.nm = parse_i64(#nm, v); }, geo}
#define FIELD_U64(nm, geo) \
    Field{#nm, [](const RunConfig& c) { return std::to_string(c.nm); }, \
          [](RunConfig& c, const std::string& v) { c.nm = parse_u64(#nm, v); }, geo}
#define FIELD_F64(nm, geo) \
    Field{#nm, [](const RunConfig& c) { return fmt_double(c.nm); }, \
          [](RunConfig& c, const std::string& v) { c.nm = parse_f64(#nm, v); }, geo}
#define FIELD_BOOL(nm, geo) \
    Field{#nm, [](const RunConfig& c) { return c.nm ? std::string("true") : std::string("false"); }, \
          [](RunConfig& c, const std::string& v) { c.nm = parse_bool(#nm, v); }, geo}
#define FIELD_STR(nm, geo) \
    Field{#nm, [](const RunConfig& c) { return c.nm; }, \
          [](RunConfig& c, const std::string& v) { c.nm = v; }, geo}

const std::vector<Field>& fields() {
    static const std::vector<Field> f = {
        FIELD_I64(image_size, true),
        FIELD_I64(patch_size, true),
        FIELD_I64(channels, true),
        FIELD_I64(base_channels, true),
        FIELD_I64(disc_channels, true),
        FIELD_I64(mixer_blocks, true),
        FIELD_I64(token_expansion, true),
        FIELD_I64(channel_expansion, true),
        FIELD_STR(mixer_order, true),
        FIELD_F64(layernorm_eps, false),
        FIELD_F64(instance_norm_eps, false),
        FIELD_F64(lr, false),
        FIELD_F64(beta1, false),
        FIELD_F64(beta2, false),
        FIELD_F64(adam_eps, false),
        FIELD_I64(iterations, false),
        FIELD_I64(decay_start, false),
        FIELD_I64(batch_size, false),
        FIELD_F64(lambda_cyc, false),
        FIELD_F64(lambda_perc, false),
        FIELD_U64(seed, false),
        FIELD_BOOL(use_history_buffer, false),
        FIELD_BOOL(flip_augment, false),
        FIELD_I64(report_interval, false),
        FIELD_I64(checkpoint_interval, false),
        FIELD_U64(extractor_seed, false),
        FIELD_I64(kid_subset_size, false),
        FIELD_I64(kid_subsets, false),
        FIELD_BOOL(synthetic, false),
        FIELD_I64(synthetic_count, false),
        FIELD_STR(data_root, false),
        FIELD_STR(out_root, false),
        FIELD_STR(resume, false),
    };
    return f;
}

const Field* find_field(const std::string& key) {
    for (const auto& f : fields())
        if (f.name == key) return &f;
    return nullptr;
}

}  // namespace

GeneratorGeometry RunConfig::generator_geometry() const {
    GeneratorGeometry g;
    g.image_size = image_size;
    g.patch_size = patch_size;
    g.d_token = channels;
    g.base_channels = base_channels;
    g.mixer_blocks = mixer_blocks;
    g.token_expansion = token_expansion;
    g.channel_expansion = channel_expansion;
    g.token_first = (mixer_order == "token_first");
    g.layernorm_eps = layernorm_eps;
    g.instance_norm_eps = instance_norm_eps;
    return g;
}

void RunConfig::validate() const {
    if (batch_size < 1) throw ValidationError("config: batch_size must be >= 1");
    if (iterations < 0) throw ValidationError("config: iterations must be >= 0");
    if (effective_decay_start() > iterations)
        throw ValidationError("config: decay_start exceeds iterations");
    if (lr <= 0.0) throw ValidationError("config: lr must be positive");
    if (lambda_cyc < 0.0 || lambda_perc < 0.0)
        throw ValidationError("config: lambda weights must be non-negative");
    if (patch_size < 1) throw ValidationError("config: patch_size must be >= 1");
    if (image_size % (4 * patch_size) != 0)
        throw ValidationError("config: image_size must be divisible by 4*patch_size");
    if (mixer_order != "token_first" && mixer_order != "channel_first")
        throw ValidationError("config: mixer_order must be token_first or channel_first");
    if (kid_subset_size < 2) throw ValidationError("config: kid_subset_size must be >= 2");
    if (kid_subsets < 1) throw ValidationError("config: kid_subsets must be >= 1");
    if (synthetic_count < 1 && synthetic)
        throw ValidationError("config: synthetic_count must be >= 1");
}

std::vector<std::string> config_keys() {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.name);
    return out;
}

void config_set(RunConfig& cfg, const std::string& key, const std::string& value) {
    const Field* f = find_field(key);
    if (!f) throw ValidationError("config: unknown key '" + key + "'");
    f->set(cfg, value);
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config: " + path + ":" + std::to_string(lineno) +
                                  ": expected 'key = value', got '" + t + "'");
        config_set(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
}

std::string serialize_config(const RunConfig& cfg) {
    // fields() is already in canonical order
    std::ostringstream os;
    for (const auto& f : fields()) os << f.name << " = " << f.get(cfg) << "\n";
    return os.str();
}

uint64_t geometry_hash(const RunConfig& cfg) {
    std::ostringstream os;
    for (const auto& f : fields())
        if (f.geometry) os << f.name << " = " << f.get(cfg) << "\n";
    return fnv1a64(os.str());
}

}  // namespace mixergan
