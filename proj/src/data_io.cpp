#include "mixergan/data_io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace fs = std::filesystem;

namespace mixergan {

void ImageRecord::validate() const {
    if (height < 1 || width < 1)
        throw DimensionError("image: empty extents " + std::to_string(height) + "x" +
                             std::to_string(width));
    if (static_cast<int64_t>(pixels.size()) != 3 * height * width)
        throw DimensionError("image: pixel count " + std::to_string(pixels.size()) +
                             " does not match 3x" + std::to_string(height) + "x" +
                             std::to_string(width));
    for (double v : pixels)
        if (!(v >= -1.0 && v <= 1.0))
            throw ValidationError("image: value " + std::to_string(v) + " outside [-1,1]");
}

namespace {

double clamp1(double v) { return std::min(1.0, std::max(-1.0, v)); }

void paint_shape(ImageRecord& img, ShapeFamily family, double cx, double cy, double r,
                 double rgb[3]) {
    int64_t H = img.height, W = img.width;
    int64_t y0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cy - r)));
    int64_t y1 = std::min<int64_t>(H - 1, static_cast<int64_t>(std::ceil(cy + r)));
    int64_t x0 = std::max<int64_t>(0, static_cast<int64_t>(std::floor(cx - r)));
    int64_t x1 = std::min<int64_t>(W - 1, static_cast<int64_t>(std::ceil(cx + r)));
    for (int64_t y = y0; y <= y1; ++y)
        for (int64_t x = x0; x <= x1; ++x) {
            bool inside;
            if (family == ShapeFamily::Circles) {
                double dy = y - cy, dx = x - cx;
                inside = dy * dy + dx * dx <= r * r;
            } else {
                inside = std::fabs(y - cy) <= r && std::fabs(x - cx) <= r;
            }
            if (!inside) continue;
            for (int c = 0; c < 3; ++c) img.pixels[(c * H + y) * W + x] = clamp1(rgb[c]);
        }
}

}  // namespace

std::vector<ImageRecord> synthesize_domain(const SyntheticDomainSpec& spec) {
    if (spec.count < 1) throw ValidationError("synthesize_domain: count must be >= 1");
    if (spec.image_size < 8) throw ValidationError("synthesize_domain: image_size too small");
    std::vector<ImageRecord> out;
    out.reserve(spec.count);
    uint64_t domain_seed = derive_seed(spec.seed, "synth." + spec.domain_id);
    for (int64_t i = 0; i < spec.count; ++i) {
        Rng rng(derive_seed(domain_seed, std::to_string(i)));
        ImageRecord img;
        img.height = img.width = spec.image_size;
        img.pixels.assign(3 * spec.image_size * spec.image_size, 0.0);
        img.source = "synthetic:" + spec.domain_id + ":" + std::to_string(i);
        // textured neutral background shared by both domains
        double base = rng.uniform(-0.15, 0.15);
        for (int64_t px = 0; px < spec.image_size * spec.image_size; ++px) {
            double v = clamp1(base + rng.uniform(-spec.texture_amplitude, spec.texture_amplitude));
            for (int c = 0; c < 3; ++c) img.pixels[c * spec.image_size * spec.image_size + px] = v;
        }
        int64_t n_shapes = 2 + static_cast<int64_t>(rng.next_below(3));  // 2..4
        for (int64_t s = 0; s < n_shapes; ++s) {
            double r = rng.uniform(spec.image_size * 0.12, spec.image_size * 0.28);
            double cx = rng.uniform(r, spec.image_size - 1 - r);
            double cy = rng.uniform(r, spec.image_size - 1 - r);
            double rgb[3] = {rng.uniform(spec.red_lo, spec.red_hi),
                             rng.uniform(spec.green_lo, spec.green_hi),
                             rng.uniform(spec.blue_lo, spec.blue_hi)};
            paint_shape(img, spec.family, cx, cy, r, rgb);
        }
        img.validate();
        out.push_back(std::move(img));
    }
    return out;
}

SyntheticDomainSpec red_domain_spec(uint64_t seed, int64_t count, int64_t image_size) {
    SyntheticDomainSpec s;
    s.domain_id = "A";
    s.family = ShapeFamily::Circles;
    s.seed = seed;
    s.count = count;
    s.image_size = image_size;
    return s;  // defaults are the red palette
}

SyntheticDomainSpec blue_domain_spec(uint64_t seed, int64_t count, int64_t image_size) {
    SyntheticDomainSpec s;
    s.domain_id = "B";
    s.family = ShapeFamily::Circles;
    s.seed = seed;
    s.count = count;
    s.image_size = image_size;
    std::swap(s.red_lo, s.blue_lo);  // hue swap: blue shapes
    std::swap(s.red_hi, s.blue_hi);
    return s;
}

void save_image(const ImageRecord& img, const std::string& path) {
    img.validate();
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("save_image: cannot write " + path);
    os << "P6\n" << img.width << " " << img.height << "\n255\n";
    int64_t H = img.height, W = img.width;
    std::vector<unsigned char> row(3 * W);
    for (int64_t y = 0; y < H; ++y) {
        for (int64_t x = 0; x < W; ++x)
            for (int c = 0; c < 3; ++c) {
                double v = img.pixels[(c * H + y) * W + x];
                long u = std::lround((v + 1.0) * 127.5);
                u = std::min(255l, std::max(0l, u));
                row[x * 3 + c] = static_cast<unsigned char>(u);
            }
        os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!os) throw IoError("save_image: write failed for " + path);
}

namespace {

// PPM header token: skips whitespace and '#' comments, tracking byte offset.
std::string next_token(const std::string& buf, size_t& off) {
    while (off < buf.size()) {
        char ch = buf[off];
        if (ch == '#') {
            while (off < buf.size() && buf[off] != '\n') ++off;
        } else if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') {
            ++off;
        } else {
            break;
        }
    }
    if (off >= buf.size()) throw ParseError("ppm: unexpected end of header", off);
    size_t start = off;
    while (off < buf.size() && !std::isspace(static_cast<unsigned char>(buf[off]))) ++off;
    return buf.substr(start, off - start);
}

int64_t header_int(const std::string& buf, size_t& off, const char* what) {
    size_t at = off;
    std::string tok = next_token(buf, off);
    try {
        size_t pos = 0;
        int64_t v = std::stoll(tok, &pos);
        if (pos != tok.size() || v < 0) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(std::string("ppm: bad ") + what + " '" + tok + "'", at);
    }
}

}  // namespace

ImageRecord load_image(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("load_image: cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    size_t off = 0;
    std::string magic = next_token(buf, off);
    if (magic != "P6") throw ParseError("ppm: expected magic 'P6', got '" + magic + "'", 0);
    int64_t w = header_int(buf, off, "width");
    int64_t h = header_int(buf, off, "height");
    int64_t maxval = header_int(buf, off, "maxval");
    if (w < 1 || h < 1) throw ParseError("ppm: invalid dimensions", off);
    if (maxval != 255) throw ParseError("ppm: only maxval 255 supported", off);
    if (off >= buf.size()) throw ParseError("ppm: missing payload", off);
    ++off;  // exactly one whitespace byte after maxval
    size_t need = static_cast<size_t>(3 * w * h);
    if (buf.size() - off != need)
        throw ParseError("ppm: payload length " + std::to_string(buf.size() - off) +
                             " disagrees with declared " + std::to_string(w) + "x" +
                             std::to_string(h),
                         off);
    ImageRecord img;
    img.height = h;
    img.width = w;
    img.source = path;
    img.pixels.assign(3 * h * w, 0.0);
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                unsigned char u = static_cast<unsigned char>(buf[off + (y * w + x) * 3 + c]);
                img.pixels[(c * h + y) * w + x] = static_cast<double>(u) / 127.5 - 1.0;
            }
    img.validate();
    return img;
}

std::vector<std::string> list_ppm_files(const std::string& dir) {
    if (!fs::is_directory(dir)) throw IoError("dataset: not a directory: " + dir);
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".ppm")
            files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    return files;
}

std::vector<ImageRecord> load_image_dir(const std::string& dir) {
    std::vector<ImageRecord> out;
    for (const auto& f : list_ppm_files(dir)) out.push_back(load_image(f));
    return out;
}

Tensor images_to_tensor(const std::vector<ImageRecord>& images,
                        const std::vector<int64_t>& indices) {
    if (indices.empty()) throw ValidationError("images_to_tensor: empty batch");
    const ImageRecord& first = images.at(indices[0]);
    int64_t H = first.height, W = first.width;
    std::vector<double> data;
    data.reserve(indices.size() * 3 * H * W);
    for (int64_t idx : indices) {
        const ImageRecord& img = images.at(idx);
        if (img.height != H || img.width != W)
            throw DimensionError("images_to_tensor: mixed extents " + std::to_string(img.height) +
                                 "x" + std::to_string(img.width) + " vs " + std::to_string(H) +
                                 "x" + std::to_string(W));
        data.insert(data.end(), img.pixels.begin(), img.pixels.end());
    }
    return Tensor::from_data({static_cast<int64_t>(indices.size()), 3, H, W}, std::move(data));
}

std::vector<ImageRecord> tensor_to_images(const Tensor& t) {
    if (t.shape().size() != 4 || t.dim(1) != 3)
        throw DimensionError("tensor_to_images: expected [b,3,H,W], got " + shape_str(t.shape()));
    int64_t b = t.dim(0), H = t.dim(2), W = t.dim(3);
    std::vector<ImageRecord> out(b);
    const auto& d = t.data();
    for (int64_t i = 0; i < b; ++i) {
        out[i].height = H;
        out[i].width = W;
        out[i].pixels.assign(d.begin() + i * 3 * H * W, d.begin() + (i + 1) * 3 * H * W);
        for (auto& v : out[i].pixels) v = clamp1(v);
    }
    return out;
}

UnpairedSampler::UnpairedSampler(uint64_t master_seed, const std::string& domain_label,
                                 int64_t dataset_size, int64_t batch_size)
    : seed_(derive_seed(master_seed, "sampler." + domain_label)),
      label_(domain_label),
      size_(dataset_size),
      batch_(batch_size) {
    if (size_ < 1) throw ValidationError("sampler: dataset '" + label_ + "' is empty");
    if (batch_ < 1) throw ValidationError("sampler: batch size must be >= 1");
    if (batch_ > size_)
        throw ValidationError("sampler: batch " + std::to_string(batch_) + " exceeds dataset '" +
                              label_ + "' size " + std::to_string(size_));
    batches_per_epoch_ = size_ / batch_;
    load_epoch(0);
}

void UnpairedSampler::load_epoch(int64_t epoch) {
    epoch_ = epoch;
    cursor_ = 0;
    Rng rng(derive_seed(seed_, "epoch." + std::to_string(epoch)));
    perm_ = rng.permutation(size_);
}

std::vector<int64_t> UnpairedSampler::next_batch() {
    if (cursor_ >= batches_per_epoch_) load_epoch(epoch_ + 1);
    std::vector<int64_t> out(perm_.begin() + cursor_ * batch_,
                             perm_.begin() + (cursor_ + 1) * batch_);
    ++cursor_;
    return out;
}

void UnpairedSampler::seek(int64_t iterations) {
    if (iterations < 0) throw ValidationError("sampler: cannot seek backwards");
    load_epoch(iterations / batches_per_epoch_);
    cursor_ = iterations % batches_per_epoch_;
}

}  // namespace mixergan
