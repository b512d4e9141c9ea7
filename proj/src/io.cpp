#include "twmx/io.hpp"

#include <png.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <unistd.h>

namespace twmx {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail_decode(const std::string& what) { throw Error(ErrorKind::Decode, what); }

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<uint8_t>& out, float f) { put_u32(out, std::bit_cast<uint32_t>(f)); }

class Reader {
public:
    explicit Reader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

    uint32_t u32(const char* what) {
        need(4, what);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string str(size_t len, const char* what) {
        need(len, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), len);
        pos_ += len;
        return s;
    }
    float f32() { return std::bit_cast<float>(u32("tensor payload")); }
    void need(size_t n, const char* what) const {
        if (bytes_.size() - pos_ < n) fail_decode(std::string("truncated weight file while reading ") + what);
    }
    size_t remaining() const { return bytes_.size() - pos_; }

private:
    const std::vector<uint8_t>& bytes_;
    size_t pos_ = 0;
};

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// PNM header tokenizer: whitespace-separated fields, '#' comments to end of line.
class PnmHeader {
public:
    explicit PnmHeader(const std::vector<uint8_t>& bytes) : bytes_(bytes) {}

    std::string magic() {
        if (bytes_.size() < 2) fail_decode("image file too short");
        pos_ = 2;
        return std::string(reinterpret_cast<const char*>(bytes_.data()), 2);
    }
    int64_t number() {
        skip();
        int64_t v = 0;
        size_t digits = 0;
        while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
            v = v * 10 + (bytes_[pos_++] - '0');
            if (++digits > 9) fail_decode("image header number too large");
        }
        if (digits == 0) fail_decode("malformed image header");
        return v;
    }
    // Exactly one whitespace byte separates the header from the raster.
    size_t raster_start() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail_decode("malformed image header");
        return pos_ + 1;
    }

private:
    void skip() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    const std::vector<uint8_t>& bytes_;
    size_t pos_ = 0;
};

uint8_t to_byte(float v) {
    const float clamped = std::fmin(1.0f, std::fmax(0.0f, v));
    return static_cast<uint8_t>(std::lround(clamped * 255.0f));
}

Tensor decode_png(const std::vector<uint8_t>& bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        fail_decode(std::string("PNG decode failed: ") + image.message);
    image.format = PNG_FORMAT_RGB;
    std::vector<uint8_t> raster(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, raster.data(), 0, nullptr)) {
        png_image_free(&image);
        fail_decode(std::string("PNG decode failed: ") + image.message);
    }
    const int64_t h = image.height, w = image.width;
    Tensor out(Shape{1, 3, h, w});
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int64_t c = 0; c < 3; ++c)
                out.at(0, c, y, x) = static_cast<float>(raster[static_cast<size_t>((y * w + x) * 3 + c)]) / 255.0f;
    return out;
}

} // namespace

std::vector<uint8_t> encode_weight_file(const std::map<std::string, Tensor>& tensors) {
    std::vector<uint8_t> out(kWeightMagic, kWeightMagic + 4);
    put_u32(out, kWeightVersion);
    put_u32(out, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        put_u32(out, static_cast<uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        const Shape& s = t.shape();
        if (ends_with(name, ".weight")) {
            put_u32(out, 4);
            for (int64_t d : {s.n, s.c, s.h, s.w}) put_u32(out, static_cast<uint32_t>(d));
        } else {
            put_u32(out, 1);
            put_u32(out, static_cast<uint32_t>(t.numel()));
        }
        for (float v : t.data()) put_f32(out, v);
    }
    return out;
}

std::map<std::string, Tensor> decode_weight_file(const std::vector<uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), kWeightMagic, 4) != 0) fail_decode("bad magic: not a TWMX weight file");
    Reader r(bytes);
    r.str(4, "magic");
    const uint32_t version = r.u32("version");
    if (version != kWeightVersion) fail_decode("unsupported weight file version " + std::to_string(version));
    const uint32_t count = r.u32("tensor count");
    std::map<std::string, Tensor> tensors;
    for (uint32_t i = 0; i < count; ++i) {
        const uint32_t name_len = r.u32("name length");
        std::string name = r.str(name_len, "tensor name");
        const uint32_t rank = r.u32("rank");
        Shape shape;
        if (rank == 4) {
            shape.n = r.u32("dims");
            shape.c = r.u32("dims");
            shape.h = r.u32("dims");
            shape.w = r.u32("dims");
        } else if (rank == 1) {
            shape = Shape{r.u32("dims"), 1, 1, 1};
        } else {
            fail_decode("tensor '" + name + "' has unsupported rank " + std::to_string(rank));
        }
        const auto count_values = static_cast<uint64_t>(shape.numel());
        r.need(count_values * 4, "tensor payload");
        std::vector<float> data(count_values);
        for (float& v : data) v = r.f32();
        if (tensors.contains(name)) fail_decode("duplicate tensor name '" + name + "'");
        tensors.emplace(std::move(name), Tensor(shape, std::move(data)));
    }
    if (r.remaining() != 0) fail_decode("weight file has " + std::to_string(r.remaining()) + " trailing bytes");
    return tensors;
}

std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::NotFound, "cannot open '" + path + "'");
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    const fs::path target(path);
    const fs::path tmp = target.string() + ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::NotFound, "cannot write '" + tmp.string() + "'");
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw Error(ErrorKind::NotFound, "write failed for '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorKind::NotFound, "cannot rename onto '" + path + "'");
    }
}

std::map<std::string, Tensor> read_weight_file(const std::string& path) {
    return decode_weight_file(read_file_bytes(path));
}

void write_weight_file(const std::string& path, const std::map<std::string, Tensor>& tensors) {
    const std::vector<uint8_t> bytes = encode_weight_file(tensors);
    write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

void save_weights(const WeightStore& store, const std::string& path) { write_weight_file(path, store.flatten()); }

WeightStore load_weights(const std::string& path, const std::vector<LayerDecl>& layers) {
    return unflatten(read_weight_file(path), layers);
}

Tensor decode_ppm(const std::vector<uint8_t>& bytes) {
    PnmHeader header(bytes);
    if (header.magic() != "P6") fail_decode("not a binary PPM (P6) image");
    const int64_t w = header.number();
    const int64_t h = header.number();
    const int64_t maxval = header.number();
    if (w < 1 || h < 1) fail_decode("PPM has empty dimensions");
    if (maxval != 255) fail_decode("PPM maxval must be 255, got " + std::to_string(maxval));
    const size_t start = header.raster_start();
    if (bytes.size() - start < static_cast<size_t>(w * h * 3)) fail_decode("PPM raster truncated");
    Tensor out(Shape{1, 3, h, w});
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            for (int64_t c = 0; c < 3; ++c)
                out.at(0, c, y, x) = static_cast<float>(bytes[start + static_cast<size_t>((y * w + x) * 3 + c)]) / 255.0f;
    return out;
}

Tensor load_image(const std::string& path) {
    const std::vector<uint8_t> bytes = read_file_bytes(path);
    static constexpr uint8_t kPngSig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
    fail_decode("unsupported image format in '" + path + "' (expected P6 PPM or PNG)");
}

std::string encode_pgm_mask(const Tensor& mask) {
    if (mask.n() != 1 || mask.c() != 1) fail_shape("mask must be (1, 1, h, w), got " + mask.shape().str());
    std::string out = "P5\n" + std::to_string(mask.w()) + " " + std::to_string(mask.h()) + "\n255\n";
    out.reserve(out.size() + static_cast<size_t>(mask.numel()));
    for (float v : mask.data()) out.push_back(static_cast<char>(v != 0.0f ? 255 : 0));
    return out;
}

Tensor decode_pgm_mask(const std::vector<uint8_t>& bytes) {
    PnmHeader header(bytes);
    if (header.magic() != "P5") fail_decode("not a binary PGM (P5) mask");
    const int64_t w = header.number();
    const int64_t h = header.number();
    const int64_t maxval = header.number();
    if (w < 1 || h < 1) fail_decode("PGM has empty dimensions");
    if (maxval != 255) fail_decode("PGM maxval must be 255, got " + std::to_string(maxval));
    const size_t start = header.raster_start();
    if (bytes.size() - start < static_cast<size_t>(w * h)) fail_decode("PGM raster truncated");
    Tensor out(Shape{1, 1, h, w});
    for (int64_t i = 0; i < w * h; ++i) {
        const uint8_t v = bytes[start + static_cast<size_t>(i)];
        if (v != 0 && v != 255) fail_decode("mask value " + std::to_string(v) + " is neither 0 nor 255");
        out.data()[i] = v == 255 ? 1.0f : 0.0f;
    }
    return out;
}

Tensor load_pgm_mask(const std::string& path) { return decode_pgm_mask(read_file_bytes(path)); }

std::string encode_ppm(const Tensor& image) {
    if (image.n() != 1 || image.c() != 3) fail_shape("image must be (1, 3, h, w), got " + image.shape().str());
    std::string out = "P6\n" + std::to_string(image.w()) + " " + std::to_string(image.h()) + "\n255\n";
    for (int64_t y = 0; y < image.h(); ++y)
        for (int64_t x = 0; x < image.w(); ++x)
            for (int64_t c = 0; c < 3; ++c) out.push_back(static_cast<char>(to_byte(image.at(0, c, y, x))));
    return out;
}

std::string encode_overlay_ppm(const Tensor& image, const Tensor& drivable_mask, const Tensor& lane_mask) {
    const Shape mask_shape{1, 1, image.h(), image.w()};
    if (drivable_mask.shape() != mask_shape || lane_mask.shape() != mask_shape)
        fail_shape("overlay masks must be " + mask_shape.str());
    Tensor blended = image;
    for (int64_t y = 0; y < image.h(); ++y) {
        for (int64_t x = 0; x < image.w(); ++x) {
            const float* tint = nullptr;
            static constexpr float kGreen[3] = {0.0f, 1.0f, 0.0f};
            static constexpr float kRed[3] = {1.0f, 0.0f, 0.0f};
            if (lane_mask.at(0, 0, y, x) != 0.0f)
                tint = kRed;
            else if (drivable_mask.at(0, 0, y, x) != 0.0f)
                tint = kGreen;
            if (tint == nullptr) continue;
            for (int64_t c = 0; c < 3; ++c) blended.at(0, c, y, x) = 0.5f * image.at(0, c, y, x) + 0.5f * tint[c];
        }
    }
    return encode_ppm(blended);
}

} // namespace twmx
