#include "museg/imgio.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace museg::imgio {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::string& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) throw DataError("cannot open '" + path + "'");
    return f;
}

// ---------------------------------------------------------------------------
// PNG (via libpng): single-channel gray 8/16, plus RGB8 for overlays.
// ---------------------------------------------------------------------------

struct PngRaster {
    int width = 0;
    int height = 0;
    int bit_depth = 0;              // 8 or 16
    int channels = 1;
    std::vector<std::uint16_t> px;  // channel-interleaved, host order
};

[[noreturn]] void png_fail(png_structp, png_const_charp msg) {
    throw DataError(std::string("png: ") + (msg ? msg : "error"));
}

PngRaster read_png(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    png_byte header[8] = {};
    if (std::fread(header, 1, 8, f.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
        throw DataError("'" + path + "' is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, nullptr);
    png_infop info = png_create_info_struct(png);
    try {
        png_init_io(png, f.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);

        PngRaster out;
        out.width = static_cast<int>(png_get_image_width(png, info));
        out.height = static_cast<int>(png_get_image_height(png, info));
        out.bit_depth = png_get_bit_depth(png, info);
        const int color = png_get_color_type(png, info);

        if (color != PNG_COLOR_TYPE_GRAY)
            throw DataError("'" + path + "': unsupported color type (need single-channel gray)");
        if (out.bit_depth < 8) {
            png_set_expand_gray_1_2_4_to_8(png);
            out.bit_depth = 8;
        }
        if (out.width <= 0 || out.height <= 0)
            throw DataError("'" + path + "': zero-sized image");

        const size_t n = static_cast<size_t>(out.width) * out.height;
        out.px.resize(n);
        std::vector<png_bytep> rows(out.height);
        std::vector<std::uint8_t> buf;
        const int bytes = out.bit_depth / 8;
        buf.resize(n * bytes);
        for (int y = 0; y < out.height; ++y)
            rows[static_cast<size_t>(y)] = buf.data() + static_cast<size_t>(y) * out.width * bytes;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);

        if (out.bit_depth == 8) {
            for (size_t i = 0; i < n; ++i) out.px[i] = buf[i];
        } else {
            for (size_t i = 0; i < n; ++i) // PNG is big-endian
                out.px[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
        }
        png_destroy_read_struct(&png, &info, nullptr);
        return out;
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
}

void write_png_gray(const std::string& path, int width, int height, int bit_depth,
                    const std::vector<std::uint16_t>& px) {
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, nullptr);
    png_infop info = png_create_info_struct(png);
    try {
        png_init_io(png, f.get());
        png_set_compression_level(png, 6); // fixed for reproducible bytes
        png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                     bit_depth, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);

        const size_t n = static_cast<size_t>(width) * height;
        const int bytes = bit_depth / 8;
        std::vector<std::uint8_t> buf(n * bytes);
        if (bit_depth == 8) {
            for (size_t i = 0; i < n; ++i) buf[i] = static_cast<std::uint8_t>(px[i] & 0xFF);
        } else {
            for (size_t i = 0; i < n; ++i) {
                buf[2 * i] = static_cast<std::uint8_t>(px[i] >> 8);
                buf[2 * i + 1] = static_cast<std::uint8_t>(px[i] & 0xFF);
            }
        }
        std::vector<png_bytep> rows(static_cast<size_t>(height));
        for (int y = 0; y < height; ++y)
            rows[static_cast<size_t>(y)] = buf.data() + static_cast<size_t>(y) * width * bytes;
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
}

void write_png_rgb(const std::string& path, int width, int height,
                   const std::vector<std::uint8_t>& rgb) {
    FilePtr f = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, nullptr);
    png_infop info = png_create_info_struct(png);
    try {
        png_init_io(png, f.get());
        png_set_compression_level(png, 6);
        png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                     8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                     PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        std::vector<png_bytep> rows(static_cast<size_t>(height));
        for (int y = 0; y < height; ++y)
            rows[static_cast<size_t>(y)] =
                const_cast<png_bytep>(rgb.data() + static_cast<size_t>(y) * width * 3);
        png_write_image(png, rows.data());
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
}

// ---------------------------------------------------------------------------
// PGM (P5 binary; 16-bit stored big-endian per the netpbm convention)
// ---------------------------------------------------------------------------

int pgm_read_token(std::FILE* f) {
    int c = std::fgetc(f);
    while (c != EOF) {
        if (c == '#') { // comment to end of line
            while (c != EOF && c != '\n') c = std::fgetc(f);
        } else if (!std::isspace(c)) {
            break;
        }
        c = std::fgetc(f);
    }
    if (c == EOF || !std::isdigit(c)) return -1;
    int v = 0;
    while (c != EOF && std::isdigit(c)) {
        v = v * 10 + (c - '0');
        c = std::fgetc(f);
    }
    return v;
}

PngRaster read_pgm(const std::string& path) {
    FilePtr f = open_file(path, "rb");
    char magic[2] = {};
    if (std::fread(magic, 1, 2, f.get()) != 2 || magic[0] != 'P' || magic[1] != '5')
        throw DataError("'" + path + "': unsupported PGM variant (need binary P5)");
    PngRaster out;
    out.width = pgm_read_token(f.get());
    out.height = pgm_read_token(f.get());
    const int maxval = pgm_read_token(f.get());
    if (out.width <= 0 || out.height <= 0)
        throw DataError("'" + path + "': zero-sized image");
    if (maxval <= 0 || maxval > 65535) throw DataError("'" + path + "': bad PGM maxval");
    out.bit_depth = maxval > 255 ? 16 : 8;

    const size_t n = static_cast<size_t>(out.width) * out.height;
    out.px.resize(n);
    if (maxval > 255) {
        std::vector<std::uint8_t> buf(n * 2);
        if (std::fread(buf.data(), 1, buf.size(), f.get()) != buf.size())
            throw DataError("'" + path + "': truncated PGM data");
        for (size_t i = 0; i < n; ++i)
            out.px[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    } else {
        std::vector<std::uint8_t> buf(n);
        if (std::fread(buf.data(), 1, buf.size(), f.get()) != buf.size())
            throw DataError("'" + path + "': truncated PGM data");
        for (size_t i = 0; i < n; ++i) out.px[i] = buf[i];
    }
    // stash maxval in channels field? no -- return via bit_depth convention:
    // loaders divide by maxval, so remember it.
    out.channels = maxval;
    return out;
}

void write_pgm(const std::string& path, int width, int height, int bit_depth,
               const std::vector<std::uint16_t>& px) {
    FilePtr f = open_file(path, "wb");
    const int maxval = bit_depth == 16 ? 65535 : 255;
    std::fprintf(f.get(), "P5\n%d %d\n%d\n", width, height, maxval);
    const size_t n = static_cast<size_t>(width) * height;
    if (bit_depth == 16) {
        std::vector<std::uint8_t> buf(n * 2);
        for (size_t i = 0; i < n; ++i) {
            buf[2 * i] = static_cast<std::uint8_t>(px[i] >> 8);
            buf[2 * i + 1] = static_cast<std::uint8_t>(px[i] & 0xFF);
        }
        std::fwrite(buf.data(), 1, buf.size(), f.get());
    } else {
        std::vector<std::uint8_t> buf(n);
        for (size_t i = 0; i < n; ++i) buf[i] = static_cast<std::uint8_t>(px[i] & 0xFF);
        std::fwrite(buf.data(), 1, buf.size(), f.get());
    }
}

bool has_png_magic(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw DataError("cannot open '" + path + "'");
    unsigned char sig[8] = {};
    const size_t got = std::fread(sig, 1, 8, f.get());
    return got == 8 && png_sig_cmp(sig, 0, 8) == 0;
}

PngRaster read_raster(const std::string& path) {
    if (!fs::exists(path)) throw DataError("missing file '" + path + "'");
    if (has_png_magic(path)) {
        PngRaster r = read_png(path);
        r.channels = r.bit_depth == 16 ? 65535 : 255; // normalization divisor
        return r;
    }
    return read_pgm(path);
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

} // namespace

GrayImage load_image(const std::string& path) {
    const PngRaster r = read_raster(path);
    GrayImage img(r.width, r.height);
    const double div = static_cast<double>(r.channels); // bit-depth maximum (or PGM maxval)
    for (size_t i = 0; i < img.size(); ++i) img.data[i] = static_cast<double>(r.px[i]) / div;
    return img;
}

void save_image(const GrayImage& img, const std::string& path, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw DataError("bit depth must be 8 or 16");
    if (img.width <= 0 || img.height <= 0) throw DataError("cannot save zero-sized image");
    const int maxval = bit_depth == 16 ? 65535 : 255;
    std::vector<std::uint16_t> px(img.size());
    for (size_t i = 0; i < img.size(); ++i) {
        const double v = std::clamp(img.data[i], 0.0, 1.0);
        px[i] = static_cast<std::uint16_t>(std::lround(v * maxval));
    }
    if (ends_with(path, ".pgm"))
        write_pgm(path, img.width, img.height, bit_depth, px);
    else
        write_png_gray(path, img.width, img.height, bit_depth, px);
}

LabelMask load_mask(const std::string& path) {
    const PngRaster r = read_raster(path);
    if (r.bit_depth != 8)
        throw DataError("'" + path + "': masks must be 8-bit single-channel");
    LabelMask mask(r.width, r.height);
    for (size_t i = 0; i < mask.labels.size(); ++i)
        mask.labels[i] = static_cast<std::uint8_t>(r.px[i]);

    const std::string sidecar = path + ".json";
    if (fs::exists(sidecar)) {
        std::ifstream in(sidecar);
        json j = json::parse(in);
        for (auto it = j.begin(); it != j.end(); ++it)
            mask.palette[std::stoi(it.key())] = it.value().get<std::string>();
    } else {
        const int k = mask.max_label();
        for (int id = 1; id <= k; ++id) mask.palette[id] = std::to_string(id);
    }
    return mask;
}

void save_mask(const LabelMask& mask, const std::string& path) {
    if (mask.width <= 0 || mask.height <= 0) throw DataError("cannot save zero-sized mask");
    std::vector<std::uint16_t> px(mask.labels.begin(), mask.labels.end());
    if (ends_with(path, ".pgm"))
        write_pgm(path, mask.width, mask.height, 8, px);
    else
        write_png_gray(path, mask.width, mask.height, 8, px);
    if (!mask.palette.empty()) {
        json j = json::object();
        for (const auto& [id, name] : mask.palette) j[std::to_string(id)] = name;
        std::ofstream out(path + ".json", std::ios::binary);
        if (!out) throw DataError("cannot write '" + path + ".json'");
        out << j.dump(2) << "\n";
    }
}

void label_color(int id, std::uint8_t rgb[3]) {
    // Golden-angle hue walk: well-spread, stable colors for any id.
    const double hue = std::fmod(static_cast<double>(id) * 0.61803398874989485, 1.0) * 6.0;
    const double s = 0.85, v = 1.0;
    const int i = static_cast<int>(hue);
    const double f = hue - i;
    const double p = v * (1.0 - s);
    const double q = v * (1.0 - s * f);
    const double t = v * (1.0 - s * (1.0 - f));
    double r = 0, g = 0, b = 0;
    switch (i % 6) {
        case 0: r = v; g = t; b = p; break;
        case 1: r = q; g = v; b = p; break;
        case 2: r = p; g = v; b = t; break;
        case 3: r = p; g = q; b = v; break;
        case 4: r = t; g = p; b = v; break;
        case 5: r = v; g = p; b = q; break;
    }
    rgb[0] = static_cast<std::uint8_t>(std::lround(r * 255.0));
    rgb[1] = static_cast<std::uint8_t>(std::lround(g * 255.0));
    rgb[2] = static_cast<std::uint8_t>(std::lround(b * 255.0));
}

void save_overlay(const GrayImage& img, const LabelMask& mask, const std::string& path) {
    if (img.width != mask.width || img.height != mask.height)
        throw DataError("overlay: image and mask dimensions differ");
    std::vector<std::uint8_t> rgb(static_cast<size_t>(img.width) * img.height * 3);
    for (size_t i = 0; i < img.size(); ++i) {
        const double v = std::clamp(img.data[i], 0.0, 1.0);
        const auto gray = static_cast<std::uint8_t>(std::lround(v * 255.0));
        const int id = mask.labels[i];
        if (id == 0) {
            rgb[3 * i] = rgb[3 * i + 1] = rgb[3 * i + 2] = gray;
        } else {
            std::uint8_t c[3];
            label_color(id, c);
            for (int ch = 0; ch < 3; ++ch)
                rgb[3 * i + ch] =
                    static_cast<std::uint8_t>(std::lround(0.5 * gray + 0.5 * c[ch]));
        }
    }
    write_png_rgb(path, img.width, img.height, rgb);
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

std::string DatasetManifest::resolve(const std::string& rel) const {
    fs::path p(rel);
    if (p.is_absolute() || base_dir.empty()) return rel;
    return (fs::path(base_dir) / p).string();
}

DatasetManifest load_manifest(const std::string& path) {
    if (!fs::exists(path)) throw DataError("missing manifest '" + path + "'");
    std::ifstream in(path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("manifest '" + path + "': " + e.what());
    }

    DatasetManifest m;
    m.base_dir = fs::path(path).parent_path().string();
    if (!j.contains("volumes") || !j["volumes"].is_array())
        throw DataError("manifest '" + path + "': missing \"volumes\" array");
    for (const auto& jv : j["volumes"]) {
        VolumeEntry vol;
        vol.id = jv.at("id").get<std::string>();
        int prev = -1;
        bool first = true;
        for (const auto& js : jv.at("slices")) {
            SliceEntry s;
            s.index = js.at("index").get<int>();
            s.image = js.at("image").get<std::string>();
            if (js.contains("mask") && !js["mask"].is_null())
                s.mask = js["mask"].get<std::string>();
            if (!first && s.index <= prev)
                throw DataError("manifest: slice indices of volume '" + vol.id +
                                "' are not strictly increasing");
            first = false;
            prev = s.index;
            vol.slices.push_back(std::move(s));
        }
        m.volumes.push_back(std::move(vol));
    }
    std::sort(m.volumes.begin(), m.volumes.end(),
              [](const VolumeEntry& a, const VolumeEntry& b) { return a.id < b.id; });

    for (const auto& vol : m.volumes)
        for (const auto& s : vol.slices) {
            if (!fs::exists(m.resolve(s.image)))
                throw DataError("manifest: missing image '" + s.image + "' (volume " + vol.id +
                                ")");
            if (s.mask && !fs::exists(m.resolve(*s.mask)))
                throw DataError("manifest: missing mask '" + *s.mask + "' (volume " + vol.id +
                                ")");
        }
    return m;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    json j;
    j["volumes"] = json::array();
    for (const auto& vol : manifest.volumes) {
        json jv;
        jv["id"] = vol.id;
        jv["slices"] = json::array();
        for (const auto& s : vol.slices) {
            json js;
            js["index"] = s.index;
            js["image"] = s.image;
            js["mask"] = s.mask ? json(*s.mask) : json(nullptr);
            jv["slices"].push_back(std::move(js));
        }
        j["volumes"].push_back(std::move(jv));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write manifest '" + path + "'");
    out << j.dump(2) << "\n";
}

GrayImage load_slice_image(const DatasetManifest& m, const SliceEntry& e) {
    return load_image(m.resolve(e.image));
}

std::pair<GrayImage, std::optional<LabelMask>> load_slice(const DatasetManifest& m,
                                                          const SliceEntry& e) {
    GrayImage img = load_slice_image(m, e);
    std::optional<LabelMask> mask;
    if (e.mask) {
        mask = load_mask(m.resolve(*e.mask));
        if (mask->width != img.width || mask->height != img.height)
            throw DataError("mask '" + *e.mask + "' dimensions do not match its image");
    }
    return {std::move(img), std::move(mask)};
}

} // namespace museg::imgio
