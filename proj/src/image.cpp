#include "amsdb/image.hpp"

#include <png.h>

#include <cctype>
#include <cmath>
#include <cstring>

#include "amsdb/fsio.hpp"

namespace amsdb {

Image make_image(i64 w, i64 h, i64 c, float fill) {
    if (w <= 0 || h <= 0 || (c != 1 && c != 3))
        throw ValueError("image dims must be positive with 1 or 3 channels");
    Image img;
    img.w = w;
    img.h = h;
    img.c = c;
    img.pix.assign(static_cast<size_t>(c * h * w), fill);
    return img;
}

Mask make_mask(i64 w, i64 h, std::uint8_t fill) {
    if (w <= 0 || h <= 0) throw ValueError("mask dims must be positive");
    Mask m;
    m.w = w;
    m.h = h;
    m.ink.assign(static_cast<size_t>(h * w), fill);
    return m;
}

namespace {

std::uint8_t to_byte(float v) {
    const float cl = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return static_cast<std::uint8_t>(std::lround(cl * 255.0f));
}

Image decode_png(const std::string& bytes, const std::string& path) {
    png_image im;
    std::memset(&im, 0, sizeof(im));
    im.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&im, bytes.data(), bytes.size()))
        throw DataError(path + ": " + im.message);
    const bool color = (im.format & PNG_FORMAT_FLAG_COLOR) != 0;
    im.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const i64 c = color ? 3 : 1;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(im));
    if (!png_image_finish_read(&im, nullptr, buf.data(), 0, nullptr)) {
        std::string msg = im.message;
        png_image_free(&im);
        throw DataError(path + ": " + msg);
    }
    Image img = make_image(im.width, im.height, c);
    const i64 n = img.h * img.w;
    // Divide (not reciprocal-multiply): byte k must map to exactly the
    // rounded float k/255 so quantized values round-trip bitwise.
    for (i64 p = 0; p < n; ++p)
        for (i64 ch = 0; ch < c; ++ch)
            img.pix[ch * n + p] =
                static_cast<float>(buf[p * c + ch]) / 255.0f;
    return img;
}

std::string encode_png(const Image& img, const std::string& path) {
    png_image im;
    std::memset(&im, 0, sizeof(im));
    im.version = PNG_IMAGE_VERSION;
    im.width = static_cast<png_uint_32>(img.w);
    im.height = static_cast<png_uint_32>(img.h);
    im.format = (img.c == 3) ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    const i64 n = img.h * img.w;
    std::vector<std::uint8_t> buf(static_cast<size_t>(n * img.c));
    for (i64 p = 0; p < n; ++p)
        for (i64 ch = 0; ch < img.c; ++ch)
            buf[p * img.c + ch] = to_byte(img.pix[ch * n + p]);
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&im, nullptr, &size, 0, buf.data(), 0,
                                   nullptr))
        throw DataError(path + ": PNG size query failed: " + im.message);
    std::string out(size, '\0');
    if (!png_image_write_to_memory(&im, out.data(), &size, 0, buf.data(), 0,
                                   nullptr))
        throw DataError(path + ": PNG encode failed: " + im.message);
    out.resize(size);
    return out;
}

// P5/P6 header: magic, then whitespace-separated width/height/maxval with
// '#' comments, then exactly one whitespace byte before the raster.
struct PnmHeader {
    i64 c = 0, w = 0, h = 0;
    size_t raster = 0;  // byte offset of pixel data
};

PnmHeader parse_pnm_header(const std::string& b, const std::string& path) {
    PnmHeader hd;
    if (b.size() < 2 || b[0] != 'P') throw DataError(path + ": not P5/P6");
    if (b[1] == '5')
        hd.c = 1;
    else if (b[1] == '6')
        hd.c = 3;
    else
        throw DataError(path + ": unsupported PNM type P" +
                        std::string(1, b[1]));
    size_t pos = 2;
    i64 fields[3];
    for (int f = 0; f < 3; ++f) {
        while (pos < b.size()) {
            if (b[pos] == '#') {
                while (pos < b.size() && b[pos] != '\n') ++pos;
            } else if (std::isspace(static_cast<unsigned char>(b[pos]))) {
                ++pos;
            } else {
                break;
            }
        }
        i64 v = 0;
        size_t start = pos;
        while (pos < b.size() &&
               std::isdigit(static_cast<unsigned char>(b[pos]))) {
            v = v * 10 + (b[pos] - '0');
            ++pos;
        }
        if (pos == start) throw DataError(path + ": malformed PNM header");
        fields[f] = v;
    }
    if (pos >= b.size() ||
        !std::isspace(static_cast<unsigned char>(b[pos])))
        throw DataError(path + ": malformed PNM header");
    ++pos;
    hd.w = fields[0];
    hd.h = fields[1];
    if (hd.w <= 0 || hd.h <= 0)
        throw DataError(path + ": non-positive PNM dims");
    if (fields[2] <= 0 || fields[2] > 255)
        throw DataError(path + ": only 8-bit PNM supported (maxval " +
                        std::to_string(fields[2]) + ")");
    hd.raster = pos;
    return hd;
}

Image decode_pnm(const std::string& b, const std::string& path) {
    const PnmHeader hd = parse_pnm_header(b, path);
    const size_t need = static_cast<size_t>(hd.c * hd.h * hd.w);
    if (b.size() - hd.raster < need)
        throw DataError(path + ": truncated PNM raster");
    Image img = make_image(hd.w, hd.h, hd.c);
    const i64 n = hd.h * hd.w;
    const auto* raw =
        reinterpret_cast<const std::uint8_t*>(b.data() + hd.raster);
    for (i64 p = 0; p < n; ++p)
        for (i64 ch = 0; ch < hd.c; ++ch)
            img.pix[ch * n + p] =
                static_cast<float>(raw[p * hd.c + ch]) / 255.0f;
    return img;
}

std::string encode_pnm(const Image& img) {
    std::string out = (img.c == 3 ? "P6\n" : "P5\n");
    out += std::to_string(img.w) + " " + std::to_string(img.h) + "\n255\n";
    const i64 n = img.h * img.w;
    out.reserve(out.size() + static_cast<size_t>(n * img.c));
    for (i64 p = 0; p < n; ++p)
        for (i64 ch = 0; ch < img.c; ++ch)
            out.push_back(static_cast<char>(to_byte(img.pix[ch * n + p])));
    return out;
}

bool has_suffix(const std::string& s, const std::string& suf) {
    return s.size() >= suf.size() &&
           s.compare(s.size() - suf.size(), suf.size(), suf) == 0;
}

}  // namespace

Image read_image(const std::string& path) {
    const std::string bytes = read_file(path);
    static const unsigned char sig[4] = {0x89, 'P', 'N', 'G'};
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), sig, 4) == 0)
        return decode_png(bytes, path);
    if (bytes.size() >= 2 && bytes[0] == 'P' &&
        (bytes[1] == '5' || bytes[1] == '6'))
        return decode_pnm(bytes, path);
    throw DataError(path + ": unrecognized image format (PNG/P5/P6 only)");
}

void write_image(const std::string& path, const Image& img) {
    if (img.w <= 0 || img.h <= 0 || (img.c != 1 && img.c != 3))
        throw ValueError("write_image: empty or malformed image");
    if (has_suffix(path, ".png")) {
        atomic_write_file(path, encode_png(img, path));
    } else if (has_suffix(path, ".pgm")) {
        if (img.c != 1) throw ValueError(path + ": .pgm requires 1 channel");
        atomic_write_file(path, encode_pnm(img));
    } else if (has_suffix(path, ".ppm")) {
        if (img.c != 3) throw ValueError(path + ": .ppm requires 3 channels");
        atomic_write_file(path, encode_pnm(img));
    } else {
        throw ValueError(path + ": unsupported output extension");
    }
}

Image to_gray(const Image& img) {
    if (img.c == 1) return img;
    Image g = make_image(img.w, img.h, 1);
    const i64 n = img.h * img.w;
    for (i64 p = 0; p < n; ++p)
        g.pix[p] = 0.299f * img.pix[p] + 0.587f * img.pix[n + p] +
                   0.114f * img.pix[2 * n + p];
    return g;
}

Image to_rgb(const Image& img) {
    if (img.c == 3) return img;
    Image rgb = make_image(img.w, img.h, 3);
    const i64 n = img.h * img.w;
    for (i64 ch = 0; ch < 3; ++ch)
        std::memcpy(rgb.pix.data() + ch * n, img.pix.data(),
                    static_cast<size_t>(n) * sizeof(float));
    return rgb;
}

Mask mask_from_image(const Image& img) {
    const Image g = to_gray(img);
    Mask m = make_mask(g.w, g.h);
    for (size_t i = 0; i < g.pix.size(); ++i)
        m.ink[i] = g.pix[i] < 0.5f ? 1 : 0;
    return m;
}

Image mask_to_image(const Mask& m) {
    Image img = make_image(m.w, m.h, 1);
    for (size_t i = 0; i < m.ink.size(); ++i)
        img.pix[i] = m.ink[i] ? 0.0f : 1.0f;
    return img;
}

}  // namespace amsdb
