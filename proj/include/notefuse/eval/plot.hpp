#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "notefuse/core/errors.hpp"

namespace notefuse::eval {

// Minimal PNG writer (8-bit RGB, filter 0) plus a line-chart rasterizer.
// Enough to render metric-vs-K comparison plots without an imaging stack.

namespace png {

inline void put_u32(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

inline void chunk(std::vector<unsigned char>& out, const char type[4],
                  const std::vector<unsigned char>& payload) {
    put_u32(out, static_cast<uint32_t>(payload.size()));
    std::vector<unsigned char> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    out.insert(out.end(), body.begin(), body.end());
    const uint32_t crc =
        static_cast<uint32_t>(::crc32(0L, body.data(), static_cast<uInt>(body.size())));
    put_u32(out, crc);
}

inline void write_rgb(const std::string& path, const std::vector<unsigned char>& rgb, int width,
                      int height) {
    if (static_cast<size_t>(width) * static_cast<size_t>(height) * 3 != rgb.size())
        throw input_error("png::write_rgb: buffer size mismatch");

    std::vector<unsigned char> raw;
    raw.reserve(static_cast<size_t>(height) * (static_cast<size_t>(width) * 3 + 1));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0);  // filter: none
        const unsigned char* row = rgb.data() + static_cast<size_t>(y) * width * 3;
        raw.insert(raw.end(), row, row + static_cast<size_t>(width) * 3);
    }
    uLongf comp_len = ::compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_len);
    if (::compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw state_error("png::write_rgb: deflate failed");
    comp.resize(comp_len);

    std::vector<unsigned char> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    std::vector<unsigned char> ihdr;
    put_u32(ihdr, static_cast<uint32_t>(width));
    put_u32(ihdr, static_cast<uint32_t>(height));
    ihdr.push_back(8);  // bit depth
    ihdr.push_back(2);  // color type: truecolor
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    chunk(out, "IHDR", ihdr);
    chunk(out, "IDAT", comp);
    chunk(out, "IEND", {});

    std::ofstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot write " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw io_error("short write on " + path);
}

// Validates signature and per-chunk CRCs; returns (width, height).
inline std::pair<int, int> validate(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot read " + path);
    std::vector<unsigned char> data((std::istreambuf_iterator<char>(f)),
                                    std::istreambuf_iterator<char>());
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
    if (data.size() < 8 || std::memcmp(data.data(), sig, 8) != 0)
        throw io_error("not a PNG: " + path);
    size_t at = 8;
    int width = 0, height = 0;
    while (at + 12 <= data.size()) {
        const uint32_t len = (uint32_t(data[at]) << 24) | (uint32_t(data[at + 1]) << 16) |
                             (uint32_t(data[at + 2]) << 8) | uint32_t(data[at + 3]);
        if (at + 12 + len > data.size()) throw io_error("truncated PNG chunk: " + path);
        const uint32_t stored = (uint32_t(data[at + 8 + len]) << 24) |
                                (uint32_t(data[at + 9 + len]) << 16) |
                                (uint32_t(data[at + 10 + len]) << 8) | uint32_t(data[at + 11 + len]);
        const uint32_t crc = static_cast<uint32_t>(
            ::crc32(0L, data.data() + at + 4, static_cast<uInt>(4 + len)));
        if (stored != crc) throw io_error("PNG CRC mismatch: " + path);
        if (std::memcmp(data.data() + at + 4, "IHDR", 4) == 0 && len >= 8) {
            width = int((uint32_t(data[at + 8]) << 24) | (uint32_t(data[at + 9]) << 16) |
                        (uint32_t(data[at + 10]) << 8) | uint32_t(data[at + 11]));
            height = int((uint32_t(data[at + 12]) << 24) | (uint32_t(data[at + 13]) << 16) |
                         (uint32_t(data[at + 14]) << 8) | uint32_t(data[at + 15]));
        }
        at += 12 + len;
    }
    if (width <= 0 || height <= 0) throw io_error("PNG missing IHDR: " + path);
    return {width, height};
}

}  // namespace png

namespace font5x7 {

struct Glyph {
    char c;
    uint8_t rows[7];  // 5 LSB-justified bits per row, MSB = left column
};

// Uppercase-only face; render() folds input to uppercase.
inline const Glyph* table(size_t& count) {
    static const Glyph glyphs[] = {
        {'A', {0x0e, 0x11, 0x11, 0x1f, 0x11, 0x11, 0x11}},
        {'B', {0x1e, 0x11, 0x1e, 0x11, 0x11, 0x11, 0x1e}},
        {'C', {0x0e, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0e}},
        {'D', {0x1e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1e}},
        {'E', {0x1f, 0x10, 0x1e, 0x10, 0x10, 0x10, 0x1f}},
        {'F', {0x1f, 0x10, 0x1e, 0x10, 0x10, 0x10, 0x10}},
        {'G', {0x0e, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0f}},
        {'H', {0x11, 0x11, 0x1f, 0x11, 0x11, 0x11, 0x11}},
        {'I', {0x0e, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0e}},
        {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0c}},
        {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
        {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1f}},
        {'M', {0x11, 0x1b, 0x15, 0x15, 0x11, 0x11, 0x11}},
        {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
        {'O', {0x0e, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
        {'P', {0x1e, 0x11, 0x11, 0x1e, 0x10, 0x10, 0x10}},
        {'Q', {0x0e, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0d}},
        {'R', {0x1e, 0x11, 0x11, 0x1e, 0x14, 0x12, 0x11}},
        {'S', {0x0f, 0x10, 0x10, 0x0e, 0x01, 0x01, 0x1e}},
        {'T', {0x1f, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
        {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0e}},
        {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0a, 0x04}},
        {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1b, 0x11}},
        {'X', {0x11, 0x11, 0x0a, 0x04, 0x0a, 0x11, 0x11}},
        {'Y', {0x11, 0x11, 0x0a, 0x04, 0x04, 0x04, 0x04}},
        {'Z', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1f}},
        {'0', {0x0e, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0e}},
        {'1', {0x04, 0x0c, 0x04, 0x04, 0x04, 0x04, 0x0e}},
        {'2', {0x0e, 0x11, 0x01, 0x06, 0x08, 0x10, 0x1f}},
        {'3', {0x1f, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0e}},
        {'4', {0x02, 0x06, 0x0a, 0x12, 0x1f, 0x02, 0x02}},
        {'5', {0x1f, 0x10, 0x1e, 0x01, 0x01, 0x11, 0x0e}},
        {'6', {0x06, 0x08, 0x10, 0x1e, 0x11, 0x11, 0x0e}},
        {'7', {0x1f, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
        {'8', {0x0e, 0x11, 0x11, 0x0e, 0x11, 0x11, 0x0e}},
        {'9', {0x0e, 0x11, 0x11, 0x0f, 0x01, 0x02, 0x0c}},
        {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0c, 0x0c}},
        {',', {0x00, 0x00, 0x00, 0x00, 0x0c, 0x04, 0x08}},
        {'-', {0x00, 0x00, 0x00, 0x1f, 0x00, 0x00, 0x00}},
        {'_', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x1f}},
        {':', {0x00, 0x0c, 0x0c, 0x00, 0x0c, 0x0c, 0x00}},
        {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
        {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
        {'@', {0x0e, 0x11, 0x01, 0x0d, 0x15, 0x15, 0x0e}},
        {'%', {0x19, 0x1a, 0x02, 0x04, 0x08, 0x0b, 0x13}},
        {'/', {0x01, 0x02, 0x02, 0x04, 0x08, 0x08, 0x10}},
        {' ', {0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}},
    };
    count = sizeof(glyphs) / sizeof(glyphs[0]);
    return glyphs;
}

inline const uint8_t* lookup(char c) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    size_t n = 0;
    const Glyph* g = table(n);
    for (size_t i = 0; i < n; ++i)
        if (g[i].c == c) return g[i].rows;
    return g[n - 1].rows;  // unknown -> space
}

}  // namespace font5x7

struct Rgb {
    unsigned char r, g, b;
};

class Canvas {
public:
    Canvas(int width, int height, Rgb background = {255, 255, 255})
        : w_(width), h_(height), px_(static_cast<size_t>(width) * height * 3) {
        for (int i = 0; i < width * height; ++i) {
            px_[3 * i] = background.r;
            px_[3 * i + 1] = background.g;
            px_[3 * i + 2] = background.b;
        }
    }

    int width() const { return w_; }
    int height() const { return h_; }
    const std::vector<unsigned char>& pixels() const { return px_; }

    void set(int x, int y, Rgb c) {
        if (x < 0 || y < 0 || x >= w_ || y >= h_) return;
        const size_t at = 3 * (static_cast<size_t>(y) * w_ + x);
        px_[at] = c.r;
        px_[at + 1] = c.g;
        px_[at + 2] = c.b;
    }

    void line(int x0, int y0, int x1, int y1, Rgb c) {
        // Bresenham
        int dx = std::abs(x1 - x0), dy = -std::abs(y1 - y0);
        int sx = x0 < x1 ? 1 : -1, sy = y0 < y1 ? 1 : -1;
        int err = dx + dy;
        for (;;) {
            set(x0, y0, c);
            if (x0 == x1 && y0 == y1) break;
            const int e2 = 2 * err;
            if (e2 >= dy) {
                err += dy;
                x0 += sx;
            }
            if (e2 <= dx) {
                err += dx;
                y0 += sy;
            }
        }
    }

    void fill_rect(int x, int y, int w, int h, Rgb c) {
        for (int yy = y; yy < y + h; ++yy)
            for (int xx = x; xx < x + w; ++xx) set(xx, yy, c);
    }

    void text(int x, int y, const std::string& s, Rgb c, int scale = 1) {
        int cx = x;
        for (char ch : s) {
            const uint8_t* rows = font5x7::lookup(ch);
            for (int ry = 0; ry < 7; ++ry)
                for (int rx = 0; rx < 5; ++rx)
                    if (rows[ry] & (1 << (4 - rx)))
                        fill_rect(cx + rx * scale, y + ry * scale, scale, scale, c);
            cx += 6 * scale;
        }
    }

    static int text_width(const std::string& s, int scale = 1) {
        return static_cast<int>(s.size()) * 6 * scale;
    }

private:
    int w_, h_;
    std::vector<unsigned char> px_;
};

struct Series {
    std::string name;
    std::vector<double> xs;
    std::vector<double> ys;
};

// Metric-vs-K chart: one polyline with square markers per model.
inline void write_line_chart(const std::string& path, const std::string& title,
                             const std::string& x_label, const std::string& y_label,
                             const std::vector<Series>& series) {
    const int W = 720, H = 480;
    const int ml = 70, mr = 180, mt = 50, mb = 50;
    Canvas cv(W, H);
    const Rgb black{0, 0, 0}, grey{210, 210, 210};
    static const Rgb palette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},
                                  {214, 39, 40},  {148, 103, 189}, {140, 86, 75},
                                  {227, 119, 194}, {127, 127, 127}};

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (size_t i = 0; i < s.xs.size(); ++i) {
            xmin = std::min(xmin, s.xs[i]);
            xmax = std::max(xmax, s.xs[i]);
            ymin = std::min(ymin, s.ys[i]);
            ymax = std::max(ymax, s.ys[i]);
        }
    if (!(xmin < xmax)) {
        xmin -= 1.0;
        xmax += 1.0;
    }
    const double ypad = std::max(0.02, (ymax - ymin) * 0.15);
    ymin = std::max(0.0, ymin - ypad);
    ymax = std::min(1.0, ymax + ypad);
    if (!(ymin < ymax)) {
        ymin = 0.0;
        ymax = 1.0;
    }

    auto px = [&](double x) {
        return ml + static_cast<int>((x - xmin) / (xmax - xmin) * (W - ml - mr));
    };
    auto py = [&](double y) {
        return H - mb - static_cast<int>((y - ymin) / (ymax - ymin) * (H - mt - mb));
    };

    // horizontal gridlines + y ticks
    for (int i = 0; i <= 5; ++i) {
        const double y = ymin + (ymax - ymin) * i / 5.0;
        cv.line(ml, py(y), W - mr, py(y), grey);
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.2f", y);
        cv.text(ml - 8 - Canvas::text_width(buf), py(y) - 3, buf, black);
    }
    // axes
    cv.line(ml, mt, ml, H - mb, black);
    cv.line(ml, H - mb, W - mr, H - mb, black);
    // x ticks at series points
    if (!series.empty())
        for (double x : series[0].xs) {
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%g", x);
            cv.line(px(x), H - mb, px(x), H - mb + 4, black);
            cv.text(px(x) - Canvas::text_width(buf) / 2, H - mb + 8, buf, black);
        }

    cv.text((W - Canvas::text_width(title, 2)) / 2, 14, title, black, 2);
    cv.text(ml + (W - ml - mr) / 2 - Canvas::text_width(x_label) / 2, H - 18, x_label, black);
    cv.text(8, mt - 20, y_label, black);

    for (size_t si = 0; si < series.size(); ++si) {
        const Rgb c = palette[si % (sizeof(palette) / sizeof(palette[0]))];
        const auto& s = series[si];
        for (size_t i = 0; i + 1 < s.xs.size(); ++i)
            cv.line(px(s.xs[i]), py(s.ys[i]), px(s.xs[i + 1]), py(s.ys[i + 1]), c);
        for (size_t i = 0; i < s.xs.size(); ++i)
            cv.fill_rect(px(s.xs[i]) - 2, py(s.ys[i]) - 2, 5, 5, c);
        // legend
        const int ly = mt + static_cast<int>(si) * 16;
        cv.fill_rect(W - mr + 12, ly, 10, 10, c);
        cv.text(W - mr + 28, ly + 1, s.name, black);
    }

    png::write_rgb(path, cv.pixels(), W, H);
}

}  // namespace notefuse::eval
