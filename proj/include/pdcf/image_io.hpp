#pragma once

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "pdcf/errors.hpp"
#include "pdcf/tensor.hpp"

namespace pdcf::io {

/// Interleaved 8-bit RGB, row-major from the top-left pixel.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;
};

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (in.bad()) throw DataError("read failure on " + path);
    return bytes;
}

/// Writes via a temp file in the same directory plus rename, so readers
/// never observe a partially written file.
inline void write_file_atomic(const std::string& path, const void* data, std::size_t size) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot create " + tmp);
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
        if (!out) throw DataError("write failure on " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw DataError("cannot move " + tmp + " to " + path + ": " + ec.message());
}

namespace detail {

inline std::uint32_t read_u32be(const std::uint8_t* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

inline void append_u32be(std::vector<std::uint8_t>& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

inline int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a);
    const int pb = std::abs(p - b);
    const int pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

inline const std::uint8_t png_signature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

}  // namespace detail

inline bool looks_like_png(const std::vector<std::uint8_t>& bytes) {
    return bytes.size() >= 8 &&
           std::memcmp(bytes.data(), detail::png_signature, 8) == 0;
}

/// Decodes an 8-bit truecolor PNG (color types 2 and 6). Grayscale,
/// palette, 16-bit and interlaced files are rejected; an alpha channel is
/// dropped and reported through `dropped_alpha`. Chunk CRCs are verified.
inline Image decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name,
                        bool* dropped_alpha = nullptr) {
    if (dropped_alpha) *dropped_alpha = false;
    if (!looks_like_png(bytes)) throw DataError(name + ": not a PNG file");

    std::size_t pos = 8;
    bool have_ihdr = false;
    std::uint32_t width = 0, height = 0;
    int channels = 0;
    std::vector<std::uint8_t> idat;

    while (pos + 12 <= bytes.size()) {
        const std::uint32_t len = detail::read_u32be(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw DataError(name + ": truncated PNG chunk");
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const std::uint8_t* data = &bytes[pos + 8];
        const std::uint32_t stored_crc = detail::read_u32be(&bytes[pos + 8 + len]);
        const std::uint32_t computed_crc = static_cast<std::uint32_t>(
            crc32(crc32(0L, &bytes[pos + 4], 4), data, len));
        if (stored_crc != computed_crc) {
            throw DataError(name + ": PNG chunk CRC mismatch in " + std::string(type, 4));
        }

        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw DataError(name + ": malformed IHDR");
            width = detail::read_u32be(data);
            height = detail::read_u32be(data + 4);
            const int bit_depth = data[8];
            const int color_type = data[9];
            const int compression = data[10];
            const int filter = data[11];
            const int interlace = data[12];
            if (width == 0 || height == 0 || width > (1u << 24) || height > (1u << 24)) {
                throw DataError(name + ": invalid PNG dimensions");
            }
            if (bit_depth != 8) {
                throw DataError(name + ": unsupported PNG bit depth " +
                                std::to_string(bit_depth) + " (only 8 supported)");
            }
            if (color_type == 2) {
                channels = 3;
            } else if (color_type == 6) {
                channels = 4;
            } else {
                throw DataError(name + ": unsupported PNG color type " +
                                std::to_string(color_type) + " (only 8-bit RGB/RGBA supported)");
            }
            if (compression != 0 || filter != 0) {
                throw DataError(name + ": unsupported PNG compression/filter method");
            }
            if (interlace != 0) throw DataError(name + ": interlaced PNG not supported");
            have_ihdr = true;
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            if (!have_ihdr) throw DataError(name + ": IDAT before IHDR");
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            break;
        }
        pos += 12 + len;
    }
    if (!have_ihdr || idat.empty()) throw DataError(name + ": missing PNG image data");

    const std::size_t stride = static_cast<std::size_t>(width) * channels;
    const std::size_t raw_size = static_cast<std::size_t>(height) * (stride + 1);
    std::vector<std::uint8_t> raw(raw_size);
    uLongf dest_len = static_cast<uLongf>(raw_size);
    const int zret = uncompress(raw.data(), &dest_len, idat.data(),
                                static_cast<uLong>(idat.size()));
    if (zret != Z_OK || dest_len != raw_size) {
        throw DataError(name + ": PNG inflate failed");
    }

    // Undo the per-scanline filters in place; `recon` rows exclude the
    // leading filter byte.
    std::vector<std::uint8_t> recon(static_cast<std::size_t>(height) * stride);
    for (std::uint32_t y = 0; y < height; ++y) {
        const std::uint8_t filter = raw[y * (stride + 1)];
        const std::uint8_t* src = &raw[y * (stride + 1) + 1];
        std::uint8_t* dst = &recon[y * stride];
        const std::uint8_t* prev = y > 0 ? &recon[(y - 1) * stride] : nullptr;
        for (std::size_t i = 0; i < stride; ++i) {
            const int left = i >= static_cast<std::size_t>(channels) ? dst[i - channels] : 0;
            const int up = prev ? prev[i] : 0;
            const int up_left =
                (prev && i >= static_cast<std::size_t>(channels)) ? prev[i - channels] : 0;
            int value = src[i];
            switch (filter) {
                case 0: break;
                case 1: value += left; break;
                case 2: value += up; break;
                case 3: value += (left + up) / 2; break;
                case 4: value += detail::paeth(left, up, up_left); break;
                default:
                    throw DataError(name + ": invalid PNG filter type " + std::to_string(filter));
            }
            dst[i] = static_cast<std::uint8_t>(value & 0xFF);
        }
    }

    Image img;
    img.width = static_cast<int>(width);
    img.height = static_cast<int>(height);
    img.rgb.resize(static_cast<std::size_t>(width) * height * 3);
    if (channels == 3) {
        img.rgb = std::move(recon);
    } else {
        if (dropped_alpha) *dropped_alpha = true;
        for (std::size_t p = 0; p < static_cast<std::size_t>(width) * height; ++p) {
            img.rgb[p * 3 + 0] = recon[p * 4 + 0];
            img.rgb[p * 3 + 1] = recon[p * 4 + 1];
            img.rgb[p * 3 + 2] = recon[p * 4 + 2];
        }
    }
    return img;
}

/// Encodes 8-bit truecolor PNG with unfiltered scanlines and a single IDAT.
/// Output bytes are a pure function of the pixel content.
inline std::vector<std::uint8_t> encode_png(const Image& img) {
    if (img.width < 1 || img.height < 1 ||
        img.rgb.size() != static_cast<std::size_t>(img.width) * img.height * 3) {
        throw DataError("encode_png: inconsistent image buffer");
    }
    const std::size_t stride = static_cast<std::size_t>(img.width) * 3;
    std::vector<std::uint8_t> raw(static_cast<std::size_t>(img.height) * (stride + 1));
    for (int y = 0; y < img.height; ++y) {
        raw[y * (stride + 1)] = 0;
        std::memcpy(&raw[y * (stride + 1) + 1], &img.rgb[y * stride], stride);
    }
    uLongf comp_cap = compressBound(static_cast<uLong>(raw.size()));
    std::vector<std::uint8_t> comp(comp_cap);
    if (compress2(comp.data(), &comp_cap, raw.data(), static_cast<uLong>(raw.size()),
                  Z_BEST_COMPRESSION) != Z_OK) {
        throw DataError("encode_png: deflate failed");
    }
    comp.resize(comp_cap);

    std::vector<std::uint8_t> out(detail::png_signature, detail::png_signature + 8);
    auto chunk = [&out](const char* type, const std::uint8_t* data, std::size_t len) {
        detail::append_u32be(out, static_cast<std::uint32_t>(len));
        const std::size_t type_pos = out.size();
        out.insert(out.end(), type, type + 4);
        if (len > 0) out.insert(out.end(), data, data + len);
        // crc32(crc, nullptr, 0) would reset the running value, so the data
        // fold is guarded for empty chunks (IEND).
        uLong crc = crc32(0L, &out[type_pos], 4);
        if (len > 0) crc = crc32(crc, data, static_cast<uInt>(len));
        detail::append_u32be(out, static_cast<std::uint32_t>(crc));
    };

    std::vector<std::uint8_t> ihdr;
    detail::append_u32be(ihdr, static_cast<std::uint32_t>(img.width));
    detail::append_u32be(ihdr, static_cast<std::uint32_t>(img.height));
    ihdr.push_back(8);   // bit depth
    ihdr.push_back(2);   // truecolor
    ihdr.push_back(0);   // compression
    ihdr.push_back(0);   // filter
    ihdr.push_back(0);   // no interlace
    chunk("IHDR", ihdr.data(), ihdr.size());
    chunk("IDAT", comp.data(), comp.size());
    chunk("IEND", nullptr, 0);
    return out;
}

/// Decodes binary PPM (P6) with maxval 255. Header comments are honored.
inline Image decode_ppm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
    std::size_t pos = 0;
    auto skip_space = [&] {
        while (pos < bytes.size()) {
            if (std::isspace(bytes[pos])) {
                ++pos;
            } else if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
    };
    auto read_int = [&]() -> long {
        skip_space();
        if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
            throw DataError(name + ": malformed PPM header");
        }
        long v = 0;
        while (pos < bytes.size() && std::isdigit(bytes[pos])) {
            v = v * 10 + (bytes[pos] - '0');
            if (v > (1L << 24)) throw DataError(name + ": PPM header value out of range");
            ++pos;
        }
        return v;
    };

    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        throw DataError(name + ": not a binary PPM (P6) file");
    }
    pos = 2;
    const long w = read_int();
    const long h = read_int();
    const long maxval = read_int();
    if (w < 1 || h < 1) throw DataError(name + ": invalid PPM dimensions");
    if (maxval != 255) {
        throw DataError(name + ": unsupported PPM maxval " + std::to_string(maxval));
    }
    if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
        throw DataError(name + ": malformed PPM header");
    }
    ++pos;  // single whitespace separates header from pixel data
    const std::size_t need = static_cast<std::size_t>(w) * h * 3;
    if (bytes.size() - pos < need) throw DataError(name + ": truncated PPM pixel data");

    Image img;
    img.width = static_cast<int>(w);
    img.height = static_cast<int>(h);
    img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                   bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
    return img;
}

inline std::vector<std::uint8_t> encode_ppm(const Image& img) {
    const std::string header =
        "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.rgb.begin(), img.rgb.end());
    return out;
}

/// Loads a PNG or binary PPM, sniffing the format from the file content.
inline Image load_image(const std::string& path, bool* dropped_alpha = nullptr) {
    const std::vector<std::uint8_t> bytes = read_file(path);
    if (looks_like_png(bytes)) return decode_png(bytes, path, dropped_alpha);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') {
        if (dropped_alpha) *dropped_alpha = false;
        return decode_ppm(bytes, path);
    }
    throw DataError(path + ": unsupported image format (PNG and binary PPM supported)");
}

inline void save_png(const std::string& path, const Image& img) {
    const std::vector<std::uint8_t> bytes = encode_png(img);
    write_file_atomic(path, bytes.data(), bytes.size());
}

inline void save_ppm(const std::string& path, const Image& img) {
    const std::vector<std::uint8_t> bytes = encode_ppm(img);
    write_file_atomic(path, bytes.data(), bytes.size());
}

/// (1, 3, H, W) tensor in [0,1] from 8-bit pixels.
inline Tensor to_tensor(const Image& img) {
    Tensor t(Shape{1, 3, img.height, img.width});
    double* d = t.data();
    const std::size_t hw = static_cast<std::size_t>(img.height) * img.width;
    for (std::size_t p = 0; p < hw; ++p) {
        for (int c = 0; c < 3; ++c) {
            d[c * hw + p] = img.rgb[p * 3 + c] / 255.0;
        }
    }
    return t;
}

/// Quantizes a (1, 3, H, W) tensor to 8-bit pixels: round(v*255) clamped.
inline Image from_tensor(const Tensor& t) {
    const Shape s = t.shape();
    if (s.n != 1 || s.c != 3) {
        throw ShapeError("from_tensor: expected 1x3xHxW, got " + s.str());
    }
    Image img;
    img.width = s.w;
    img.height = s.h;
    img.rgb.resize(static_cast<std::size_t>(s.h) * s.w * 3);
    const double* d = t.data();
    const std::size_t hw = static_cast<std::size_t>(s.h) * s.w;
    for (std::size_t p = 0; p < hw; ++p) {
        for (int c = 0; c < 3; ++c) {
            const long q = std::lround(d[c * hw + p] * 255.0);
            img.rgb[p * 3 + c] = static_cast<std::uint8_t>(std::clamp(q, 0L, 255L));
        }
    }
    return img;
}

/// Separable bilinear resize with half-pixel center alignment. A same-size
/// call reproduces the input values exactly.
inline Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) {
        throw ShapeError("resize_bilinear: output dims must be >= 1");
    }
    const Shape s = x.shape();
    std::vector<int> y0(out_h), y1(out_h), x0(out_w), x1(out_w);
    std::vector<double> fy(out_h), fx(out_w);
    auto fill_axis = [](int in_n, int out_n, std::vector<int>& i0, std::vector<int>& i1,
                        std::vector<double>& frac) {
        const double scale = static_cast<double>(in_n) / out_n;
        for (int o = 0; o < out_n; ++o) {
            double src = (o + 0.5) * scale - 0.5;
            src = std::clamp(src, 0.0, static_cast<double>(in_n - 1));
            i0[o] = static_cast<int>(src);
            i1[o] = std::min(i0[o] + 1, in_n - 1);
            frac[o] = src - i0[o];
        }
    };
    fill_axis(s.h, out_h, y0, y1, fy);
    fill_axis(s.w, out_w, x0, x1, fx);

    Tensor out(Shape{s.n, s.c, out_h, out_w});
    const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
    for (std::size_t p = 0; p < planes; ++p) {
        const double* src = x.data() + p * s.h * s.w;
        double* dst = out.data() + p * static_cast<std::size_t>(out_h) * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
            const double* r0 = src + static_cast<std::size_t>(y0[oy]) * s.w;
            const double* r1 = src + static_cast<std::size_t>(y1[oy]) * s.w;
            for (int ox = 0; ox < out_w; ++ox) {
                const double top = r0[x0[ox]] * (1.0 - fx[ox]) + r0[x1[ox]] * fx[ox];
                const double bot = r1[x0[ox]] * (1.0 - fx[ox]) + r1[x1[ox]] * fx[ox];
                dst[static_cast<std::size_t>(oy) * out_w + ox] =
                    top * (1.0 - fy[oy]) + bot * fy[oy];
            }
        }
    }
    return out;
}

/// Per-channel 256-bin histogram; each channel's counts sum to W*H.
inline std::array<std::array<std::int64_t, 256>, 3> histogram(const Image& img) {
    std::array<std::array<std::int64_t, 256>, 3> bins{};
    const std::size_t hw = static_cast<std::size_t>(img.width) * img.height;
    for (std::size_t p = 0; p < hw; ++p) {
        for (int c = 0; c < 3; ++c) {
            ++bins[c][img.rgb[p * 3 + c]];
        }
    }
    return bins;
}

/// Histogram CSV: header row then one row per bin with R, G, B counts.
inline void write_histogram_csv(const Image& img, const std::string& path) {
    const auto bins = histogram(img);
    std::string out = "bin,r,g,b\n";
    for (int i = 0; i < 256; ++i) {
        out += std::to_string(i) + "," + std::to_string(bins[0][i]) + "," +
               std::to_string(bins[1][i]) + "," + std::to_string(bins[2][i]) + "\n";
    }
    write_file_atomic(path, out.data(), out.size());
}

}  // namespace pdcf::io
