#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "pdcf/losses.hpp"
#include "pdcf/tensor.hpp"

namespace pdcf::metrics {

/// Sort-then-accumulate mean: bit-stable under any input ordering.
inline double stable_mean(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    double sum = 0.0;
    for (double x : v) sum += x;
    return sum / static_cast<double>(v.size());
}

/// Population standard deviation about the given mean, bit-stable.
inline double population_std(const std::vector<double>& v, double mean) {
    if (v.empty()) return 0.0;
    std::vector<double> sq(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double d = v[i] - mean;
        sq[i] = d * d;
    }
    std::sort(sq.begin(), sq.end());
    double sum = 0.0;
    for (double x : sq) sum += x;
    return std::sqrt(sum / static_cast<double>(v.size()));
}

namespace detail {

inline void require_color(const Tensor& x, const char* op) {
    if (x.shape().c != 3) {
        throw ShapeError(std::string(op) + ": input " + x.shape().str() +
                         " must have 3 channels");
    }
    if (x.shape().n != 1) {
        throw ShapeError(std::string(op) + ": expects a single image, got " + x.shape().str());
    }
}

/// Channel plane of a [0,1] image quantized to the 0..255 scale.
inline std::vector<double> quantized_plane(const Tensor& x, int c) {
    const Shape s = x.shape();
    std::vector<double> out(static_cast<std::size_t>(s.h) * s.w);
    const double* d = x.data() + static_cast<std::size_t>(c) * s.h * s.w;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = std::clamp(d[i], 0.0, 1.0);
        out[i] = std::round(v * 255.0);
    }
    return out;
}

/// Linear-interpolation percentile of an ascending-sorted sample, p in [0,100].
inline double percentile_sorted(const std::vector<double>& sorted, double p) {
    const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
}

}  // namespace detail

struct MsePsnr {
    double mse = 0.0;
    double psnr = 0.0;
};

/// Mean squared error and peak signal-to-noise ratio on the 0..255 scale.
/// Inputs in [0,1] are quantized to 8 bits before scoring. Identical inputs
/// give mse 0 and the +infinity psnr sentinel.
inline MsePsnr mse_psnr(const Tensor& x, const Tensor& y) {
    if (x.shape() != y.shape()) {
        throw ShapeError("mse_psnr: shape mismatch " + x.shape().str() + " vs " +
                         y.shape().str());
    }
    const double* xd = x.data();
    const double* yd = y.data();
    double acc = 0.0;
    const std::size_t n = x.numel();
    for (std::size_t i = 0; i < n; ++i) {
        const double a = std::round(std::clamp(xd[i], 0.0, 1.0) * 255.0);
        const double b = std::round(std::clamp(yd[i], 0.0, 1.0) * 255.0);
        acc += (a - b) * (a - b);
    }
    MsePsnr r;
    r.mse = acc / static_cast<double>(n);
    r.psnr = r.mse == 0.0 ? std::numeric_limits<double>::infinity()
                          : 10.0 * std::log10(255.0 * 255.0 / r.mse);
    return r;
}

/// Mean structural similarity over all valid gaussian-window positions,
/// channels and batch; same statistics as the differentiable loss but
/// computed by direct per-window accumulation. Returns a value in [-1, 1].
inline double ssim_index(const Tensor& x, const Tensor& y, int window = 11,
                         double sigma = 1.5) {
    if (x.shape() != y.shape()) {
        throw ShapeError("ssim_index: shape mismatch " + x.shape().str() + " vs " +
                         y.shape().str());
    }
    const Shape s = x.shape();
    if (s.h < window || s.w < window) {
        throw ShapeError("ssim_index: image " + s.str() + " smaller than the window");
    }
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    const std::vector<double> g = losses::gaussian_window(window, sigma);
    const int oh = s.h - window + 1;
    const int ow = s.w - window + 1;

    double total = 0.0;
    std::size_t count = 0;
    const std::size_t planes = static_cast<std::size_t>(s.n) * s.c;
    for (std::size_t p = 0; p < planes; ++p) {
        const double* xp = x.data() + p * s.h * s.w;
        const double* yp = y.data() + p * s.h * s.w;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
                for (int u = 0; u < window; ++u) {
                    for (int v = 0; v < window; ++v) {
                        const double wgt = g[static_cast<std::size_t>(u) * window + v];
                        const double a = xp[(oy + u) * s.w + (ox + v)];
                        const double b = yp[(oy + u) * s.w + (ox + v)];
                        mx += wgt * a;
                        my += wgt * b;
                        mxx += wgt * a * a;
                        myy += wgt * b * b;
                        mxy += wgt * a * b;
                    }
                }
                const double var_x = mxx - mx * mx;
                const double var_y = myy - my * my;
                const double cov = mxy - mx * my;
                total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) /
                         ((mx * mx + my * my + c1) * (var_x + var_y + c2));
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

/// Underwater colorfulness: opponent channels RG = R-G and YB = (R+G)/2 - B
/// on the 0..255 scale; alpha-trimmed mean (10% both tails) and population
/// variance about that trimmed mean. Zero for any gray image.
inline double uicm(const Tensor& x) {
    detail::require_color(x, "uicm");
    const std::vector<double> r = detail::quantized_plane(x, 0);
    const std::vector<double> g = detail::quantized_plane(x, 1);
    const std::vector<double> b = detail::quantized_plane(x, 2);
    const std::size_t n = r.size();
    std::vector<double> rg(n), yb(n);
    for (std::size_t i = 0; i < n; ++i) {
        rg[i] = r[i] - g[i];
        yb[i] = (r[i] + g[i]) / 2.0 - b[i];
    }

    auto trimmed_stats = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        const std::size_t t = static_cast<std::size_t>(0.1 * static_cast<double>(v.size()));
        double mean = 0.0;
        for (std::size_t i = t; i < v.size() - t; ++i) mean += v[i];
        mean /= static_cast<double>(v.size() - 2 * t);
        double var = 0.0;
        for (double x2 : v) var += (x2 - mean) * (x2 - mean);
        var /= static_cast<double>(v.size());
        return std::pair<double, double>{mean, var};
    };
    const auto [mu_rg, var_rg] = trimmed_stats(rg);
    const auto [mu_yb, var_yb] = trimmed_stats(yb);
    return -0.0268 * std::sqrt(mu_rg * mu_rg + mu_yb * mu_yb) +
           0.1586 * std::sqrt(var_rg + var_yb);
}

namespace detail {

/// Log-contrast measure EME = 2/(k1 k2) * sum over 8x8 blocks of
/// ln(max/min); partial edge blocks are truncated away. Zero extrema are
/// substituted with 1 so all-zero blocks contribute nothing while blocks
/// that merely touch zero still count. On 0..255-quantized planes every
/// nonzero magnitude is >= 1, so contributions are never negative.
inline double eme(const std::vector<double>& plane, int h, int w, const char* op) {
    const int block = 8;
    const int k1 = h / block;
    const int k2 = w / block;
    if (k1 < 1 || k2 < 1) {
        throw DataError(std::string(op) + ": image smaller than one 8x8 block");
    }
    double sum = 0.0;
    for (int by = 0; by < k1; ++by) {
        for (int bx = 0; bx < k2; ++bx) {
            double lo = plane[static_cast<std::size_t>(by) * block * w + bx * block];
            double hi = lo;
            for (int u = 0; u < block; ++u) {
                for (int v = 0; v < block; ++v) {
                    const double val = plane[static_cast<std::size_t>(by * block + u) * w +
                                             (bx * block + v)];
                    lo = std::min(lo, val);
                    hi = std::max(hi, val);
                }
            }
            if (lo == 0.0) lo = 1.0;
            if (hi == 0.0) hi = 1.0;
            sum += std::log(hi / lo);
        }
    }
    return 2.0 / (static_cast<double>(k1) * k2) * sum;
}

}  // namespace detail

/// Underwater sharpness: luma-weighted EME of the Sobel gradient-magnitude
/// maps of the three channels. Gradients are evaluated on the valid
/// (H-2) x (W-2) interior.
inline double uism(const Tensor& x) {
    detail::require_color(x, "uism");
    const Shape s = x.shape();
    if (s.h < 3 || s.w < 3) {
        throw DataError("uism: image smaller than the 3x3 gradient support");
    }
    const int mh = s.h - 2;
    const int mw = s.w - 2;
    static const double luma[3] = {0.299, 0.587, 0.114};
    double result = 0.0;
    for (int c = 0; c < 3; ++c) {
        const std::vector<double> p = detail::quantized_plane(x, c);
        std::vector<double> mag(static_cast<std::size_t>(mh) * mw);
        for (int y = 1; y < s.h - 1; ++y) {
            for (int xx = 1; xx < s.w - 1; ++xx) {
                const auto at = [&](int dy, int dx) {
                    return p[static_cast<std::size_t>(y + dy) * s.w + (xx + dx)];
                };
                const double gx = (at(-1, 1) + 2.0 * at(0, 1) + at(1, 1)) -
                                  (at(-1, -1) + 2.0 * at(0, -1) + at(1, -1));
                const double gy = (at(1, -1) + 2.0 * at(1, 0) + at(1, 1)) -
                                  (at(-1, -1) + 2.0 * at(-1, 0) + at(-1, 1));
                mag[static_cast<std::size_t>(y - 1) * mw + (xx - 1)] =
                    std::sqrt(gx * gx + gy * gy);
            }
        }
        result += luma[c] * detail::eme(mag, mh, mw, "uism");
    }
    return result;
}

/// Underwater contrast: Michelson log measure of the intensity plane
/// (channel mean) over 8x8 blocks. With w = (max-min)/(max+min), blocks
/// accumulate w*ln(w); the sign flip makes typical values positive.
inline double uiconm(const Tensor& x) {
    detail::require_color(x, "uiconm");
    const Shape s = x.shape();
    const int block = 8;
    const int k1 = s.h / block;
    const int k2 = s.w / block;
    if (k1 < 1 || k2 < 1) {
        throw DataError("uiconm: image smaller than one 8x8 block");
    }
    const std::vector<double> r = detail::quantized_plane(x, 0);
    const std::vector<double> g = detail::quantized_plane(x, 1);
    const std::vector<double> b = detail::quantized_plane(x, 2);
    std::vector<double> intensity(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) intensity[i] = (r[i] + g[i] + b[i]) / 3.0;

    double sum = 0.0;
    for (int by = 0; by < k1; ++by) {
        for (int bx = 0; bx < k2; ++bx) {
            double lo = intensity[static_cast<std::size_t>(by) * block * s.w + bx * block];
            double hi = lo;
            for (int u = 0; u < block; ++u) {
                for (int v = 0; v < block; ++v) {
                    const double val = intensity[static_cast<std::size_t>(by * block + u) * s.w +
                                                 (bx * block + v)];
                    lo = std::min(lo, val);
                    hi = std::max(hi, val);
                }
            }
            const double den = hi + lo;
            if (den == 0.0) continue;
            const double w = (hi - lo) / den;
            if (w <= 0.0) continue;
            sum += w * std::log(w);
        }
    }
    return -sum / (static_cast<double>(k1) * k2);
}

/// Linear combination of the colorfulness, sharpness and contrast indices.
inline double uiqm(const Tensor& x) {
    return 0.0282 * uicm(x) + 0.2953 * uism(x) + 3.5753 * uiconm(x);
}

struct Lab {
    double l = 0.0, a = 0.0, b = 0.0;
};

/// sRGB (0..255) to CIELAB under D65. The white point is taken as the row
/// sums of the linear-RGB-to-XYZ matrix, so (255,255,255) maps to exactly
/// L=100, a=b=0.
inline Lab srgb_to_lab(double r8, double g8, double b8) {
    auto lin = [](double c) {
        c /= 255.0;
        return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
    };
    const double rl = lin(r8), gl = lin(g8), bl = lin(b8);
    static const double m[3][3] = {{0.4124564, 0.3575761, 0.1804375},
                                   {0.2126729, 0.7151522, 0.0721750},
                                   {0.0193339, 0.1191920, 0.9503041}};
    const double xyz[3] = {m[0][0] * rl + m[0][1] * gl + m[0][2] * bl,
                           m[1][0] * rl + m[1][1] * gl + m[1][2] * bl,
                           m[2][0] * rl + m[2][1] * gl + m[2][2] * bl};
    const double white[3] = {m[0][0] + m[0][1] + m[0][2], m[1][0] + m[1][1] + m[1][2],
                             m[2][0] + m[2][1] + m[2][2]};
    auto f = [](double t) {
        const double delta = 6.0 / 29.0;
        return t > delta * delta * delta ? std::cbrt(t)
                                         : t / (3.0 * delta * delta) + 4.0 / 29.0;
    };
    const double fx = f(xyz[0] / white[0]);
    const double fy = f(xyz[1] / white[1]);
    const double fz = f(xyz[2] / white[2]);
    Lab lab;
    lab.l = 116.0 * fy - 16.0;
    lab.a = 500.0 * (fx - fy);
    lab.b = 200.0 * (fy - fz);
    return lab;
}

/// Largest LAB chroma reachable on the 8-bit sRGB cube surface; used to
/// normalize the chroma deviation term. Computed once and cached.
inline double max_srgb_chroma() {
    static const double cmax = [] {
        double best = 0.0;
        auto consider = [&best](int r, int g, int b) {
            const Lab lab = srgb_to_lab(r, g, b);
            best = std::max(best, std::sqrt(lab.a * lab.a + lab.b * lab.b));
        };
        for (int u = 0; u < 256; ++u) {
            for (int v = 0; v < 256; ++v) {
                consider(0, u, v);
                consider(255, u, v);
                consider(u, 0, v);
                consider(u, 255, v);
                consider(u, v, 0);
                consider(u, v, 255);
            }
        }
        return best;
    }();
    return cmax;
}

/// Colorimetric underwater quality: weighted sum of the normalized chroma
/// standard deviation, the 1st-to-99th percentile luminance spread, and the
/// mean saturation, all in CIELAB.
inline double uciqe(const Tensor& x) {
    detail::require_color(x, "uciqe");
    const std::vector<double> r = detail::quantized_plane(x, 0);
    const std::vector<double> g = detail::quantized_plane(x, 1);
    const std::vector<double> b = detail::quantized_plane(x, 2);
    const std::size_t n = r.size();

    std::vector<double> chroma(n), lum(n);
    double sat_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Lab lab = srgb_to_lab(r[i], g[i], b[i]);
        chroma[i] = std::sqrt(lab.a * lab.a + lab.b * lab.b);
        lum[i] = lab.l;
        const double den = std::sqrt(chroma[i] * chroma[i] + lab.l * lab.l);
        sat_sum += den == 0.0 ? 0.0 : chroma[i] / den;
    }

    const double cmax = max_srgb_chroma();
    std::vector<double> chroma_norm(n);
    for (std::size_t i = 0; i < n; ++i) chroma_norm[i] = chroma[i] / cmax;
    const double chroma_mean = stable_mean(chroma_norm);
    const double sigma_c = population_std(chroma_norm, chroma_mean);

    std::sort(lum.begin(), lum.end());
    const double con_l =
        (detail::percentile_sorted(lum, 99.0) - detail::percentile_sorted(lum, 1.0)) / 100.0;
    const double mu_s = sat_sum / static_cast<double>(n);
    return 0.4680 * sigma_c + 0.2745 * con_l + 0.2576 * mu_s;
}

}  // namespace pdcf::metrics
