#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "pdcf/autodiff.hpp"
#include "pdcf/tensor.hpp"

namespace pdcf::ops {

enum class Padding { same, valid };

enum class Activation { mish, sigmoid, relu };

namespace detail {

using pdcf::detail::TensorImpl;
using pdcf::detail::TensorImplPtr;

inline bool taped(Tape* tape, std::initializer_list<const Tensor*> inputs) {
    if (tape == nullptr) return false;
    for (const Tensor* t : inputs) {
        if (t->requires_grad()) return true;
    }
    return false;
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape().str() +
                         " vs " + b.shape().str());
    }
}

// Numerically stable softplus; the linear branch kicks in at t > 20 where
// log1p(exp(t)) and t + log1p(exp(-t)) agree to machine precision.
inline double softplus(double t) {
    return t > 20.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

inline double stable_sigmoid(double t) {
    if (t >= 0.0) {
        return 1.0 / (1.0 + std::exp(-t));
    }
    const double e = std::exp(t);
    return e / (1.0 + e);
}

}  // namespace detail

/// 2-D cross-correlation with square odd kernel, stride 1 and zero padding.
/// Padding::same preserves the spatial size; Padding::valid shrinks it by
/// k - 1. x is (N, Cin, H, W), w is (Cout, Cin, k, k), bias is (1, Cout, 1, 1).
inline Tensor conv2d(Tape* tape, const Tensor& x, const Tensor& w,
                     const std::optional<Tensor>& bias = std::nullopt,
                     Padding padding = Padding::same) {
    const Shape xs = x.shape();
    const Shape ws = w.shape();
    if (ws.h != ws.w || ws.h % 2 == 0 || ws.h > 5) {
        throw ShapeError("conv2d: kernel must be square with odd size 1, 3 or 5, got " +
                         ws.str());
    }
    if (xs.c != ws.c) {
        throw ShapeError("conv2d: input " + xs.str() + " has " + std::to_string(xs.c) +
                         " channels but kernel " + ws.str() + " expects " +
                         std::to_string(ws.c));
    }
    const int k = ws.h;
    const int pad = padding == Padding::same ? (k - 1) / 2 : 0;
    const int oh = xs.h + 2 * pad - k + 1;
    const int ow = xs.w + 2 * pad - k + 1;
    if (oh < 1 || ow < 1) {
        throw ShapeError("conv2d: input " + xs.str() + " smaller than kernel " + ws.str());
    }
    if (bias && bias->shape() != Shape{1, ws.n, 1, 1}) {
        throw ShapeError("conv2d: bias " + bias->shape().str() + " must be 1x" +
                         std::to_string(ws.n) + "x1x1");
    }

    Tensor y(Shape{xs.n, ws.n, oh, ow});
    const double* xd = x.data();
    const double* wd = w.data();
    const double* bd = bias ? bias->data() : nullptr;
    double* yd = y.data();

    for (int n = 0; n < xs.n; ++n) {
        for (int co = 0; co < ws.n; ++co) {
            const double b0 = bd ? bd[co] : 0.0;
            for (int oy = 0; oy < oh; ++oy) {
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = b0;
                    for (int ci = 0; ci < xs.c; ++ci) {
                        const double* xrow =
                            xd + ((static_cast<std::size_t>(n) * xs.c + ci) * xs.h) * xs.w;
                        const double* wrow =
                            wd + ((static_cast<std::size_t>(co) * ws.c + ci) * k) * k;
                        for (int u = 0; u < k; ++u) {
                            const int iy = oy + u - pad;
                            if (iy < 0 || iy >= xs.h) continue;
                            for (int v = 0; v < k; ++v) {
                                const int ix = ox + v - pad;
                                if (ix < 0 || ix >= xs.w) continue;
                                acc += wrow[u * k + v] * xrow[iy * xs.w + ix];
                            }
                        }
                    }
                    yd[((static_cast<std::size_t>(n) * ws.n + co) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }

    if (detail::taped(tape, bias ? std::initializer_list<const Tensor*>{&x, &w, &*bias}
                                 : std::initializer_list<const Tensor*>{&x, &w})) {
        y.set_requires_grad(true);
        auto xi = x.impl();
        auto wi = w.impl();
        auto bi = bias ? bias->impl() : nullptr;
        auto yi = y.impl();
        const bool need_x = xi->requires_grad;
        const bool need_w = wi->requires_grad;
        const bool need_b = bi && bi->requires_grad;
        if (need_x) xi->ensure_grad();
        if (need_w) wi->ensure_grad();
        if (need_b) bi->ensure_grad();
        tape->record(yi, [=]() {
            const Shape xs2 = xi->shape;
            const Shape ws2 = wi->shape;
            const double* gy = yi->grad.data();
            const double* xd2 = xi->data.data();
            const double* wd2 = wi->data.data();
            double* gx = need_x ? xi->grad.data() : nullptr;
            double* gw = need_w ? wi->grad.data() : nullptr;
            double* gb = need_b ? bi->grad.data() : nullptr;
            for (int n = 0; n < xs2.n; ++n) {
                for (int co = 0; co < ws2.n; ++co) {
                    for (int oy = 0; oy < oh; ++oy) {
                        for (int ox = 0; ox < ow; ++ox) {
                            const double g =
                                gy[((static_cast<std::size_t>(n) * ws2.n + co) * oh + oy) * ow +
                                   ox];
                            if (g == 0.0) continue;
                            if (gb) gb[co] += g;
                            for (int ci = 0; ci < xs2.c; ++ci) {
                                const std::size_t xbase =
                                    ((static_cast<std::size_t>(n) * xs2.c + ci) * xs2.h) * xs2.w;
                                const std::size_t wbase =
                                    ((static_cast<std::size_t>(co) * ws2.c + ci) * k) * k;
                                for (int u = 0; u < k; ++u) {
                                    const int iy = oy + u - pad;
                                    if (iy < 0 || iy >= xs2.h) continue;
                                    for (int v = 0; v < k; ++v) {
                                        const int ix = ox + v - pad;
                                        if (ix < 0 || ix >= xs2.w) continue;
                                        if (gx) gx[xbase + iy * xs2.w + ix] += g * wd2[wbase + u * k + v];
                                        if (gw) gw[wbase + u * k + v] += g * xd2[xbase + iy * xs2.w + ix];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        });
    }
    return y;
}

/// Per-channel convolution with a fixed (non-learnable) square kernel.
/// Gradients flow to x only.
inline Tensor depthwise_fixed(Tape* tape, const Tensor& x,
                              const std::vector<double>& kernel, int k,
                              Padding padding) {
    if (k % 2 == 0 || static_cast<int>(kernel.size()) != k * k) {
        throw ShapeError("depthwise_fixed: kernel must be odd square");
    }
    const Shape xs = x.shape();
    const int pad = padding == Padding::same ? (k - 1) / 2 : 0;
    const int oh = xs.h + 2 * pad - k + 1;
    const int ow = xs.w + 2 * pad - k + 1;
    if (oh < 1 || ow < 1) {
        throw ShapeError("depthwise_fixed: input " + xs.str() + " smaller than " +
                         std::to_string(k) + "x" + std::to_string(k) + " window");
    }

    Tensor y(Shape{xs.n, xs.c, oh, ow});
    const double* xd = x.data();
    double* yd = y.data();
    const std::size_t slices = static_cast<std::size_t>(xs.n) * xs.c;
    for (std::size_t s = 0; s < slices; ++s) {
        const double* xp = xd + s * xs.h * xs.w;
        double* yp = yd + s * static_cast<std::size_t>(oh) * ow;
        for (int oy = 0; oy < oh; ++oy) {
            for (int ox = 0; ox < ow; ++ox) {
                double acc = 0.0;
                for (int u = 0; u < k; ++u) {
                    const int iy = oy + u - pad;
                    if (iy < 0 || iy >= xs.h) continue;
                    for (int v = 0; v < k; ++v) {
                        const int ix = ox + v - pad;
                        if (ix < 0 || ix >= xs.w) continue;
                        acc += kernel[u * k + v] * xp[iy * xs.w + ix];
                    }
                }
                yp[oy * ow + ox] = acc;
            }
        }
    }

    if (detail::taped(tape, {&x})) {
        y.set_requires_grad(true);
        auto xi = x.impl();
        auto yi = y.impl();
        xi->ensure_grad();
        std::vector<double> kcopy = kernel;
        tape->record(yi, [=]() {
            const Shape xs2 = xi->shape;
            const double* gy = yi->grad.data();
            double* gx = xi->grad.data();
            const std::size_t nslices = static_cast<std::size_t>(xs2.n) * xs2.c;
            for (std::size_t s = 0; s < nslices; ++s) {
                const double* gyp = gy + s * static_cast<std::size_t>(oh) * ow;
                double* gxp = gx + s * xs2.h * xs2.w;
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox) {
                        const double g = gyp[oy * ow + ox];
                        if (g == 0.0) continue;
                        for (int u = 0; u < k; ++u) {
                            const int iy = oy + u - pad;
                            if (iy < 0 || iy >= xs2.h) continue;
                            for (int v = 0; v < k; ++v) {
                                const int ix = ox + v - pad;
                                if (ix < 0 || ix >= xs2.w) continue;
                                gxp[iy * xs2.w + ix] += g * kcopy[u * k + v];
                            }
                        }
                    }
                }
            }
        });
    }
    return y;
}

/// 4-neighbor Laplacian stencil [[0,1,0],[1,-4,1],[0,1,0]], same padding,
/// applied per channel.
inline Tensor laplacian(Tape* tape, const Tensor& x) {
    static const std::vector<double> stencil = {0, 1, 0, 1, -4, 1, 0, 1, 0};
    return depthwise_fixed(tape, x, stencil, 3, Padding::same);
}

inline Tensor activation(Tape* tape, const Tensor& x, Activation kind) {
    Tensor y(x.shape());
    const double* xd = x.data();
    double* yd = y.data();
    const std::size_t n = x.numel();
    switch (kind) {
        case Activation::mish:
            for (std::size_t i = 0; i < n; ++i) {
                yd[i] = xd[i] * std::tanh(detail::softplus(xd[i]));
            }
            break;
        case Activation::sigmoid:
            for (std::size_t i = 0; i < n; ++i) yd[i] = detail::stable_sigmoid(xd[i]);
            break;
        case Activation::relu:
            for (std::size_t i = 0; i < n; ++i) yd[i] = xd[i] > 0.0 ? xd[i] : 0.0;
            break;
    }
    if (detail::taped(tape, {&x})) {
        y.set_requires_grad(true);
        auto xi = x.impl();
        auto yi = y.impl();
        xi->ensure_grad();
        tape->record(yi, [=]() {
            const double* gy = yi->grad.data();
            const double* xv = xi->data.data();
            const double* yv = yi->data.data();
            double* gx = xi->grad.data();
            const std::size_t m = xi->data.size();
            switch (kind) {
                case Activation::mish:
                    for (std::size_t i = 0; i < m; ++i) {
                        const double t = xv[i];
                        const double ts = std::tanh(detail::softplus(t));
                        gx[i] += gy[i] * (ts + t * (1.0 - ts * ts) * detail::stable_sigmoid(t));
                    }
                    break;
                case Activation::sigmoid:
                    for (std::size_t i = 0; i < m; ++i) {
                        gx[i] += gy[i] * yv[i] * (1.0 - yv[i]);
                    }
                    break;
                case Activation::relu:
                    for (std::size_t i = 0; i < m; ++i) {
                        gx[i] += xv[i] > 0.0 ? gy[i] : 0.0;
                    }
                    break;
            }
        });
    }
    return y;
}

/// Per-(image, channel) normalization to zero mean / unit variance followed
/// by a learnable affine. gamma and beta are (1, C, 1, 1).
inline Tensor instance_norm(Tape* tape, const Tensor& x, const Tensor& gamma,
                            const Tensor& beta, double eps = 1e-5) {
    const Shape xs = x.shape();
    const Shape affine{1, xs.c, 1, 1};
    if (gamma.shape() != affine || beta.shape() != affine) {
        throw ShapeError("instance_norm: affine params " + gamma.shape().str() + "/" +
                         beta.shape().str() + " must be " + affine.str());
    }
    if (xs.h * xs.w < 2) {
        throw ShapeError("instance_norm: needs at least 2 spatial elements, got " + xs.str());
    }

    const int hw = xs.h * xs.w;
    Tensor y(xs);
    std::vector<double> means(static_cast<std::size_t>(xs.n) * xs.c);
    std::vector<double> inv_stds(means.size());
    const double* xd = x.data();
    const double* gd = gamma.data();
    const double* bd = beta.data();
    double* yd = y.data();
    for (int n = 0; n < xs.n; ++n) {
        for (int c = 0; c < xs.c; ++c) {
            const std::size_t s = static_cast<std::size_t>(n) * xs.c + c;
            const double* xp = xd + s * hw;
            double mean = 0.0;
            for (int i = 0; i < hw; ++i) mean += xp[i];
            mean /= hw;
            double var = 0.0;
            for (int i = 0; i < hw; ++i) {
                const double d = xp[i] - mean;
                var += d * d;
            }
            var /= hw;
            const double inv_std = 1.0 / std::sqrt(var + eps);
            means[s] = mean;
            inv_stds[s] = inv_std;
            double* yp = yd + s * hw;
            for (int i = 0; i < hw; ++i) {
                yp[i] = gd[c] * ((xp[i] - mean) * inv_std) + bd[c];
            }
        }
    }

    if (detail::taped(tape, {&x, &gamma, &beta})) {
        y.set_requires_grad(true);
        auto xi = x.impl();
        auto gi = gamma.impl();
        auto bi = beta.impl();
        auto yi = y.impl();
        const bool need_x = xi->requires_grad;
        const bool need_g = gi->requires_grad;
        const bool need_b = bi->requires_grad;
        if (need_x) xi->ensure_grad();
        if (need_g) gi->ensure_grad();
        if (need_b) bi->ensure_grad();
        tape->record(yi, [=, means = std::move(means), inv_stds = std::move(inv_stds)]() {
            const Shape s2 = xi->shape;
            const int hw2 = s2.h * s2.w;
            const double* gy = yi->grad.data();
            const double* xv = xi->data.data();
            const double* gv = gi->data.data();
            for (int n = 0; n < s2.n; ++n) {
                for (int c = 0; c < s2.c; ++c) {
                    const std::size_t s = static_cast<std::size_t>(n) * s2.c + c;
                    const double* xp = xv + s * hw2;
                    const double* gp = gy + s * hw2;
                    const double mean = means[s];
                    const double inv_std = inv_stds[s];
                    double sum_g = 0.0, sum_gx = 0.0;
                    for (int i = 0; i < hw2; ++i) {
                        const double xhat = (xp[i] - mean) * inv_std;
                        sum_g += gp[i];
                        sum_gx += gp[i] * xhat;
                    }
                    if (need_g) gi->grad[c] += sum_gx;
                    if (need_b) bi->grad[c] += sum_g;
                    if (need_x) {
                        double* gxp = xi->grad.data() + s * hw2;
                        const double scale = gv[c] * inv_std;
                        for (int i = 0; i < hw2; ++i) {
                            const double xhat = (xp[i] - mean) * inv_std;
                            gxp[i] += scale * (gp[i] - sum_g / hw2 - xhat * sum_gx / hw2);
                        }
                    }
                }
            }
        });
    }
    return y;
}

/// Concatenates along the channel axis; inputs must agree on N, H, W.
inline Tensor concat_channels(Tape* tape, const std::vector<Tensor>& xs) {
    if (xs.size() < 2) {
        throw ShapeError("concat_channels: needs at least 2 inputs");
    }
    const Shape first = xs.front().shape();
    int total_c = 0;
    for (const Tensor& t : xs) {
        const Shape s = t.shape();
        if (s.n != first.n || s.h != first.h || s.w != first.w) {
            throw ShapeError("concat_channels: spatial/batch mismatch " + first.str() +
                             " vs " + s.str());
        }
        total_c += s.c;
    }
    Tensor y(Shape{first.n, total_c, first.h, first.w});
    const int hw = first.h * first.w;
    double* yd = y.data();
    int coff = 0;
    for (const Tensor& t : xs) {
        const double* td = t.data();
        const int tc = t.shape().c;
        for (int n = 0; n < first.n; ++n) {
            std::copy(td + static_cast<std::size_t>(n) * tc * hw,
                      td + static_cast<std::size_t>(n + 1) * tc * hw,
                      yd + (static_cast<std::size_t>(n) * total_c + coff) * hw);
        }
        coff += tc;
    }

    bool any_grad = false;
    for (const Tensor& t : xs) any_grad = any_grad || t.requires_grad();
    if (tape && any_grad) {
        y.set_requires_grad(true);
        std::vector<pdcf::detail::TensorImplPtr> impls;
        impls.reserve(xs.size());
        for (const Tensor& t : xs) {
            impls.push_back(t.impl());
            if (t.requires_grad()) t.impl()->ensure_grad();
        }
        auto yi = y.impl();
        tape->record(yi, [=]() {
            const double* gy = yi->grad.data();
            int off = 0;
            for (const auto& xi : impls) {
                const int tc = xi->shape.c;
                if (xi->requires_grad) {
                    double* gx = xi->grad.data();
                    for (int n = 0; n < first.n; ++n) {
                        const double* src = gy + (static_cast<std::size_t>(n) * total_c + off) * hw;
                        double* dst = gx + static_cast<std::size_t>(n) * tc * hw;
                        for (int i = 0; i < tc * hw; ++i) dst[i] += src[i];
                    }
                }
                off += tc;
            }
        });
    }
    return y;
}

namespace detail {

// Shared skeleton for same-shape binary elementwise ops.
template <typename Fwd, typename Bwd>
Tensor binary_elementwise(Tape* tape, const Tensor& a, const Tensor& b, const char* name,
                          Fwd fwd, Bwd bwd) {
    check_same_shape(a, b, name);
    Tensor y(a.shape());
    const double* ad = a.data();
    const double* bd = b.data();
    double* yd = y.data();
    const std::size_t n = a.numel();
    for (std::size_t i = 0; i < n; ++i) yd[i] = fwd(ad[i], bd[i]);
    if (taped(tape, {&a, &b})) {
        y.set_requires_grad(true);
        auto ai = a.impl();
        auto bi = b.impl();
        auto yi = y.impl();
        const bool need_a = ai->requires_grad;
        const bool need_b = bi->requires_grad;
        if (need_a) ai->ensure_grad();
        if (need_b) bi->ensure_grad();
        tape->record(yi, [=]() {
            const double* gy = yi->grad.data();
            const double* av = ai->data.data();
            const double* bv = bi->data.data();
            const std::size_t m = yi->data.size();
            for (std::size_t i = 0; i < m; ++i) {
                double da = 0.0, db = 0.0;
                bwd(av[i], bv[i], gy[i], da, db);
                if (need_a) ai->grad[i] += da;
                if (need_b) bi->grad[i] += db;
            }
        });
    }
    return y;
}

}  // namespace detail

inline Tensor add(Tape* tape, const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(
        tape, a, b, "add", [](double x, double y) { return x + y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = g;
        });
}

inline Tensor sub(Tape* tape, const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(
        tape, a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double, double g, double& da, double& db) {
            da = g;
            db = -g;
        });
}

/// Elementwise product of same-shape tensors.
inline Tensor hadamard(Tape* tape, const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(
        tape, a, b, "hadamard", [](double x, double y) { return x * y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g * y;
            db = g * x;
        });
}

inline Tensor divide(Tape* tape, const Tensor& a, const Tensor& b) {
    return detail::binary_elementwise(
        tape, a, b, "divide", [](double x, double y) { return x / y; },
        [](double x, double y, double g, double& da, double& db) {
            da = g / y;
            db = -g * x / (y * y);
        });
}

inline Tensor mul_scalar(Tape* tape, const Tensor& x, double s) {
    Tensor y(x.shape());
    const double* xd = x.data();
    double* yd = y.data();
    for (std::size_t i = 0; i < x.numel(); ++i) yd[i] = xd[i] * s;
    if (detail::taped(tape, {&x})) {
        y.set_requires_grad(true);
        auto xi = x.impl();
        auto yi = y.impl();
        xi->ensure_grad();
        tape->record(yi, [=]() {
            for (std::size_t i = 0; i < yi->data.size(); ++i) {
                xi->grad[i] += yi->grad[i] * s;
            }
        });
    }
    return y;
}

inline Tensor add_scalar(Tape* tape, const Tensor& x, double s) {
    Tensor y(x.shape());
    const double* xd = x.data();
    double* yd = y.data();
    for (std::size_t i = 0; i < x.numel(); ++i) yd[i] = xd[i] + s;
    if (detail::taped(tape, {&x})) {
        y.set_requires_grad(true);
        auto xi = x.impl();
        auto yi = y.impl();
        xi->ensure_grad();
        tape->record(yi, [=]() {
            for (std::size_t i = 0; i < yi->data.size(); ++i) {
                xi->grad[i] += yi->grad[i];
            }
        });
    }
    return y;
}

/// Elementwise square root; values must be positive.
inline Tensor sqrt_elem(Tape* tape, const Tensor& x) {
    Tensor y(x.shape());
    const double* xd = x.data();
    double* yd = y.data();
    for (std::size_t i = 0; i < x.numel(); ++i) {
        if (xd[i] <= 0.0) {
            throw NumericError("sqrt_elem: non-positive operand");
        }
        yd[i] = std::sqrt(xd[i]);
    }
    if (detail::taped(tape, {&x})) {
        y.set_requires_grad(true);
        auto xi = x.impl();
        auto yi = y.impl();
        xi->ensure_grad();
        tape->record(yi, [=]() {
            for (std::size_t i = 0; i < yi->data.size(); ++i) {
                xi->grad[i] += yi->grad[i] * 0.5 / yi->data[i];
            }
        });
    }
    return y;
}

/// Scales each (n, c) slice of x by the matching entry of s (N, C, 1, 1).
inline Tensor scale_channels(Tape* tape, const Tensor& x, const Tensor& s) {
    const Shape xs = x.shape();
    if (s.shape() != Shape{xs.n, xs.c, 1, 1}) {
        throw ShapeError("scale_channels: scales " + s.shape().str() + " must be " +
                         Shape{xs.n, xs.c, 1, 1}.str());
    }
    Tensor y(xs);
    const int hw = xs.h * xs.w;
    const double* xd = x.data();
    const double* sd = s.data();
    double* yd = y.data();
    const std::size_t slices = static_cast<std::size_t>(xs.n) * xs.c;
    for (std::size_t i = 0; i < slices; ++i) {
        for (int j = 0; j < hw; ++j) yd[i * hw + j] = xd[i * hw + j] * sd[i];
    }
    if (detail::taped(tape, {&x, &s})) {
        y.set_requires_grad(true);
        auto xi = x.impl();
        auto si = s.impl();
        auto yi = y.impl();
        const bool need_x = xi->requires_grad;
        const bool need_s = si->requires_grad;
        if (need_x) xi->ensure_grad();
        if (need_s) si->ensure_grad();
        tape->record(yi, [=]() {
            const double* gy = yi->grad.data();
            const double* xv = xi->data.data();
            const double* sv = si->data.data();
            const std::size_t ns = static_cast<std::size_t>(xi->shape.n) * xi->shape.c;
            const int hw2 = xi->shape.h * xi->shape.w;
            for (std::size_t i = 0; i < ns; ++i) {
                double acc = 0.0;
                for (int j = 0; j < hw2; ++j) {
                    const double g = gy[i * hw2 + j];
                    if (need_x) xi->grad[i * hw2 + j] += g * sv[i];
                    acc += g * xv[i * hw2 + j];
                }
                if (need_s) si->grad[i] += acc;
            }
        });
    }
    return y;
}

/// Mean over the spatial axes: (N, C, H, W) -> (N, C, 1, 1).
inline Tensor global_avg_pool(Tape* tape, const Tensor& x) {
    const Shape xs = x.shape();
    Tensor y(Shape{xs.n, xs.c, 1, 1});
    const int hw = xs.h * xs.w;
    const double* xd = x.data();
    double* yd = y.data();
    const std::size_t slices = static_cast<std::size_t>(xs.n) * xs.c;
    for (std::size_t i = 0; i < slices; ++i) {
        double acc = 0.0;
        for (int j = 0; j < hw; ++j) acc += xd[i * hw + j];
        yd[i] = acc / hw;
    }
    if (detail::taped(tape, {&x})) {
        y.set_requires_grad(true);
        auto xi = x.impl();
        auto yi = y.impl();
        xi->ensure_grad();
        tape->record(yi, [=]() {
            const int hw2 = xi->shape.h * xi->shape.w;
            const std::size_t ns = yi->data.size();
            for (std::size_t i = 0; i < ns; ++i) {
                const double g = yi->grad[i] / hw2;
                for (int j = 0; j < hw2; ++j) xi->grad[i * hw2 + j] += g;
            }
        });
    }
    return y;
}

inline Tensor sum_all(Tape* tape, const Tensor& x) {
    double acc = 0.0;
    const double* xd = x.data();
    for (std::size_t i = 0; i < x.numel(); ++i) acc += xd[i];
    Tensor y = Tensor::scalar(acc);
    if (detail::taped(tape, {&x})) {
        y.set_requires_grad(true);
        auto xi = x.impl();
        auto yi = y.impl();
        xi->ensure_grad();
        tape->record(yi, [=]() {
            const double g = yi->grad[0];
            for (double& gx : xi->grad) gx += g;
        });
    }
    return y;
}

inline Tensor mean_all(Tape* tape, const Tensor& x) {
    return mul_scalar(tape, sum_all(tape, x), 1.0 / static_cast<double>(x.numel()));
}

}  // namespace pdcf::ops
