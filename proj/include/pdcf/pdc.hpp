#pragma once

#include <optional>
#include <vector>

#include "pdcf/ops.hpp"
#include "pdcf/tensor.hpp"

namespace pdcf {

enum class PdcKind { central, angular, radial };

/// One weighted pixel difference: the tap at weight index `windex` multiplies
/// x(p + plus) - x(p + minus). Offsets are relative to the patch center.
struct PixelPair {
    int windex;
    int plus_dy, plus_dx;
    int minus_dy, minus_dx;
};

using PairSet = std::vector<PixelPair>;

/// Realized square kernel footprint: 3 for central/angular, 5 for radial.
inline int pdc_kernel_size(PdcKind kind) {
    return kind == PdcKind::radial ? 5 : 3;
}

/// Learnable weight layout per (out, in) channel pair. Central and angular
/// keep a full 3x3 grid (the angular center entry exists but never reaches
/// the output, so its gradient stays zero); radial stores one weight per
/// principal direction.
inline Shape pdc_weight_shape(PdcKind kind, int cout, int cin) {
    if (kind == PdcKind::radial) return Shape{cout, cin, 8, 1};
    return Shape{cout, cin, 3, 3};
}

inline const PairSet& pdc_pair_set(PdcKind kind) {
    // Ring positions of the 3x3 patch in clockwise order starting top-left.
    static const int ring[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, 1},
                                   {1, 1},   {1, 0},  {1, -1}, {0, -1}};
    // Principal directions N, NE, E, SE, S, SW, W, NW.
    static const int dirs[8][2] = {{-1, 0}, {-1, 1}, {0, 1},  {1, 1},
                                   {1, 0},  {1, -1}, {0, -1}, {-1, -1}};

    static const PairSet central = [] {
        PairSet ps;
        for (int u = 0; u < 3; ++u) {
            for (int v = 0; v < 3; ++v) {
                ps.push_back({u * 3 + v, u - 1, v - 1, 0, 0});
            }
        }
        return ps;
    }();
    static const PairSet angular = [] {
        PairSet ps;
        for (int k = 0; k < 8; ++k) {
            const int* a = ring[k];
            const int* b = ring[(k + 1) % 8];
            ps.push_back({(a[0] + 1) * 3 + (a[1] + 1), a[0], a[1], b[0], b[1]});
        }
        return ps;
    }();
    static const PairSet radial = [] {
        PairSet ps;
        for (int d = 0; d < 8; ++d) {
            ps.push_back({d, 2 * dirs[d][0], 2 * dirs[d][1], dirs[d][0], dirs[d][1]});
        }
        return ps;
    }();

    switch (kind) {
        case PdcKind::central: return central;
        case PdcKind::angular: return angular;
        default: return radial;
    }
}

/// Collects the pair differences of `kind` into an equivalent vanilla
/// convolution kernel of shape (Cout, Cin, k, k). Linear in w, so the
/// backward pass is the exact transpose scatter. The per-(out,in) taps of
/// the result always sum to zero.
inline Tensor kernel_transform(Tape* tape, const Tensor& w, PdcKind kind) {
    const Shape ws = w.shape();
    const Shape expect = pdc_weight_shape(kind, ws.n, ws.c);
    if (ws != expect) {
        throw ShapeError("kernel_transform: weights " + ws.str() + " must be " +
                         expect.str());
    }
    const int k = pdc_kernel_size(kind);
    const int half = k / 2;
    const PairSet& pairs = pdc_pair_set(kind);
    const int per_pair = ws.h * ws.w;

    Tensor kern(Shape{ws.n, ws.c, k, k}, 0.0);
    const double* wd = w.data();
    double* kd = kern.data();
    const std::size_t npairs = static_cast<std::size_t>(ws.n) * ws.c;
    for (std::size_t p = 0; p < npairs; ++p) {
        const double* wp = wd + p * per_pair;
        double* kp = kd + p * k * k;
        for (const PixelPair& pr : pairs) {
            kp[(pr.plus_dy + half) * k + (pr.plus_dx + half)] += wp[pr.windex];
            kp[(pr.minus_dy + half) * k + (pr.minus_dx + half)] -= wp[pr.windex];
        }
    }

    if (tape != nullptr && w.requires_grad()) {
        kern.set_requires_grad(true);
        auto wi = w.impl();
        auto ki = kern.impl();
        wi->ensure_grad();
        tape->record(ki, [=, &pairs]() {
            const double* gk = ki->grad.data();
            double* gw = wi->grad.data();
            const std::size_t np = static_cast<std::size_t>(wi->shape.n) * wi->shape.c;
            for (std::size_t p = 0; p < np; ++p) {
                const double* gkp = gk + p * k * k;
                double* gwp = gw + p * per_pair;
                for (const PixelPair& pr : pairs) {
                    gwp[pr.windex] += gkp[(pr.plus_dy + half) * k + (pr.plus_dx + half)] -
                                      gkp[(pr.minus_dy + half) * k + (pr.minus_dx + half)];
                }
            }
        });
    }
    return kern;
}

/// Pixel-difference convolution with same-size zero padding. Executes as a
/// vanilla convolution with the transformed kernel; gradients for w flow
/// through the transform.
inline Tensor pdc_forward(Tape* tape, const Tensor& x, const Tensor& w, PdcKind kind,
                          const std::optional<Tensor>& bias = std::nullopt) {
    return ops::conv2d(tape, x, kernel_transform(tape, w, kind), bias,
                       ops::Padding::same);
}

}  // namespace pdcf
