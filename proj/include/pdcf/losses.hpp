#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "pdcf/ops.hpp"
#include "pdcf/tensor.hpp"

namespace pdcf {

struct LossConfig {
    double lambda_edge = 0.05;
    double epsilon = 1e-3;
    int ssim_window = 11;
    double ssim_sigma = 1.5;
    bool use_l2 = true;
    bool use_ssim = true;
    bool use_edge = true;

    void validate() const {
        if (lambda_edge < 0.0) throw DataError("LossConfig: lambda_edge must be >= 0");
        if (epsilon <= 0.0) throw DataError("LossConfig: epsilon must be > 0");
        if (ssim_window < 1 || ssim_window % 2 == 0) {
            throw DataError("LossConfig: ssim_window must be odd and positive");
        }
        if (ssim_sigma <= 0.0) throw DataError("LossConfig: ssim_sigma must be > 0");
        if (!use_l2 && !use_ssim && !use_edge) {
            throw DataError("LossConfig: at least one loss term must be enabled");
        }
    }
};

/// Raw per-term values alongside the weighted total. Disabled terms report 0.
struct LossBreakdown {
    double total = 0.0;
    double l2 = 0.0;
    double ssim = 0.0;
    double edge = 0.0;
};

namespace losses {

/// Normalized 2-D gaussian window, flattened row-major.
inline std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    const double half = (size - 1) / 2.0;
    double sum = 0.0;
    for (int u = 0; u < size; ++u) {
        for (int v = 0; v < size; ++v) {
            const double du = u - half;
            const double dv = v - half;
            const double g = std::exp(-(du * du + dv * dv) / (2.0 * sigma * sigma));
            w[static_cast<std::size_t>(u) * size + v] = g;
            sum += g;
        }
    }
    for (double& x : w) x /= sum;
    return w;
}

/// Mean of squared differences over all elements.
inline Tensor l2_loss(Tape* tape, const Tensor& x, const Tensor& y) {
    ops::detail::check_same_shape(x, y, "l2_loss");
    const Tensor d = ops::sub(tape, x, y);
    return ops::mean_all(tape, ops::hadamard(tape, d, d));
}

/// 1 - mean SSIM over all valid window positions, channels and batch.
/// Local statistics use a gaussian-weighted window; stabilizers assume a
/// dynamic range of 1.
inline Tensor ssim_loss(Tape* tape, const Tensor& x, const Tensor& y, int window = 11,
                        double sigma = 1.5) {
    ops::detail::check_same_shape(x, y, "ssim_loss");
    if (x.shape().h < window || x.shape().w < window) {
        throw ShapeError("ssim_loss: image " + x.shape().str() + " smaller than the " +
                         std::to_string(window) + "x" + std::to_string(window) + " window");
    }
    const double c1 = 0.01 * 0.01;
    const double c2 = 0.03 * 0.03;
    const std::vector<double> g = gaussian_window(window, sigma);

    auto blur = [&](const Tensor& t) {
        return ops::depthwise_fixed(tape, t, g, window, ops::Padding::valid);
    };
    const Tensor mu_x = blur(x);
    const Tensor mu_y = blur(y);
    const Tensor mu_xx = ops::hadamard(tape, mu_x, mu_x);
    const Tensor mu_yy = ops::hadamard(tape, mu_y, mu_y);
    const Tensor mu_xy = ops::hadamard(tape, mu_x, mu_y);
    const Tensor var_x = ops::sub(tape, blur(ops::hadamard(tape, x, x)), mu_xx);
    const Tensor var_y = ops::sub(tape, blur(ops::hadamard(tape, y, y)), mu_yy);
    const Tensor cov = ops::sub(tape, blur(ops::hadamard(tape, x, y)), mu_xy);

    const Tensor num = ops::hadamard(tape, ops::add_scalar(tape, ops::mul_scalar(tape, mu_xy, 2.0), c1),
                                     ops::add_scalar(tape, ops::mul_scalar(tape, cov, 2.0), c2));
    const Tensor den = ops::hadamard(tape, ops::add_scalar(tape, ops::add(tape, mu_xx, mu_yy), c1),
                                     ops::add_scalar(tape, ops::add(tape, var_x, var_y), c2));
    const Tensor index = ops::mean_all(tape, ops::divide(tape, num, den));
    return ops::add_scalar(tape, ops::mul_scalar(tape, index, -1.0), 1.0);
}

/// Charbonnier-style penalty on the difference of Laplacian-filtered images:
/// sqrt(mean((Lap(x) - Lap(y))^2) + eps^2). The Laplacian is linear, so the
/// difference of filtered images equals the filtered difference. Equals eps
/// exactly when x == y.
inline Tensor edge_loss(Tape* tape, const Tensor& x, const Tensor& y, double eps = 1e-3) {
    ops::detail::check_same_shape(x, y, "edge_loss");
    const Tensor lap = ops::laplacian(tape, ops::sub(tape, x, y));
    const Tensor msq = ops::mean_all(tape, ops::hadamard(tape, lap, lap));
    return ops::sqrt_elem(tape, ops::add_scalar(tape, msq, eps * eps));
}

/// Weighted objective over the enabled terms:
///   total = l2 + ssim + lambda * edge.
/// Fills `breakdown` (when given) with the raw term values for logging.
inline Tensor total_loss(Tape* tape, const Tensor& x, const Tensor& y,
                         const LossConfig& config, LossBreakdown* breakdown = nullptr) {
    config.validate();
    std::vector<Tensor> terms;
    LossBreakdown bd;
    if (config.use_l2) {
        Tensor t = l2_loss(tape, x, y);
        bd.l2 = t.value();
        terms.push_back(t);
    }
    if (config.use_ssim) {
        Tensor t = ssim_loss(tape, x, y, config.ssim_window, config.ssim_sigma);
        bd.ssim = t.value();
        terms.push_back(t);
    }
    if (config.use_edge) {
        Tensor t = edge_loss(tape, x, y, config.epsilon);
        bd.edge = t.value();
        terms.push_back(ops::mul_scalar(tape, t, config.lambda_edge));
    }
    Tensor total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) {
        total = ops::add(tape, total, terms[i]);
    }
    bd.total = total.value();
    if (breakdown) *breakdown = bd;
    return total;
}

}  // namespace losses
}  // namespace pdcf
