#pragma once

#include <cmath>
#include <vector>

#include "pdcf/network.hpp"
#include "pdcf/tensor.hpp"

namespace pdcf {

/// Bias-corrected first-order optimizer. Moment buffers are allocated on the
/// first step and stay aligned with the registry order, so the same instance
/// must be reused against the same registry.
class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    /// One update over every parameter: m <- b1*m + (1-b1)*g,
    /// v <- b2*v + (1-b2)*g^2, p <- p - lr * m_hat / (sqrt(v_hat) + eps).
    /// Rejects non-finite gradients, naming the offending parameter.
    void step(ParamRegistry& params) {
        const auto& entries = params.entries();
        if (m_.empty()) {
            m_.resize(entries.size());
            v_.resize(entries.size());
            for (std::size_t i = 0; i < entries.size(); ++i) {
                m_[i].assign(entries[i].second.numel(), 0.0);
                v_[i].assign(entries[i].second.numel(), 0.0);
            }
        }
        if (m_.size() != entries.size()) {
            throw ShapeError("Adam: registry size changed between steps");
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (std::size_t i = 0; i < entries.size(); ++i) {
            const std::string& name = entries[i].first;
            Tensor p = entries[i].second;  // shared handle, mutates in place
            if (!p.has_grad()) {
                throw ShapeError("Adam: parameter " + name + " has no gradient");
            }
            double* pd = p.data();
            const double* g = p.grad().data();
            for (std::size_t j = 0; j < p.numel(); ++j) {
                if (!std::isfinite(g[j])) {
                    throw NumericError("non-finite gradient in parameter " + name);
                }
                m_[i][j] = beta1_ * m_[i][j] + (1.0 - beta1_) * g[j];
                v_[i][j] = beta2_ * v_[i][j] + (1.0 - beta2_) * g[j] * g[j];
                const double m_hat = m_[i][j] / bc1;
                const double v_hat = v_[i][j] / bc2;
                pd[j] -= lr_ * m_hat / (std::sqrt(v_hat) + eps_);
            }
        }
    }

    long step_count() const { return t_; }
    double learning_rate() const { return lr_; }

private:
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace pdcf
