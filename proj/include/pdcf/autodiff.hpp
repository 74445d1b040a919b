#pragma once

#include <algorithm>
#include <functional>
#include <utility>
#include <vector>

#include "pdcf/tensor.hpp"

namespace pdcf {

/// Records the forward graph of one evaluation so gradients can be replayed.
///
/// Operations append one record each in execution order, so walking the
/// records backwards visits nodes in reverse topological order. A tape has a
/// single writer: one training step (or one grad_check evaluation) owns one
/// tape. backward() may be called repeatedly; leaf gradients accumulate
/// across calls, while gradients of tensors produced on this tape are reset
/// at the start of every replay. Use zero_grad() on leaves to reset them.
class Tape {
  public:
    /// Appends a backward rule for `output`. The rule reads output->grad and
    /// accumulates into the grads of the tensors it captured.
    void record(detail::TensorImplPtr output, std::function<void()> backward_fn) {
        records_.push_back({std::move(output), std::move(backward_fn)});
    }

    /// Runs reverse-mode accumulation from a scalar loss produced on this
    /// tape. Populates grad for every requires_grad leaf that participated.
    void backward(const Tensor& loss) {
        if (loss.numel() != 1) {
            throw ShapeError("backward: loss must be scalar, got " + loss.shape().str());
        }
        // Interior gradients start from zero on every replay; leaves keep
        // whatever they have accumulated so far.
        for (auto& r : records_) {
            r.output->ensure_grad();
            std::fill(r.output->grad.begin(), r.output->grad.end(), 0.0);
        }
        auto loss_impl = loss.impl();
        loss_impl->ensure_grad();
        loss_impl->grad[0] = 1.0;
        for (auto it = records_.rbegin(); it != records_.rend(); ++it) {
            it->backward_fn();
        }
    }

    void clear() { records_.clear(); }
    std::size_t size() const { return records_.size(); }

  private:
    struct Record {
        detail::TensorImplPtr output;
        std::function<void()> backward_fn;
    };
    std::vector<Record> records_;
};

/// Central-difference check of reverse-mode gradients.
///
/// f must evaluate a scalar from x; it is called with a recording tape once
/// for the analytic pass and with tape == nullptr for the perturbed forward
/// evaluations. Returns the max over coordinates of
///   |analytic - central| / max(|analytic|, |central|, 1e-12).
inline double grad_check(const std::function<Tensor(Tape*, const Tensor&)>& f,
                         Tensor x, double h = 1e-5) {
    x.set_requires_grad(true);
    x.zero_grad();
    Tape tape;
    Tensor loss = f(&tape, x);
    if (loss.numel() != 1) {
        throw ShapeError("grad_check: f must be scalar-valued");
    }
    tape.backward(loss);
    const std::vector<double> analytic = x.grad();

    double max_rel = 0.0;
    double* d = x.data();
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double keep = d[i];
        d[i] = keep + h;
        const double fp = f(nullptr, x).value();
        d[i] = keep - h;
        const double fm = f(nullptr, x).value();
        d[i] = keep;
        const double numeric = (fp - fm) / (2.0 * h);
        const double denom =
            std::max({std::abs(analytic[i]), std::abs(numeric), 1e-12});
        max_rel = std::max(max_rel, std::abs(analytic[i] - numeric) / denom);
    }
    return max_rel;
}

}  // namespace pdcf
