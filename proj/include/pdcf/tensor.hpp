#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "pdcf/errors.hpp"

namespace pdcf {

/// Dense rank-4 shape: batch, channels, rows, cols.
struct Shape {
    int n = 1;
    int c = 1;
    int h = 1;
    int w = 1;

    std::size_t numel() const {
        return static_cast<std::size_t>(n) * c * h * w;
    }

    bool operator==(const Shape& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    std::string str() const {
        std::ostringstream os;
        os << n << "x" << c << "x" << h << "x" << w;
        return os.str();
    }

    void validate() const {
        if (n < 1 || c < 1 || h < 1 || w < 1) {
            throw ShapeError("invalid tensor shape " + str());
        }
    }
};

namespace detail {

struct TensorImpl {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;  // empty until first needed; same length as data otherwise
    bool requires_grad = false;

    explicit TensorImpl(Shape s, double fill = 0.0)
        : shape(s), data(s.numel(), fill) {
        s.validate();
    }

    void ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
    }
};

using TensorImplPtr = std::shared_ptr<TensorImpl>;

}  // namespace detail

/// Dense rank-4 tensor of doubles with an optional gradient buffer.
///
/// Tensor is a shared handle: copies alias the same storage (clone() makes a
/// deep copy). All elements are stored row-major in (n, c, h, w) order.
class Tensor {
  public:
    Tensor() : impl_(std::make_shared<detail::TensorImpl>(Shape{})) {}

    explicit Tensor(Shape s, double fill = 0.0)
        : impl_(std::make_shared<detail::TensorImpl>(s, fill)) {}

    static Tensor zeros(Shape s) { return Tensor(s, 0.0); }

    static Tensor full(Shape s, double v) { return Tensor(s, v); }

    static Tensor scalar(double v) { return Tensor(Shape{1, 1, 1, 1}, v); }

    static Tensor from_vector(Shape s, std::vector<double> values) {
        if (values.size() != s.numel()) {
            throw ShapeError("from_vector: " + std::to_string(values.size()) +
                             " values for shape " + s.str());
        }
        Tensor t(s);
        t.impl_->data = std::move(values);
        return t;
    }

    const Shape& shape() const { return impl_->shape; }
    std::size_t numel() const { return impl_->shape.numel(); }

    double* data() { return impl_->data.data(); }
    const double* data() const { return impl_->data.data(); }
    std::vector<double>& values() { return impl_->data; }
    const std::vector<double>& values() const { return impl_->data; }

    std::size_t index(int n, int c, int h, int w) const {
        const Shape& s = impl_->shape;
        return ((static_cast<std::size_t>(n) * s.c + c) * s.h + h) * s.w + w;
    }

    double& at(int n, int c, int h, int w) {
        return impl_->data[index(n, c, h, w)];
    }
    double at(int n, int c, int h, int w) const {
        return impl_->data[index(n, c, h, w)];
    }

    /// Value of a 1-element tensor.
    double value() const {
        if (numel() != 1) {
            throw ShapeError("value(): tensor " + shape().str() + " is not scalar");
        }
        return impl_->data[0];
    }

    bool requires_grad() const { return impl_->requires_grad; }
    Tensor& set_requires_grad(bool v) {
        impl_->requires_grad = v;
        if (v) impl_->ensure_grad();
        return *this;
    }

    bool has_grad() const { return !impl_->grad.empty(); }
    std::vector<double>& grad() {
        impl_->ensure_grad();
        return impl_->grad;
    }
    const std::vector<double>& grad() const {
        const_cast<detail::TensorImpl*>(impl_.get())->ensure_grad();
        return impl_->grad;
    }
    void zero_grad() { impl_->grad.assign(impl_->data.size(), 0.0); }

    Tensor clone() const {
        Tensor t(impl_->shape);
        t.impl_->data = impl_->data;
        return t;
    }

    void fill(double v) {
        for (double& x : impl_->data) x = v;
    }

    bool all_finite() const {
        for (double v : impl_->data) {
            if (!std::isfinite(v)) return false;
        }
        return true;
    }

    bool same_storage(const Tensor& o) const { return impl_ == o.impl_; }

    detail::TensorImplPtr impl() const { return impl_; }

  private:
    detail::TensorImplPtr impl_;
};

}  // namespace pdcf
