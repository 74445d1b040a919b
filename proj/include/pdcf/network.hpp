#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pdcf/ops.hpp"
#include "pdcf/pdc.hpp"
#include "pdcf/tensor.hpp"

namespace pdcf {

/// Feature levels available for fusion wiring: 0..3 select F0..F3 of the
/// FeatureBundle, 4 selects the output of the first fusion stage (only valid
/// as an input to the second stage).
struct NetworkConfig {
    int base_channels = 32;
    int se_reduction = 8;
    int dem_count = 3;
    bool ablate_pdc = false;
    std::array<std::array<int, 2>, 2> ffm_wiring{{{0, 3}, {4, 2}}};

    void validate() const {
        if (base_channels < 4 || base_channels % 4 != 0) {
            throw ShapeError("NetworkConfig: base_channels must be a positive multiple of 4, got " +
                             std::to_string(base_channels));
        }
        if (se_reduction < 1 || base_channels / se_reduction < 1) {
            throw ShapeError("NetworkConfig: se_reduction must satisfy 1 <= r <= C");
        }
        if (dem_count != 3) {
            throw ShapeError("NetworkConfig: dem_count is fixed at 3");
        }
        for (int stage = 0; stage < 2; ++stage) {
            for (int side = 0; side < 2; ++side) {
                const int lvl = ffm_wiring[stage][side];
                const int max_lvl = stage == 0 ? 3 : 4;
                if (lvl < 0 || lvl > max_lvl) {
                    throw ShapeError("NetworkConfig: ffm_wiring level " + std::to_string(lvl) +
                                     " out of range for stage " + std::to_string(stage + 1));
                }
            }
        }
    }
};

/// Ordered name -> tensor map over a model's learnable parameters. Entries
/// share storage with the owning layers, so loading data through the
/// registry updates the model in place. Insertion order is the checkpoint
/// manifest order.
class ParamRegistry {
public:
    Tensor add(std::string name, Tensor t) {
        for (const auto& [existing, unused] : items_) {
            if (existing == name) {
                throw ShapeError("ParamRegistry: duplicate parameter name " + name);
            }
        }
        t.set_requires_grad(true);
        items_.emplace_back(std::move(name), t);
        return items_.back().second;
    }

    const std::vector<std::pair<std::string, Tensor>>& entries() const { return items_; }

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : items_) {
            if (n == name) return &t;
        }
        return nullptr;
    }

    std::size_t total_params() const {
        std::size_t n = 0;
        for (const auto& [name, t] : items_) n += t.numel();
        return n;
    }

    void zero_grads() {
        for (auto& [name, t] : items_) t.zero_grad();
    }

    /// Returns the name of the first parameter with a non-finite gradient,
    /// or empty string when all gradients are finite.
    std::string first_non_finite_grad() const {
        for (const auto& [name, t] : items_) {
            if (!t.has_grad()) continue;
            for (std::size_t i = 0; i < t.numel(); ++i) {
                if (!std::isfinite(t.grad()[i])) return name;
            }
        }
        return {};
    }

private:
    std::vector<std::pair<std::string, Tensor>> items_;
};

namespace detail {

/// Seeded fan-in-scaled uniform initializer: weights ~ U(-1/sqrt(fan_in),
/// 1/sqrt(fan_in)), biases and norm shifts zero, norm scales one.
struct Initializer {
    std::mt19937_64 rng;

    explicit Initializer(std::uint64_t seed) : rng(seed) {}

    Tensor uniform(const Shape& s, int fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        Tensor t(s);
        double* d = t.data();
        for (std::size_t i = 0; i < t.numel(); ++i) d[i] = dist(rng);
        return t;
    }
};

}  // namespace detail

struct Conv2dLayer {
    Tensor weight;
    std::optional<Tensor> bias;

    Tensor forward(Tape* tape, const Tensor& x) const {
        return ops::conv2d(tape, x, weight, bias, ops::Padding::same);
    }

    static Conv2dLayer make(detail::Initializer& init, ParamRegistry& reg,
                            const std::string& name, int cout, int cin, int k,
                            bool with_bias) {
        Conv2dLayer layer;
        layer.weight = reg.add(name + ".weight", init.uniform(Shape{cout, cin, k, k}, cin * k * k));
        if (with_bias) {
            layer.bias = reg.add(name + ".bias", Tensor(Shape{1, cout, 1, 1}, 0.0));
        }
        return layer;
    }
};

struct PdcLayer {
    PdcKind kind = PdcKind::central;
    Tensor weight;
    std::optional<Tensor> bias;

    Tensor forward(Tape* tape, const Tensor& x) const {
        return pdc_forward(tape, x, weight, kind, bias);
    }

    static PdcLayer make(detail::Initializer& init, ParamRegistry& reg,
                         const std::string& name, PdcKind kind, int cout, int cin) {
        PdcLayer layer;
        layer.kind = kind;
        const Shape ws = pdc_weight_shape(kind, cout, cin);
        layer.weight = reg.add(name + ".weight", init.uniform(ws, cin * ws.h * ws.w));
        return layer;
    }
};

struct InstanceNormLayer {
    Tensor gamma;
    Tensor beta;

    Tensor forward(Tape* tape, const Tensor& x) const {
        return ops::instance_norm(tape, x, gamma, beta);
    }

    static InstanceNormLayer make(ParamRegistry& reg, const std::string& name, int c) {
        InstanceNormLayer layer;
        layer.gamma = reg.add(name + ".gamma", Tensor(Shape{1, c, 1, 1}, 1.0));
        layer.beta = reg.add(name + ".beta", Tensor(Shape{1, c, 1, 1}, 0.0));
        return layer;
    }
};

/// Input stem: 3x3 convolution, instance normalization, mish.
struct ConvBlock {
    Conv2dLayer conv;
    InstanceNormLayer norm;

    Tensor forward(Tape* tape, const Tensor& x) const {
        return ops::activation(tape, norm.forward(tape, conv.forward(tape, x)),
                               ops::Activation::mish);
    }

    static ConvBlock make(detail::Initializer& init, ParamRegistry& reg,
                          const std::string& name, int cout, int cin) {
        ConvBlock block;
        block.conv = Conv2dLayer::make(init, reg, name + ".conv", cout, cin, 3, true);
        block.norm = InstanceNormLayer::make(reg, name + ".norm", cout);
        return block;
    }
};

/// Squeeze-and-excitation channel attention. The two fully connected layers
/// are realized as 1x1 convolutions on the pooled (N, C, 1, 1) tensor.
struct SeBlock {
    Conv2dLayer fc1;
    Conv2dLayer fc2;

    Tensor forward(Tape* tape, const Tensor& x) const {
        Tensor s = ops::global_avg_pool(tape, x);
        s = ops::activation(tape, fc1.forward(tape, s), ops::Activation::relu);
        s = ops::activation(tape, fc2.forward(tape, s), ops::Activation::sigmoid);
        return ops::scale_channels(tape, x, s);
    }

    static SeBlock make(detail::Initializer& init, ParamRegistry& reg,
                        const std::string& name, int c, int reduction) {
        const int hidden = std::max(1, c / reduction);
        SeBlock block;
        block.fc1 = Conv2dLayer::make(init, reg, name + ".fc1", hidden, c, 1, true);
        block.fc2 = Conv2dLayer::make(init, reg, name + ".fc2", c, hidden, 1, true);
        return block;
    }
};

/// Detail enhancement module. Branch A projects with a 1x1 conv, runs four
/// parallel C -> C/4 paths (vanilla 3x3 plus the three pixel-difference
/// kinds), concatenates back to C and projects with a second 1x1 conv.
/// Branch B is a plain 3x3 conv on the module input. Output is their sum.
/// Under ablate_pdc each difference path is swapped for a vanilla 3x3 conv
/// of the same channel shape.
struct Dem {
    Conv2dLayer pre;
    Conv2dLayer vanilla;
    std::optional<PdcLayer> central, angular, radial;
    std::optional<Conv2dLayer> central_ab, angular_ab, radial_ab;
    Conv2dLayer post;
    Conv2dLayer branch_b;

    Tensor forward(Tape* tape, const Tensor& x) const {
        const Tensor a = pre.forward(tape, x);
        std::vector<Tensor> paths;
        paths.push_back(vanilla.forward(tape, a));
        paths.push_back(central ? central->forward(tape, a) : central_ab->forward(tape, a));
        paths.push_back(angular ? angular->forward(tape, a) : angular_ab->forward(tape, a));
        paths.push_back(radial ? radial->forward(tape, a) : radial_ab->forward(tape, a));
        const Tensor merged = post.forward(tape, ops::concat_channels(tape, paths));
        return ops::add(tape, merged, branch_b.forward(tape, x));
    }

    static Dem make(detail::Initializer& init, ParamRegistry& reg, const std::string& name,
                    int c, bool ablate_pdc) {
        if (c % 4 != 0) {
            throw ShapeError("Dem: channel count " + std::to_string(c) +
                             " must be divisible by 4");
        }
        const int quarter = c / 4;
        Dem dem;
        dem.pre = Conv2dLayer::make(init, reg, name + ".pre", c, c, 1, true);
        dem.vanilla = Conv2dLayer::make(init, reg, name + ".vanilla", quarter, c, 3, true);
        if (ablate_pdc) {
            dem.central_ab = Conv2dLayer::make(init, reg, name + ".central", quarter, c, 3, false);
            dem.angular_ab = Conv2dLayer::make(init, reg, name + ".angular", quarter, c, 3, false);
            dem.radial_ab = Conv2dLayer::make(init, reg, name + ".radial", quarter, c, 3, false);
        } else {
            dem.central = PdcLayer::make(init, reg, name + ".central", PdcKind::central, quarter, c);
            dem.angular = PdcLayer::make(init, reg, name + ".angular", PdcKind::angular, quarter, c);
            dem.radial = PdcLayer::make(init, reg, name + ".radial", PdcKind::radial, quarter, c);
        }
        dem.post = Conv2dLayer::make(init, reg, name + ".post", c, c, 1, true);
        dem.branch_b = Conv2dLayer::make(init, reg, name + ".branch_b", c, c, 3, true);
        return dem;
    }
};

/// Feature fusion module. With C-channel inputs x1, x2:
///   f_c = Conv1x1(SE(concat(x1, x2)))            (2C -> C)
///   f1  = Conv1x1(x1) * f_c                      elementwise
///   f2  = Conv1x1(x2) * f_c
///   y   = Conv1x1(SE(concat(f_c, f1, f2)))       (3C -> C)
struct Ffm {
    SeBlock se_in;
    Conv2dLayer fuse;
    Conv2dLayer proj1;
    Conv2dLayer proj2;
    SeBlock se_out;
    Conv2dLayer out;

    Tensor forward(Tape* tape, const Tensor& x1, const Tensor& x2) const {
        if (x1.shape() != x2.shape()) {
            throw ShapeError("Ffm: inputs " + x1.shape().str() + " vs " + x2.shape().str() +
                             " must match");
        }
        const Tensor fc = fuse.forward(tape, se_in.forward(tape, ops::concat_channels(tape, {x1, x2})));
        const Tensor f1 = ops::hadamard(tape, proj1.forward(tape, x1), fc);
        const Tensor f2 = ops::hadamard(tape, proj2.forward(tape, x2), fc);
        return out.forward(tape, se_out.forward(tape, ops::concat_channels(tape, {fc, f1, f2})));
    }

    static Ffm make(detail::Initializer& init, ParamRegistry& reg, const std::string& name,
                    int c, int reduction) {
        Ffm ffm;
        ffm.se_in = SeBlock::make(init, reg, name + ".se_in", 2 * c, reduction);
        ffm.fuse = Conv2dLayer::make(init, reg, name + ".fuse", c, 2 * c, 1, true);
        ffm.proj1 = Conv2dLayer::make(init, reg, name + ".proj1", c, c, 1, true);
        ffm.proj2 = Conv2dLayer::make(init, reg, name + ".proj2", c, c, 1, true);
        ffm.se_out = SeBlock::make(init, reg, name + ".se_out", 3 * c, reduction);
        ffm.out = Conv2dLayer::make(init, reg, name + ".out", c, 3 * c, 1, true);
        return ffm;
    }
};

/// Stem output plus the three detail-enhancement outputs, all N x C x H x W.
struct FeatureBundle {
    Tensor f0, f1, f2, f3;
};

class PdcfNet {
public:
    PdcfNet() = default;

    static PdcfNet build(const NetworkConfig& config, std::uint64_t seed) {
        config.validate();
        PdcfNet net;
        net.config_ = config;
        detail::Initializer init(seed);
        const int c = config.base_channels;
        net.stem_ = ConvBlock::make(init, net.registry_, "stem", c, 3);
        for (int i = 0; i < config.dem_count; ++i) {
            net.dems_.push_back(
                Dem::make(init, net.registry_, "dem" + std::to_string(i + 1), c, config.ablate_pdc));
        }
        net.ffm_a_ = Ffm::make(init, net.registry_, "ffm_a", c, config.se_reduction);
        net.ffm_b_ = Ffm::make(init, net.registry_, "ffm_b", c, config.se_reduction);
        net.head_ = Conv2dLayer::make(init, net.registry_, "head", 3, c, 3, true);
        return net;
    }

    /// Full forward pass. Input is (N, 3, H, W) in [0, 1]; output is
    /// (N, 3, H, W) with every value strictly inside (0, 1). Spatial size is
    /// preserved at every stage (checked).
    Tensor forward(Tape* tape, const Tensor& x) const {
        const Shape xs = x.shape();
        if (xs.c != 3) {
            throw ShapeError("PdcfNet::forward: input " + xs.str() + " must have 3 channels");
        }
        FeatureBundle fb = features(tape, x);
        std::vector<Tensor> levels = {fb.f0, fb.f1, fb.f2, fb.f3};
        const auto& wiring = config_.ffm_wiring;
        const Tensor g1 = ffm_a_.forward(tape, levels[wiring[0][0]], levels[wiring[0][1]]);
        check_spatial(g1, xs, "fusion stage 1");
        levels.push_back(g1);
        const Tensor g2 = ffm_b_.forward(tape, levels[wiring[1][0]], levels[wiring[1][1]]);
        check_spatial(g2, xs, "fusion stage 2");
        const Tensor y = ops::activation(tape, head_.forward(tape, g2), ops::Activation::sigmoid);
        check_spatial(y, xs, "output head");
        return y;
    }

    FeatureBundle features(Tape* tape, const Tensor& x) const {
        const Shape xs = x.shape();
        FeatureBundle fb;
        fb.f0 = stem_.forward(tape, x);
        check_spatial(fb.f0, xs, "stem");
        fb.f1 = dems_[0].forward(tape, fb.f0);
        check_spatial(fb.f1, xs, "dem1");
        fb.f2 = dems_[1].forward(tape, fb.f1);
        check_spatial(fb.f2, xs, "dem2");
        fb.f3 = dems_[2].forward(tape, fb.f2);
        check_spatial(fb.f3, xs, "dem3");
        return fb;
    }

    const NetworkConfig& config() const { return config_; }
    ParamRegistry& registry() { return registry_; }
    const ParamRegistry& registry() const { return registry_; }
    const ConvBlock& stem() const { return stem_; }
    const std::vector<Dem>& dems() const { return dems_; }
    const Ffm& ffm_a() const { return ffm_a_; }
    const Ffm& ffm_b() const { return ffm_b_; }
    const Conv2dLayer& head() const { return head_; }

private:
    static void check_spatial(const Tensor& t, const Shape& in, const char* stage) {
        if (t.shape().h != in.h || t.shape().w != in.w) {
            throw ShapeError(std::string("PdcfNet: ") + stage + " changed spatial size from " +
                             in.str() + " to " + t.shape().str());
        }
    }

    NetworkConfig config_;
    ParamRegistry registry_;
    ConvBlock stem_;
    std::vector<Dem> dems_;
    Ffm ffm_a_, ffm_b_;
    Conv2dLayer head_;
};

struct ModelStats {
    std::int64_t params = 0;
    std::int64_t macs = 0;
};

inline std::int64_t conv_param_count(std::int64_t cout, std::int64_t cin, std::int64_t k,
                                     bool bias) {
    return cout * cin * k * k + (bias ? cout : 0);
}

/// Multiply-accumulates of one convolution evaluated over `spatial` output
/// positions; bias additions are not counted.
inline std::int64_t conv_mac_count(std::int64_t cout, std::int64_t cin, std::int64_t k,
                                   std::int64_t spatial) {
    return cout * cin * k * k * spatial;
}

/// Closed-form parameter and multiply-accumulate counts for a config at a
/// given spatial resolution. Counts cover convolutions and the SE fully
/// connected layers only; pixel-difference paths are costed at their
/// realized kernel footprint (3x3 central/angular, 5x5 radial).
inline ModelStats model_stats(const NetworkConfig& config, int h, int w) {
    config.validate();
    const std::int64_t c = config.base_channels;
    const std::int64_t q = c / 4;
    const std::int64_t hw = static_cast<std::int64_t>(h) * w;
    ModelStats stats;

    auto conv = [&](std::int64_t cout, std::int64_t cin, std::int64_t k, bool bias,
                    std::int64_t spatial) {
        stats.params += conv_param_count(cout, cin, k, bias);
        stats.macs += conv_mac_count(cout, cin, k, spatial);
    };

    // Stem: 3x3 conv + instance norm affine.
    conv(c, 3, 3, true, hw);
    stats.params += 2 * c;

    for (int i = 0; i < config.dem_count; ++i) {
        conv(c, c, 1, true, hw);       // pre
        conv(q, c, 3, true, hw);       // vanilla path
        if (config.ablate_pdc) {
            conv(q, c, 3, false, hw);  // central swap
            conv(q, c, 3, false, hw);  // angular swap
            conv(q, c, 3, false, hw);  // radial swap
        } else {
            conv(q, c, 3, false, hw);  // central, 3x3 grid
            conv(q, c, 3, false, hw);  // angular, 3x3 grid
            stats.params += q * c * 8; // radial stores 8 direction weights
            stats.macs += q * c * 25 * hw;
        }
        conv(c, c, 1, true, hw);       // post
        conv(c, c, 3, true, hw);       // branch B
    }

    auto se = [&](std::int64_t cin) {
        const std::int64_t hidden = std::max<std::int64_t>(1, cin / config.se_reduction);
        conv(hidden, cin, 1, true, 1);
        conv(cin, hidden, 1, true, 1);
    };
    for (int i = 0; i < 2; ++i) {
        se(2 * c);
        conv(c, 2 * c, 1, true, hw);  // fuse
        conv(c, c, 1, true, hw);      // proj1
        conv(c, c, 1, true, hw);      // proj2
        se(3 * c);
        conv(c, 3 * c, 1, true, hw);  // out
    }

    conv(3, c, 3, true, hw);  // head
    return stats;
}

}  // namespace pdcf
