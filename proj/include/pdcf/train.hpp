#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "pdcf/autodiff.hpp"
#include "pdcf/dataset.hpp"
#include "pdcf/losses.hpp"
#include "pdcf/network.hpp"
#include "pdcf/optimizer.hpp"

namespace pdcf {

struct TrainConfig {
    int epochs = 200;
    double lr = 2e-5;
    int batch = 1;
    int size = 256;
    std::uint64_t seed = 0;
    LossConfig loss;
    NetworkConfig network;

    void validate() const {
        if (epochs < 1) throw DataError("TrainConfig: epochs must be >= 1");
        if (lr <= 0.0) throw DataError("TrainConfig: lr must be > 0");
        if (batch < 1) throw DataError("TrainConfig: batch must be >= 1");
        if (size < 11) throw DataError("TrainConfig: size must be >= 11 (SSIM window)");
        loss.validate();
        network.validate();
    }
};

/// Per-epoch mean of the step losses.
struct EpochStats {
    int epoch = 0;
    double total = 0.0;
    double l2 = 0.0;
    double ssim = 0.0;
    double edge = 0.0;
};

struct TrainResult {
    PdcfNet net;
    std::vector<EpochStats> log;
};

namespace train_detail {

/// Stacks same-shaped (1, C, H, W) pairs into one (B, C, H, W) batch.
inline Tensor stack(const std::vector<ImagePair>& data, const std::vector<std::size_t>& idx,
                    std::size_t begin, std::size_t end, bool use_ref) {
    const Shape s0 = data[idx[begin]].raw.shape();
    const int b = static_cast<int>(end - begin);
    Tensor out(Shape{b, s0.c, s0.h, s0.w});
    const std::size_t per = static_cast<std::size_t>(s0.c) * s0.h * s0.w;
    for (std::size_t i = begin; i < end; ++i) {
        const Tensor& src = use_ref ? data[idx[i]].ref : data[idx[i]].raw;
        if (src.shape() != s0) {
            throw DataError("train: pair " + data[idx[i]].id + " has shape " +
                            src.shape().str() + ", expected " + s0.str());
        }
        std::copy(src.data(), src.data() + per, out.data() + (i - begin) * per);
    }
    return out;
}

}  // namespace train_detail

/// Deterministic single-threaded training: seeded init, seeded per-epoch
/// shuffle, forward + composite loss + reverse pass + one optimizer update
/// per batch. The epoch log (config header plus one tab-separated line per
/// epoch) goes to `log_out` when given.
inline TrainResult train(const std::vector<ImagePair>& data, const TrainConfig& config,
                         std::ostream* log_out = nullptr) {
    config.validate();
    if (data.empty()) throw DataError("train: empty dataset");

    TrainResult result;
    result.net = PdcfNet::build(config.network, config.seed);
    Adam adam(config.lr);
    std::mt19937_64 shuffle_rng(config.seed + 0x9e3779b97f4a7c15ULL);

    if (log_out) {
        *log_out << "# epochs=" << config.epochs << " lr=" << config.lr
                 << " batch=" << config.batch << " size=" << config.size
                 << " seed=" << config.seed << " channels=" << config.network.base_channels
                 << " ablate_pdc=" << (config.network.ablate_pdc ? 1 : 0)
                 << " l2=" << (config.loss.use_l2 ? 1 : 0)
                 << " ssim=" << (config.loss.use_ssim ? 1 : 0)
                 << " edge=" << (config.loss.use_edge ? 1 : 0) << "\n";
        *log_out << "epoch\ttotal\tl2\tssim\tedge\n";
    }

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    long global_step = 0;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        EpochStats stats;
        stats.epoch = epoch;
        int steps = 0;
        for (std::size_t begin = 0; begin < order.size();
             begin += static_cast<std::size_t>(config.batch)) {
            const std::size_t end =
                std::min(order.size(), begin + static_cast<std::size_t>(config.batch));
            const Tensor x = train_detail::stack(data, order, begin, end, false);
            const Tensor y = train_detail::stack(data, order, begin, end, true);

            ++global_step;
            Tape tape;
            const Tensor pred = result.net.forward(&tape, x);
            LossBreakdown bd;
            const Tensor loss = losses::total_loss(&tape, pred, y, config.loss, &bd);
            if (!std::isfinite(bd.total)) {
                throw NumericError("non-finite loss at step " + std::to_string(global_step) +
                                   " (l2=" + std::to_string(bd.l2) + ", ssim=" +
                                   std::to_string(bd.ssim) + ", edge=" + std::to_string(bd.edge) +
                                   ")");
            }
            result.net.registry().zero_grads();
            tape.backward(loss);
            adam.step(result.net.registry());

            stats.total += bd.total;
            stats.l2 += bd.l2;
            stats.ssim += bd.ssim;
            stats.edge += bd.edge;
            ++steps;
        }
        stats.total /= steps;
        stats.l2 /= steps;
        stats.ssim /= steps;
        stats.edge /= steps;
        result.log.push_back(stats);
        if (log_out) {
            *log_out << epoch << '\t' << stats.total << '\t' << stats.l2 << '\t' << stats.ssim
                     << '\t' << stats.edge << "\n";
        }
    }
    return result;
}

}  // namespace pdcf
