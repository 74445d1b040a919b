#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "pdcf/losses.hpp"
#include "pdcf/metrics.hpp"

using namespace pdcf;

namespace {

// Builds a 1x3xHxW image whose channel values come from a callback returning
// 0..255 integers; stored as v/255 so quantization recovers them exactly.
template <typename Fn>
Tensor make_image(int h, int w, Fn level) {
    Tensor img(Shape{1, 3, h, w});
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                img.at(0, c, y, x) = static_cast<double>(level(c, y, x)) / 255.0;
            }
        }
    }
    return img;
}

Tensor gray_image(int h, int w, int level) {
    return make_image(h, w, [level](int, int, int) { return level; });
}

std::vector<double> plane_of(const Tensor& img, int c) {
    const Shape s = img.shape();
    std::vector<double> p(static_cast<std::size_t>(s.h) * s.w);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::round(std::clamp(img.data()[c * s.h * s.w + i], 0.0, 1.0) * 255.0);
    }
    return p;
}

// Test-side EME: direct per-block scan with the zero-extremum substitution.
double eme_oracle(const std::vector<double>& plane, int h, int w) {
    const int k1 = h / 8, k2 = w / 8;
    double sum = 0.0;
    for (int by = 0; by < k1; ++by) {
        for (int bx = 0; bx < k2; ++bx) {
            std::vector<double> vals;
            for (int u = 0; u < 8; ++u) {
                for (int v = 0; v < 8; ++v) {
                    vals.push_back(plane[static_cast<std::size_t>(by * 8 + u) * w + bx * 8 + v]);
                }
            }
            double lo = *std::min_element(vals.begin(), vals.end());
            double hi = *std::max_element(vals.begin(), vals.end());
            if (lo == 0.0) lo = 1.0;
            if (hi == 0.0) hi = 1.0;
            sum += std::log(hi / lo);
        }
    }
    return 2.0 / (k1 * k2) * sum;
}

double uism_oracle(const Tensor& img) {
    const Shape s = img.shape();
    const int mh = s.h - 2, mw = s.w - 2;
    const double luma[3] = {0.299, 0.587, 0.114};
    double total = 0.0;
    for (int c = 0; c < 3; ++c) {
        const std::vector<double> p = plane_of(img, c);
        std::vector<double> mag(static_cast<std::size_t>(mh) * mw);
        for (int y = 0; y < mh; ++y) {
            for (int x = 0; x < mw; ++x) {
                auto px = [&](int dy, int dx) {
                    return p[static_cast<std::size_t>(y + 1 + dy) * s.w + (x + 1 + dx)];
                };
                const double gx = px(-1, 1) + 2 * px(0, 1) + px(1, 1) - px(-1, -1) -
                                  2 * px(0, -1) - px(1, -1);
                const double gy = px(1, -1) + 2 * px(1, 0) + px(1, 1) - px(-1, -1) -
                                  2 * px(-1, 0) - px(-1, 1);
                mag[static_cast<std::size_t>(y) * mw + x] = std::hypot(gx, gy);
            }
        }
        total += luma[c] * eme_oracle(mag, mh, mw);
    }
    return total;
}

double uiconm_oracle(const Tensor& img) {
    const Shape s = img.shape();
    const std::vector<double> r = plane_of(img, 0);
    const std::vector<double> g = plane_of(img, 1);
    const std::vector<double> b = plane_of(img, 2);
    const int k1 = s.h / 8, k2 = s.w / 8;
    double sum = 0.0;
    for (int by = 0; by < k1; ++by) {
        for (int bx = 0; bx < k2; ++bx) {
            double lo = 1e300, hi = -1e300;
            for (int u = 0; u < 8; ++u) {
                for (int v = 0; v < 8; ++v) {
                    const std::size_t i = static_cast<std::size_t>(by * 8 + u) * s.w + bx * 8 + v;
                    const double val = (r[i] + g[i] + b[i]) / 3.0;
                    lo = std::min(lo, val);
                    hi = std::max(hi, val);
                }
            }
            if (hi + lo == 0.0) continue;
            const double w = (hi - lo) / (hi + lo);
            if (w > 0.0) sum += w * std::log(w);
        }
    }
    return -sum / (k1 * k2);
}

double uicm_oracle(const Tensor& img) {
    const std::vector<double> r = plane_of(img, 0);
    const std::vector<double> g = plane_of(img, 1);
    const std::vector<double> b = plane_of(img, 2);
    auto stats = [](std::vector<double> v) {
        std::vector<double> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t t = static_cast<std::size_t>(std::floor(0.1 * sorted.size()));
        double mu = 0.0;
        for (std::size_t i = t; i + t < sorted.size(); ++i) mu += sorted[i];
        mu /= static_cast<double>(sorted.size() - 2 * t);
        double var = 0.0;
        for (double x : v) var += (x - mu) * (x - mu);
        var /= static_cast<double>(v.size());
        return std::pair{mu, var};
    };
    std::vector<double> rg(r.size()), yb(r.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        rg[i] = r[i] - g[i];
        yb[i] = (r[i] + g[i]) / 2.0 - b[i];
    }
    const auto [mrg, vrg] = stats(rg);
    const auto [myb, vyb] = stats(yb);
    return -0.0268 * std::sqrt(mrg * mrg + myb * myb) + 0.1586 * std::sqrt(vrg + vyb);
}

Tensor random_image(int h, int w, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> level(0, 255);
    return make_image(h, w, [&](int, int, int) { return level(rng); });
}

}  // namespace

TEST(StableStats, HandValues) {
    EXPECT_DOUBLE_EQ(metrics::stable_mean({1.0, 2.0, 3.0, 4.0}), 2.5);
    EXPECT_DOUBLE_EQ(metrics::stable_mean({}), 0.0);
    EXPECT_DOUBLE_EQ(metrics::population_std({1.0, 2.0, 3.0, 4.0}, 2.5), std::sqrt(1.25));
    EXPECT_DOUBLE_EQ(metrics::population_std({5.0, 5.0}, 5.0), 0.0);
}

TEST(StableStats, OrderInvariant) {
    std::mt19937_64 rng(50);
    std::vector<double> v(257);
    std::uniform_real_distribution<double> dist(-1e6, 1e6);
    for (double& x : v) x = dist(rng);
    std::vector<double> shuffled = v;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    EXPECT_EQ(metrics::stable_mean(v), metrics::stable_mean(shuffled));
    const double mean = metrics::stable_mean(v);
    EXPECT_EQ(metrics::population_std(v, mean), metrics::population_std(shuffled, mean));
}

TEST(MsePsnr, IdentityGivesInfinitySentinel) {
    std::mt19937_64 rng(51);
    const Tensor x = random_image(9, 7, rng);
    const metrics::MsePsnr r = metrics::mse_psnr(x, x);
    EXPECT_DOUBLE_EQ(r.mse, 0.0);
    EXPECT_TRUE(std::isinf(r.psnr));
    EXPECT_GT(r.psnr, 0.0);
}

TEST(MsePsnr, UniformSixteenLevelOffset) {
    const Tensor a = gray_image(8, 8, 100);
    const Tensor b = gray_image(8, 8, 116);
    const metrics::MsePsnr r = metrics::mse_psnr(a, b);
    EXPECT_DOUBLE_EQ(r.mse, 256.0);
    EXPECT_NEAR(r.psnr, 24.049, 1e-3);
    EXPECT_DOUBLE_EQ(r.psnr, 10.0 * std::log10(65025.0 / 256.0));
}

TEST(MsePsnr, MatchesScalarLoopOracle) {
    std::mt19937_64 rng(52);
    const Tensor x = random_image(11, 13, rng);
    const Tensor y = random_image(11, 13, rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.numel(); ++i) {
        const double a = std::round(x.data()[i] * 255.0);
        const double b = std::round(y.data()[i] * 255.0);
        acc += (a - b) * (a - b);
    }
    const double mse = acc / static_cast<double>(x.numel());
    const metrics::MsePsnr r = metrics::mse_psnr(x, y);
    EXPECT_NEAR(r.mse, mse, 1e-9);
    EXPECT_NEAR(r.psnr, 10.0 * std::log10(255.0 * 255.0 / mse), 1e-9);
}

TEST(MsePsnr, SymmetricAndMonotone) {
    std::mt19937_64 rng(53);
    const Tensor x = random_image(10, 10, rng);
    const Tensor y = random_image(10, 10, rng);
    EXPECT_DOUBLE_EQ(metrics::mse_psnr(x, y).mse, metrics::mse_psnr(y, x).mse);
    EXPECT_DOUBLE_EQ(metrics::mse_psnr(x, y).psnr, metrics::mse_psnr(y, x).psnr);

    double prev_psnr = std::numeric_limits<double>::infinity();
    double prev_mse = 0.0;
    for (int offset : {2, 4, 8, 16, 32, 64}) {
        const metrics::MsePsnr r = metrics::mse_psnr(gray_image(8, 8, 64),
                                                     gray_image(8, 8, 64 + offset));
        EXPECT_GT(r.mse, prev_mse);
        EXPECT_LT(r.psnr, prev_psnr);
        prev_mse = r.mse;
        prev_psnr = r.psnr;
    }
    EXPECT_THROW(metrics::mse_psnr(x, Tensor(Shape{1, 3, 10, 9})), ShapeError);
}

TEST(SsimIndex, IdentityIsOne) {
    std::mt19937_64 rng(54);
    const Tensor x = random_image(14, 12, rng);
    EXPECT_NEAR(metrics::ssim_index(x, x), 1.0, 1e-12);
}

TEST(SsimIndex, StructureInversionBelowOne) {
    std::mt19937_64 rng(55);
    std::bernoulli_distribution coin(0.5);
    const Tensor x = make_image(12, 12, [&](int, int, int) { return coin(rng) ? 230 : 25; });
    Tensor inv = x.clone();
    for (std::size_t i = 0; i < inv.numel(); ++i) inv.data()[i] = 1.0 - inv.data()[i];
    EXPECT_LT(metrics::ssim_index(x, inv), 1.0);
}

TEST(SsimIndex, AgreesWithDifferentiableLoss) {
    std::mt19937_64 rng(56);
    for (const Shape s : {Shape{1, 1, 11, 11}, Shape{1, 3, 13, 15}, Shape{2, 3, 12, 12}}) {
        const Tensor x = oracles::random_tensor(s, rng, 0.0, 1.0);
        const Tensor y = oracles::random_tensor(s, rng, 0.0, 1.0);
        const double index = metrics::ssim_index(x, y);
        const double loss = losses::ssim_loss(nullptr, x, y).value();
        EXPECT_NEAR(index, 1.0 - loss, 1e-12) << s.str();
    }
    EXPECT_THROW(metrics::ssim_index(Tensor(Shape{1, 1, 8, 8}), Tensor(Shape{1, 1, 8, 8})),
                 ShapeError);
    EXPECT_THROW(metrics::ssim_index(Tensor(Shape{1, 1, 12, 12}), Tensor(Shape{1, 1, 12, 13})),
                 ShapeError);
}

TEST(SsimIndex, SymmetricUnderSwap) {
    std::mt19937_64 rng(57);
    const Tensor x = random_image(12, 12, rng);
    const Tensor y = random_image(12, 12, rng);
    EXPECT_NEAR(metrics::ssim_index(x, y), metrics::ssim_index(y, x), 1e-12);
}

TEST(Uicm, GrayImageScoresZero) {
    std::mt19937_64 rng(58);
    std::uniform_int_distribution<int> level(0, 255);
    Tensor img(Shape{1, 3, 9, 9});
    for (int y = 0; y < 9; ++y) {
        for (int x = 0; x < 9; ++x) {
            const double v = level(rng) / 255.0;
            for (int c = 0; c < 3; ++c) img.at(0, c, y, x) = v;
        }
    }
    EXPECT_DOUBLE_EQ(metrics::uicm(img), 0.0);
}

TEST(Uicm, InvariantToUniformBrightnessShift) {
    std::mt19937_64 rng(59);
    std::uniform_int_distribution<int> level(0, 200);
    const Tensor base = make_image(10, 12, [&](int, int, int) { return level(rng); });
    Tensor shifted = base.clone();
    for (std::size_t i = 0; i < shifted.numel(); ++i) shifted.data()[i] += 20.0 / 255.0;
    EXPECT_NEAR(metrics::uicm(base), metrics::uicm(shifted), 1e-12);
}

TEST(Uicm, MatchesSortAndTrimOracle) {
    std::mt19937_64 rng(60);
    for (int rep = 0; rep < 5; ++rep) {
        const Tensor img = random_image(17, 23, rng);
        EXPECT_NEAR(metrics::uicm(img), uicm_oracle(img), 1e-9);
    }
    EXPECT_THROW(metrics::uicm(Tensor(Shape{1, 1, 9, 9})), ShapeError);
    EXPECT_THROW(metrics::uicm(Tensor(Shape{2, 3, 9, 9})), ShapeError);
}

TEST(Uism, ConstantImageScoresZero) {
    EXPECT_DOUBLE_EQ(metrics::uism(gray_image(12, 12, 77)), 0.0);
    EXPECT_DOUBLE_EQ(metrics::uism(gray_image(12, 12, 0)), 0.0);
}

TEST(Uism, StepEdgeScoresPositive) {
    const Tensor img = make_image(10, 10, [](int, int, int x) { return x < 5 ? 0 : 255; });
    EXPECT_GT(metrics::uism(img), 0.0);
}

TEST(Uism, MatchesBlockScanOracle) {
    std::mt19937_64 rng(61);
    for (int rep = 0; rep < 5; ++rep) {
        const Tensor img = random_image(19, 21, rng);
        EXPECT_NEAR(metrics::uism(img), uism_oracle(img), 1e-9);
    }
    EXPECT_THROW(metrics::uism(gray_image(9, 8, 5)), DataError);
}

TEST(Uiconm, DegenerateCases) {
    EXPECT_DOUBLE_EQ(metrics::uiconm(gray_image(16, 16, 140)), 0.0);
    EXPECT_DOUBLE_EQ(metrics::uiconm(gray_image(16, 16, 0)), 0.0);
    // Saturated checkerboard: w = 1 in every block and 1*ln(1) = 0.
    const Tensor checker =
        make_image(16, 16, [](int, int y, int x) { return (y + x) % 2 ? 255 : 0; });
    EXPECT_DOUBLE_EQ(metrics::uiconm(checker), 0.0);
}

TEST(Uiconm, MatchesBlockScanOracle) {
    std::mt19937_64 rng(62);
    for (int rep = 0; rep < 5; ++rep) {
        const Tensor img = random_image(19, 21, rng);
        EXPECT_NEAR(metrics::uiconm(img), uiconm_oracle(img), 1e-9);
        EXPECT_GT(metrics::uiconm(img), 0.0);
    }
    EXPECT_THROW(metrics::uiconm(gray_image(7, 16, 5)), DataError);
}

TEST(Uiqm, ComposesComponentsLinearly) {
    std::mt19937_64 rng(63);
    const Tensor img = random_image(18, 20, rng);
    const double expected = 0.0282 * metrics::uicm(img) + 0.2953 * metrics::uism(img) +
                            3.5753 * metrics::uiconm(img);
    EXPECT_NEAR(metrics::uiqm(img), expected, 1e-12);
    EXPECT_NEAR(metrics::uiqm(img),
                0.0282 * uicm_oracle(img) + 0.2953 * uism_oracle(img) +
                    3.5753 * uiconm_oracle(img),
                1e-9);
    EXPECT_THROW(metrics::uiqm(Tensor(Shape{1, 2, 16, 16})), ShapeError);
}

TEST(Lab, ReferencePoints) {
    const metrics::Lab white = metrics::srgb_to_lab(255, 255, 255);
    EXPECT_NEAR(white.l, 100.0, 0.01);
    EXPECT_NEAR(white.a, 0.0, 0.01);
    EXPECT_NEAR(white.b, 0.0, 0.01);

    const metrics::Lab black = metrics::srgb_to_lab(0, 0, 0);
    EXPECT_NEAR(black.l, 0.0, 1e-9);
    EXPECT_NEAR(black.a, 0.0, 1e-9);
    EXPECT_NEAR(black.b, 0.0, 1e-9);

    // Primaries under D65 with the standard linear-RGB matrix.
    const metrics::Lab red = metrics::srgb_to_lab(255, 0, 0);
    EXPECT_NEAR(red.l, 53.2408, 0.01);
    EXPECT_NEAR(red.a, 80.0925, 0.01);
    EXPECT_NEAR(red.b, 67.2032, 0.01);
    const metrics::Lab green = metrics::srgb_to_lab(0, 255, 0);
    EXPECT_NEAR(green.l, 87.7347, 0.01);
    EXPECT_NEAR(green.a, -86.1827, 0.01);
    EXPECT_NEAR(green.b, 83.1793, 0.01);
    const metrics::Lab blue = metrics::srgb_to_lab(0, 0, 255);
    EXPECT_NEAR(blue.l, 32.2970, 0.01);
    EXPECT_NEAR(blue.a, 79.1875, 0.01);
    EXPECT_NEAR(blue.b, -107.8602, 0.01);

    // The gray axis is exactly achromatic under the row-sum white point.
    for (int v : {32, 128, 230}) {
        const metrics::Lab gray = metrics::srgb_to_lab(v, v, v);
        EXPECT_NEAR(gray.a, 0.0, 1e-9);
        EXPECT_NEAR(gray.b, 0.0, 1e-9);
    }
}

TEST(Lab, MaxChromaCoversThePrimaries) {
    const double cmax = metrics::max_srgb_chroma();
    const metrics::Lab blue = metrics::srgb_to_lab(0, 0, 255);
    EXPECT_GE(cmax, std::sqrt(blue.a * blue.a + blue.b * blue.b));
    EXPECT_LT(cmax, 200.0);
}

TEST(Uciqe, AchromaticCollapse) {
    // Constant gray: every term vanishes.
    EXPECT_DOUBLE_EQ(metrics::uciqe(gray_image(10, 10, 128)), 0.0);

    // Two-tone gray: only the luminance-contrast term survives.
    const Tensor toned = make_image(10, 10, [](int, int y, int) { return y < 5 ? 64 : 192; });
    const double l_lo = metrics::srgb_to_lab(64, 64, 64).l;
    const double l_hi = metrics::srgb_to_lab(192, 192, 192).l;
    EXPECT_NEAR(metrics::uciqe(toned), 0.2745 * (l_hi - l_lo) / 100.0, 1e-12);
}

TEST(Uciqe, DeterministicAndColorSensitive) {
    std::mt19937_64 rng(64);
    const Tensor img = random_image(12, 14, rng);
    EXPECT_EQ(metrics::uciqe(img), metrics::uciqe(img));
    EXPECT_GT(metrics::uciqe(img), 0.0);
    EXPECT_THROW(metrics::uciqe(Tensor(Shape{1, 1, 12, 12})), ShapeError);
}

// Pixel-permutation invariance for the pointwise no-reference metrics; the
// reductions are sorted before accumulation, so equality is exact.
TEST(Metrics, StorageOrderInvariance) {
    std::mt19937_64 rng(65);
    const Tensor img = random_image(12, 12, rng);
    Tensor permuted = img.clone();
    // Swap two pixel columns in every channel.
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < 12; ++y) {
            std::swap(permuted.at(0, c, y, 2), permuted.at(0, c, y, 9));
        }
    }
    EXPECT_EQ(metrics::uciqe(img), metrics::uciqe(permuted));
    EXPECT_NEAR(metrics::uicm(img), metrics::uicm(permuted), 1e-9);
}

// Scoring an already-quantized image reproduces the score of its [0,1]
// source exactly: quantization is idempotent.
TEST(Metrics, QuantizationIdempotence) {
    std::mt19937_64 rng(66);
    const Tensor img = oracles::random_tensor(Shape{1, 3, 16, 16}, rng, 0.0, 1.0);
    Tensor quantized = img.clone();
    for (std::size_t i = 0; i < quantized.numel(); ++i) {
        quantized.data()[i] = std::round(quantized.data()[i] * 255.0) / 255.0;
    }
    EXPECT_DOUBLE_EQ(metrics::uicm(img), metrics::uicm(quantized));
    EXPECT_DOUBLE_EQ(metrics::uism(img), metrics::uism(quantized));
    EXPECT_DOUBLE_EQ(metrics::uiconm(img), metrics::uiconm(quantized));
    EXPECT_DOUBLE_EQ(metrics::mse_psnr(img, quantized).mse, 0.0);
}
