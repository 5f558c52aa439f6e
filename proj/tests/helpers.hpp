#ifndef UNSHADOW_TESTS_HELPERS_HPP
#define UNSHADOW_TESTS_HELPERS_HPP

#include <cmath>
#include <filesystem>
#include <random>
#include <unistd.h>
#include <vector>

#include <torch/torch.h>

#include "unshadow/image.hpp"
#include "unshadow/rng.hpp"

namespace testutil {

inline torch::Tensor random_image_hw3(unshadow::Rng &rng, int64_t h, int64_t w) {
    return rng.uniform_tensor({h, w, 3}, 0.0, 1.0);
}

inline unshadow::ShadowMask random_mask(unshadow::Rng &rng, int64_t h, int64_t w, double p = 0.3) {
    auto m = torch::zeros({h, w}, torch::kFloat32);
    auto acc = m.accessor<float, 2>();
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            acc[y][x] = rng.bernoulli(p) ? 1.0f : 0.0f;
    return unshadow::ShadowMask::from_tensor(m);
}

inline std::filesystem::path temp_dir(const std::string &tag) {
    auto dir = std::filesystem::temp_directory_path() /
               ("unshadow_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------
// Independent brute-force oracles, long double accumulation throughout.
// ---------------------------------------------------------------------------

// InfoNCE with shared negatives: -log softmax of the positive logit.
inline long double ref_info_nce(const torch::Tensor &q, const torch::Tensor &p,
                                const torch::Tensor &n, long double tau) {
    auto qa = q.to(torch::kFloat64);
    auto pa = p.to(torch::kFloat64);
    auto na = n.to(torch::kFloat64);
    const int64_t N = qa.size(0), D = qa.size(1), M = na.size(0);
    long double total = 0.0L;
    for (int64_t i = 0; i < N; ++i) {
        std::vector<long double> logits;
        long double pos = 0.0L;
        for (int64_t d = 0; d < D; ++d)
            pos += static_cast<long double>(qa[i][d].item<double>()) *
                   static_cast<long double>(pa[i][d].item<double>());
        logits.push_back(pos / tau);
        for (int64_t j = 0; j < M; ++j) {
            long double neg = 0.0L;
            for (int64_t d = 0; d < D; ++d)
                neg += static_cast<long double>(qa[i][d].item<double>()) *
                       static_cast<long double>(na[j][d].item<double>());
            logits.push_back(neg / tau);
        }
        long double mx = logits[0];
        for (auto v : logits)
            mx = std::max(mx, v);
        long double sum = 0.0L;
        for (auto v : logits)
            sum += std::exp(v - mx);
        total += (std::log(sum) + mx) - logits[0];
    }
    return total / static_cast<long double>(N);
}

inline long double ref_mean_abs(const torch::Tensor &a, const torch::Tensor &b) {
    auto fa = a.to(torch::kFloat64).flatten();
    auto fb = b.to(torch::kFloat64).flatten();
    long double sum = 0.0L;
    for (int64_t i = 0; i < fa.size(0); ++i)
        sum += std::fabs(static_cast<long double>(fa[i].item<double>()) -
                         static_cast<long double>(fb[i].item<double>()));
    return sum / static_cast<long double>(fa.size(0));
}

inline long double ref_masked_mean_abs(const torch::Tensor &a, const torch::Tensor &b,
                                       const torch::Tensor &mask_hw) {
    auto fa = a.to(torch::kFloat64);
    auto fb = b.to(torch::kFloat64);
    auto m = mask_hw.to(torch::kFloat64);
    long double sum = 0.0L, count = 0.0L;
    for (int64_t y = 0; y < fa.size(0); ++y)
        for (int64_t x = 0; x < fa.size(1); ++x) {
            if (m[y][x].item<double>() <= 0.5)
                continue;
            for (int64_t c = 0; c < fa.size(2); ++c) {
                sum += std::fabs(static_cast<long double>(fa[y][x][c].item<double>()) -
                                 static_cast<long double>(fb[y][x][c].item<double>()));
                count += 1.0L;
            }
        }
    return count > 0.0L ? sum / count : 0.0L;
}

inline long double ref_color_angle_mean(const torch::Tensor &a, const torch::Tensor &b) {
    auto fa = a.to(torch::kFloat64).reshape({-1, 3});
    auto fb = b.to(torch::kFloat64).reshape({-1, 3});
    long double sum = 0.0L;
    const int64_t n = fa.size(0);
    for (int64_t i = 0; i < n; ++i) {
        long double dot = 0.0L, na = 0.0L, nb = 0.0L;
        for (int64_t c = 0; c < 3; ++c) {
            long double va = fa[i][c].item<double>(), vb = fb[i][c].item<double>();
            dot += va * vb;
            na += va * va;
            nb += vb * vb;
        }
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        if (na <= 0.0L || nb <= 0.0L)
            continue; // zero-norm pixels contribute zero angle
        long double cosv = dot / (na * nb + 1e-8L);
        cosv = std::min(1.0L, std::max(-1.0L, cosv));
        sum += std::acos(cosv);
    }
    return sum / static_cast<long double>(n);
}

// Gram normalized by C*H*W, element (i, j).
inline long double ref_gram_entry(const torch::Tensor &chw, int64_t i, int64_t j) {
    auto f = chw.to(torch::kFloat64);
    const int64_t h = f.size(1), w = f.size(2);
    long double sum = 0.0L;
    for (int64_t y = 0; y < h; ++y)
        for (int64_t x = 0; x < w; ++x)
            sum += static_cast<long double>(f[i][y][x].item<double>()) *
                   static_cast<long double>(f[j][y][x].item<double>());
    return sum / static_cast<long double>(f.size(0) * h * w);
}

inline long double ref_psnr(const torch::Tensor &a, const torch::Tensor &b) {
    auto fa = a.to(torch::kFloat64).flatten();
    auto fb = b.to(torch::kFloat64).flatten();
    long double mse = 0.0L;
    for (int64_t i = 0; i < fa.size(0); ++i) {
        long double d = static_cast<long double>(fa[i].item<double>()) -
                        static_cast<long double>(fb[i].item<double>());
        mse += d * d;
    }
    mse /= static_cast<long double>(fa.size(0));
    if (mse <= 0.0L)
        return 100.0L;
    long double v = 10.0L * std::log10(1.0L / mse);
    return std::min(v, 100.0L);
}

// Bilinear resample of one channel with half-pixel centers (no corner
// alignment), matching the documented convention.
inline long double ref_bilinear_at(const torch::Tensor &hw, int64_t oy, int64_t ox, int64_t out_h,
                                   int64_t out_w) {
    auto f = hw.to(torch::kFloat64);
    const int64_t h = f.size(0), w = f.size(1);
    long double sy = static_cast<long double>(h) / out_h;
    long double sx = static_cast<long double>(w) / out_w;
    long double cy = (oy + 0.5L) * sy - 0.5L;
    long double cx = (ox + 0.5L) * sx - 0.5L;
    int64_t y0 = static_cast<int64_t>(std::floor(cy));
    int64_t x0 = static_cast<int64_t>(std::floor(cx));
    long double fy = cy - y0, fx = cx - x0;
    auto at = [&](int64_t y, int64_t x) {
        y = std::clamp<int64_t>(y, 0, h - 1);
        x = std::clamp<int64_t>(x, 0, w - 1);
        return static_cast<long double>(f[y][x].item<double>());
    };
    return at(y0, x0) * (1 - fy) * (1 - fx) + at(y0, x0 + 1) * (1 - fy) * fx +
           at(y0 + 1, x0) * fy * (1 - fx) + at(y0 + 1, x0 + 1) * fy * fx;
}

// Central-difference gradient check: compares autograd against finite
// differences on every listed coordinate of `x`.
// `f` must be re-evaluatable; tolerance is relative with an absolute floor.
template <typename F>
void check_gradient(F f, torch::Tensor x, double rel_tol = 1e-3, double abs_floor = 1e-6,
                    const std::vector<int64_t> &coords = {}) {
    REQUIRE(x.dtype() == torch::kFloat64);
    x.requires_grad_(true);
    auto loss = f(x);
    if (x.grad().defined())
        x.mutable_grad().zero_();
    loss.backward();
    auto analytic = x.grad().detach().clone().flatten();
    auto flat = x.detach().clone().flatten();

    std::vector<int64_t> idx = coords;
    if (idx.empty()) {
        idx.resize(static_cast<size_t>(flat.size(0)));
        for (int64_t i = 0; i < flat.size(0); ++i)
            idx[static_cast<size_t>(i)] = i;
    }

    const double h = 1e-5;
    for (int64_t i : idx) {
        auto probe = flat.clone();
        probe[i] += h;
        auto up = f(probe.view(x.sizes())).template item<double>();
        probe[i] -= 2 * h;
        auto down = f(probe.view(x.sizes())).template item<double>();
        double numeric = (up - down) / (2 * h);
        double a = analytic[i].item<double>();
        double err = std::fabs(a - numeric);
        double scale = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
        INFO("coord ", i, ": analytic ", a, " numeric ", numeric);
        CHECK(err <= abs_floor + rel_tol * scale);
    }
}

} // namespace testutil

#endif
