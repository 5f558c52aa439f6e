#include "unshadow/augment.hpp"

#include <cmath>
#include <iostream>

#include "unshadow/errors.hpp"
#include "unshadow/image_io.hpp"

namespace unshadow {

namespace F = torch::nn::functional;

MaskBank MaskBank::from_masks(std::vector<ShadowMask> masks) {
    MaskBank bank;
    for (auto &m : masks)
        bank.loaders_.emplace_back([m] { return m; });
    return bank;
}

MaskBank MaskBank::from_split(const DatasetSplit &split) {
    MaskBank bank;
    for (const auto &rec : split.samples) {
        auto path = rec.mask_path;
        bank.loaders_.emplace_back([path] { return read_mask(path); });
    }
    return bank;
}

ShadowMask MaskBank::draw(Rng &rng, int64_t target_h, int64_t target_w) const {
    if (empty())
        throw ConfigError("MaskBank: bank is empty");
    auto idx = static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(size()) - 1));
    auto mask = loaders_[idx]();
    if (mask.height() != target_h || mask.width() != target_w)
        mask = resize_mask(mask, target_h, target_w);
    return mask;
}

void AugmentationConfig::validate() const {
    if (flip_prob < 0.0 || flip_prob > 1.0)
        throw ConfigError("AugmentationConfig: flip_prob outside [0,1]");
    if (scale_range[0] > scale_range[1] || scale_range[0] <= 0.0)
        throw ConfigError("AugmentationConfig: bad scale_range");
    if (contrast_range[0] > contrast_range[1] || contrast_range[0] <= 0.0)
        throw ConfigError("AugmentationConfig: bad contrast_range");
    if (noise_sigma < 0.0 || blur_sigma < 0.0)
        throw ConfigError("AugmentationConfig: sigmas must be non-negative");
}

namespace {

double masked_mean(const torch::Tensor &hw3, const torch::Tensor &mask_hw) {
    auto m = mask_hw.unsqueeze(2);
    double count = mask_hw.sum().item<double>() * 3.0;
    if (count <= 0.0)
        return 0.0;
    return (hw3 * m).sum().item<double>() / count;
}

} // namespace

ShadowTriplet inpaint_shadow_with(const ShadowTriplet &triplet, const ShadowMask &new_mask,
                                  double jitter) {
    const auto &old_mask = triplet.mask.data();
    if (old_mask.sum().item<double>() <= 0.0)
        throw ContractError("inpaint_shadow: triplet has no real shadow region");
    if (new_mask.height() != triplet.shadow.height() || new_mask.width() != triplet.shadow.width())
        throw ShapeError("inpaint_shadow: new mask dims disagree with the image");

    const double shadow_mean = masked_mean(triplet.shadow.data(), old_mask);

    // Only pixels outside the existing shadow are touched.
    auto fresh = new_mask.data() * (1.0 - old_mask);
    double fresh_count = fresh.sum().item<double>();
    if (fresh_count <= 0.0)
        throw ContractError("inpaint_shadow: new mask adds no pixels");
    double area_mean = masked_mean(triplet.shadow.data(), fresh);
    if (area_mean <= 1e-6) {
        std::cerr << "[unshadow] inpaint skipped: target area is black (" << triplet.id << ")\n";
        return triplet;
    }
    double target = shadow_mean * (1.0 + jitter);
    double gain = target / area_mean;

    auto m3 = fresh.unsqueeze(2);
    auto darkened =
        (triplet.shadow.data() * (1.0 - m3) + triplet.shadow.data() * gain * m3).clamp(0.0, 1.0);

    ShadowTriplet out = triplet;
    out.shadow = ImageTensor::from_tensor(darkened);
    out.mask = ShadowMask::from_tensor((old_mask + new_mask.data()).clamp(0.0, 1.0));
    out.validate();
    return out;
}

ShadowTriplet inpaint_shadow(const ShadowTriplet &triplet, const MaskBank &bank, Rng &rng) {
    if (bank.empty())
        throw ConfigError("inpaint_shadow: mask bank is empty");
    const auto &old_mask = triplet.mask.data();
    if (old_mask.sum().item<double>() <= 0.0)
        throw ContractError("inpaint_shadow: triplet has no real shadow region");

    constexpr int kDraws = 50;
    constexpr double kMaxOverlap = 0.01;
    for (int attempt = 0; attempt < kDraws; ++attempt) {
        auto candidate = bank.draw(rng, triplet.shadow.height(), triplet.shadow.width());
        double cand_count = candidate.data().sum().item<double>();
        if (cand_count <= 0.0)
            continue;
        double overlap = (candidate.data() * old_mask).sum().item<double>() / cand_count;
        if (overlap >= kMaxOverlap)
            continue;
        if ((candidate.data() * (1.0 - old_mask)).sum().item<double>() <= 0.0)
            continue;
        return inpaint_shadow_with(triplet, candidate, rng.uniform(-0.05, 0.05));
    }
    std::cerr << "[unshadow] inpaint skipped: no non-overlapping bank mask after " << kDraws
              << " draws (" << triplet.id << ")\n";
    return triplet;
}

namespace {

// Center crop or reflect-pad back to (h, w).
torch::Tensor fit_dims(torch::Tensor hw_any, int64_t h, int64_t w) {
    auto cur_h = hw_any.size(0), cur_w = hw_any.size(1);
    if (cur_h > h) {
        auto top = (cur_h - h) / 2;
        hw_any = hw_any.slice(0, top, top + h);
    }
    if (cur_w > w) {
        auto left = (cur_w - w) / 2;
        hw_any = hw_any.slice(1, left, left + w);
    }
    cur_h = hw_any.size(0);
    cur_w = hw_any.size(1);
    if (cur_h < h || cur_w < w) {
        auto pad_top = (h - cur_h) / 2, pad_bottom = h - cur_h - pad_top;
        auto pad_left = (w - cur_w) / 2, pad_right = w - cur_w - pad_left;
        bool has_c = hw_any.dim() == 3;
        auto x = has_c ? hw_any.permute({2, 0, 1}).unsqueeze(0) : hw_any.unsqueeze(0).unsqueeze(0);
        x = F::pad(x, F::PadFuncOptions({pad_left, pad_right, pad_top, pad_bottom})
                          .mode(torch::kReflect));
        hw_any = has_c ? x.squeeze(0).permute({1, 2, 0}) : x.squeeze(0).squeeze(0);
    }
    return hw_any.contiguous();
}

torch::Tensor blur_hw3(const torch::Tensor &hw3, double sigma) {
    if (sigma <= 0.0)
        return hw3;
    int64_t radius = static_cast<int64_t>(std::ceil(3.0 * sigma));
    auto xs = torch::arange(-radius, radius + 1, torch::kFloat32);
    auto kernel = torch::exp(-(xs * xs) / (2.0 * sigma * sigma));
    kernel /= kernel.sum();

    auto x = hw3.permute({2, 0, 1}).unsqueeze(0); // 1x3xHxW
    auto kh = kernel.view({1, 1, -1, 1}).repeat({3, 1, 1, 1});
    auto kw = kernel.view({1, 1, 1, -1}).repeat({3, 1, 1, 1});
    namespace Fn = torch::nn::functional;
    x = Fn::pad(x, Fn::PadFuncOptions({0, 0, radius, radius}).mode(torch::kReflect));
    x = Fn::conv2d(x, kh, Fn::Conv2dFuncOptions().groups(3));
    x = Fn::pad(x, Fn::PadFuncOptions({radius, radius, 0, 0}).mode(torch::kReflect));
    x = Fn::conv2d(x, kw, Fn::Conv2dFuncOptions().groups(3));
    return x.squeeze(0).permute({1, 2, 0}).contiguous();
}

} // namespace

ImageTensor flip_horizontal(const ImageTensor &image) {
    return ImageTensor::from_tensor(image.data().flip(1));
}

ShadowMask flip_horizontal(const ShadowMask &mask) {
    return ShadowMask::from_tensor(mask.data().flip(1));
}

ImageTensor gaussian_blur(const ImageTensor &image, double sigma) {
    return ImageTensor::from_tensor(blur_hw3(image.data(), sigma), /*clip=*/true);
}

ShadowTriplet standard_augment(const ShadowTriplet &triplet, const AugmentationConfig &cfg,
                               Rng &rng) {
    cfg.validate();
    const int64_t h = triplet.shadow.height(), w = triplet.shadow.width();

    auto s = triplet.shadow.data();
    auto m = triplet.mask.data();
    torch::Tensor g;
    if (triplet.shadow_free)
        g = triplet.shadow_free->data();

    // Geometric: flip, then isotropic rescale + crop/pad back.
    if (rng.bernoulli(cfg.flip_prob)) {
        s = s.flip(1);
        m = m.flip(1);
        if (g.defined())
            g = g.flip(1);
    }
    double scale = rng.uniform(cfg.scale_range[0], cfg.scale_range[1]);
    if (std::abs(scale - 1.0) > 1e-9) {
        auto nh = std::max<int64_t>(1, static_cast<int64_t>(std::llround(h * scale)));
        auto nw = std::max<int64_t>(1, static_cast<int64_t>(std::llround(w * scale)));
        s = fit_dims(resize(ImageTensor::from_tensor(s), nh, nw).data(), h, w);
        m = fit_dims(resize_mask(ShadowMask::from_tensor(m), nh, nw).data(), h, w);
        if (g.defined())
            g = fit_dims(resize(ImageTensor::from_tensor(g), nh, nw).data(), h, w);
    }

    // Photometric: mask untouched, G co-transformed with identical draws.
    if (rng.bernoulli(0.5) && cfg.noise_sigma > 0.0) {
        auto noise = rng.normal_tensor({h, w, 3}, 0.0, cfg.noise_sigma);
        s = (s + noise).clamp(0.0, 1.0);
        if (g.defined())
            g = (g + noise).clamp(0.0, 1.0);
    }
    if (rng.bernoulli(0.5) && cfg.blur_sigma > 0.0) {
        double sigma = rng.uniform(0.2, cfg.blur_sigma);
        s = blur_hw3(s, sigma).clamp(0.0, 1.0);
        if (g.defined())
            g = blur_hw3(g, sigma).clamp(0.0, 1.0);
    }
    if (rng.bernoulli(0.5)) {
        double c = rng.uniform(cfg.contrast_range[0], cfg.contrast_range[1]);
        if (std::abs(c - 1.0) > 1e-12) {
            s = ((s - 0.5) * c + 0.5).clamp(0.0, 1.0);
            if (g.defined())
                g = ((g - 0.5) * c + 0.5).clamp(0.0, 1.0);
        }
    }

    ShadowTriplet out;
    out.id = triplet.id;
    out.shadow = ImageTensor::from_tensor(s);
    out.mask = ShadowMask::from_tensor(m);
    if (g.defined())
        out.shadow_free = ImageTensor::from_tensor(g);
    out.validate();
    return out;
}

std::array<RegionTensor, 3> brightness_variants(const RegionTensor &region, double mu) {
    return {adjust_brightness(region, mu - 5.0), adjust_brightness(region, mu),
            adjust_brightness(region, mu + 5.0)};
}

std::array<RegionTensor, 3> illumination_variants(const RegionTensor &region, double mu) {
    if (mu < 5.0)
        throw ContractError("illumination_variants: mu must be >= 5");
    return brightness_variants(region, mu);
}

ImageTensor refinement_positive(const ImageTensor &image, const ShadowMask &mask, Rng &rng,
                                const RefinePositiveOptions &opts) {
    const int64_t h = image.height(), w = image.width();
    const int64_t side = std::clamp<int64_t>(
        static_cast<int64_t>(std::llround(rng.uniform(opts.crop_min, opts.crop_max) *
                                          static_cast<double>(std::min(h, w)))),
        1, std::min(h, w));

    torch::Tensor base;
    bool cropped = false;
    const double max_shadow = kNonShadowCropTolerance * static_cast<double>(side * side);
    for (int attempt = 0; attempt < kNonShadowCropAttempts && !cropped; ++attempt) {
        auto top = rng.uniform_int(0, h - side);
        auto left = rng.uniform_int(0, w - side);
        auto window = mask.data().slice(0, top, top + side).slice(1, left, left + side);
        if (window.sum().item<double>() < max_shadow) {
            base = image.data().slice(0, top, top + side).slice(1, left, left + side).contiguous();
            cropped = true;
        }
    }
    if (!cropped) {
        std::cerr << "[unshadow] refinement_positive: no non-shadow crop, using full frame\n";
        base = image.data();
    }
    auto out = resize(ImageTensor::from_tensor(base), h, w).data();

    if (opts.cutout) {
        // One rectangle of at most a quarter of the frame, mean filled.
        auto ch =
            std::max<int64_t>(1, static_cast<int64_t>(std::llround(rng.uniform(0.1, 0.5) * h)));
        auto cw =
            std::max<int64_t>(1, static_cast<int64_t>(std::llround(rng.uniform(0.1, 0.5) * w)));
        auto ctop = rng.uniform_int(0, h - ch);
        auto cleft = rng.uniform_int(0, w - cw);
        auto mean_color = out.mean(torch::IntArrayRef{0, 1}); // per channel
        out = out.clone();
        out.slice(0, ctop, ctop + ch).slice(1, cleft, cleft + cw) = mean_color;
    }

    if (opts.blur_sigma_max > 0.0)
        out = blur_hw3(out, rng.uniform(0.0, opts.blur_sigma_max));
    if (opts.noise_sigma_max > 0.0) {
        auto noise = rng.normal_tensor({h, w, 3}, 0.0, rng.uniform(0.0, opts.noise_sigma_max));
        out = out + noise;
    }
    return ImageTensor::from_tensor(out, /*clip=*/true);
}

double curriculum_score(const ShadowTriplet &triplet) {
    const auto &img = triplet.shadow.data();
    const auto &m = triplet.mask.data();
    auto lum = 0.299 * img.select(2, 0) + 0.587 * img.select(2, 1) + 0.114 * img.select(2, 2);

    double coverage = triplet.mask.coverage();
    double shadow_count = m.sum().item<double>();
    double total = static_cast<double>(m.numel());

    auto region_mean = [&](const torch::Tensor &sel, double count) {
        return count > 0.0 ? (lum * sel).sum().item<double>() / count : 0.0;
    };
    double lum_shadow = region_mean(m, shadow_count);
    double lum_nonshadow = region_mean(1.0 - m, total - shadow_count);
    if (total - shadow_count <= 0.0)
        std::cerr << "[unshadow] curriculum_score: all-shadow image, contrast term uses 0 ("
                  << triplet.id << ")\n";

    double contrast = std::clamp(lum_nonshadow - lum_shadow, 0.0, 1.0);
    return 0.5 * coverage + 0.5 * (1.0 - contrast);
}

} // namespace unshadow
