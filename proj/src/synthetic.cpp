#include "unshadow/synthetic.hpp"

#include <iomanip>
#include <sstream>

#include "unshadow/errors.hpp"
#include "unshadow/image_io.hpp"
#include "unshadow/rng.hpp"

namespace unshadow {

namespace {

ShadowMask geometric_mask(Rng &rng, int64_t size, bool ellipse) {
    auto m = torch::zeros({size, size}, torch::kFloat32);
    auto acc = m.accessor<float, 2>();
    const auto span = [&](double lo, double hi) {
        return static_cast<int64_t>(rng.uniform(lo, hi) * static_cast<double>(size));
    };
    int64_t h = std::max<int64_t>(4, span(0.25, 0.45));
    int64_t w = std::max<int64_t>(4, span(0.25, 0.45));
    int64_t top = rng.uniform_int(1, size - h - 1);
    int64_t left = rng.uniform_int(1, size - w - 1);
    if (ellipse) {
        double cy = top + h / 2.0, cx = left + w / 2.0;
        double ry = h / 2.0, rx = w / 2.0;
        for (int64_t y = 0; y < size; ++y)
            for (int64_t x = 0; x < size; ++x) {
                double dy = (y - cy) / ry, dx = (x - cx) / rx;
                if (dy * dy + dx * dx <= 1.0)
                    acc[y][x] = 1.0f;
            }
    } else {
        for (int64_t y = top; y < top + h; ++y)
            for (int64_t x = left; x < left + w; ++x)
                acc[y][x] = 1.0f;
    }
    return ShadowMask::from_tensor(m);
}

} // namespace

std::vector<ShadowTriplet> make_synthetic_triplets(const SyntheticOptions &opts) {
    if (opts.count < 1 || opts.size < 16)
        throw ContractError("make_synthetic_triplets: count >= 1 and size >= 16 required");
    Rng rng(opts.seed);
    std::vector<ShadowTriplet> out;
    out.reserve(static_cast<size_t>(opts.count));
    for (int64_t i = 0; i < opts.count; ++i) {
        // Flat scene color bright enough that a darkened copy stays in gamut.
        double r = rng.uniform(0.55, 0.9);
        double g = rng.uniform(0.55, 0.9);
        double b = rng.uniform(0.55, 0.9);
        auto scene = ImageTensor::constant(opts.size, opts.size, r, g, b).data();
        // Gentle ramp so local statistics are not fully degenerate.
        auto ramp = torch::linspace(-0.02, 0.02, opts.size, torch::kFloat32);
        scene = (scene + ramp.view({1, -1, 1})).clamp(0.05, 0.95);

        auto mask = geometric_mask(rng, opts.size, i % 2 == 1);
        double gain = rng.uniform(opts.gain_min, opts.gain_max);
        auto m3 = mask.channelwise();
        auto shadowed = scene * (1.0 - m3) + scene * gain * m3;

        ShadowTriplet t;
        std::ostringstream id;
        id << std::setw(3) << std::setfill('0') << i;
        t.id = id.str();
        t.shadow = ImageTensor::from_tensor(shadowed);
        t.mask = mask;
        t.shadow_free = ImageTensor::from_tensor(scene);
        t.validate();
        out.push_back(std::move(t));
    }
    return out;
}

void write_synthetic_dataset(const std::filesystem::path &root, DatasetLayout layout,
                             const SyntheticOptions &opts) {
    namespace fs = std::filesystem;
    fs::path shadow_dir, mask_dir, gt_dir;
    if (layout == DatasetLayout::Srd) {
        shadow_dir = root / "shadow";
        mask_dir = root / "mask";
        gt_dir = root / "shadow_free";
    } else {
        shadow_dir = root / "train_A";
        mask_dir = root / "train_B";
        gt_dir = root / "train_C";
    }
    fs::create_directories(shadow_dir);
    fs::create_directories(mask_dir);
    fs::create_directories(gt_dir);

    for (const auto &t : make_synthetic_triplets(opts)) {
        write_image(shadow_dir / (t.id + ".png"), t.shadow);
        write_mask(mask_dir / (t.id + ".png"), t.mask);
        write_image(gt_dir / (t.id + ".png"), *t.shadow_free);
    }
}

} // namespace unshadow
