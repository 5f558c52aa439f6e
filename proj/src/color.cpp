#include "unshadow/color.hpp"

namespace unshadow {

namespace {

// D65 reference white, 2-degree observer.
constexpr double kXn = 0.95047;
constexpr double kYn = 1.0;
constexpr double kZn = 1.08883;
constexpr double kEps = 216.0 / 24389.0;
constexpr double kKappa = 24389.0 / 27.0;

torch::Tensor srgb_to_linear(const torch::Tensor &c) {
    return torch::where(c <= 0.04045, c / 12.92, torch::pow((c + 0.055) / 1.055, 2.4));
}

torch::Tensor linear_to_srgb(const torch::Tensor &c) {
    return torch::where(c <= 0.0031308, c * 12.92, 1.055 * torch::pow(c.clamp_min(0.0), 1.0 / 2.4) - 0.055);
}

torch::Tensor lab_f(const torch::Tensor &t) {
    return torch::where(t > kEps, torch::pow(t.clamp_min(0.0), 1.0 / 3.0), (kKappa * t + 16.0) / 116.0);
}

torch::Tensor lab_f_inv(const torch::Tensor &f) {
    auto cube = f.pow(3);
    return torch::where(cube > kEps, cube, (116.0 * f - 16.0) / kKappa);
}

} // namespace

torch::Tensor to_lab(const ImageTensor &image) {
    auto rgb = image.data().to(torch::kFloat64);
    auto lin = srgb_to_linear(rgb);
    auto r = lin.select(2, 0), g = lin.select(2, 1), b = lin.select(2, 2);

    auto x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    auto y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    auto z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;

    auto fx = lab_f(x / kXn);
    auto fy = lab_f(y / kYn);
    auto fz = lab_f(z / kZn);

    auto L = 116.0 * fy - 16.0;
    auto a = 500.0 * (fx - fy);
    auto bb = 200.0 * (fy - fz);
    return torch::stack({L, a, bb}, 2).to(torch::kFloat32).contiguous();
}

ImageTensor lab_to_rgb(const torch::Tensor &lab) {
    if (!lab.defined() || lab.dim() != 3 || lab.size(2) != 3)
        throw ShapeError("lab_to_rgb: expected HxWx3 tensor");
    auto t = lab.to(torch::kFloat64);
    auto L = t.select(2, 0), a = t.select(2, 1), b = t.select(2, 2);

    auto fy = (L + 16.0) / 116.0;
    auto fx = fy + a / 500.0;
    auto fz = fy - b / 200.0;

    auto x = lab_f_inv(fx) * kXn;
    auto y = lab_f_inv(fy) * kYn;
    auto z = lab_f_inv(fz) * kZn;

    auto r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
    auto g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
    auto bl = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;

    auto rgb = linear_to_srgb(torch::stack({r, g, bl}, 2));
    return ImageTensor::from_tensor(rgb.to(torch::kFloat32), /*clip=*/true);
}

} // namespace unshadow
