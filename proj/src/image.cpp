#include "unshadow/image.hpp"

namespace unshadow {

namespace {

torch::Tensor checked_hw3(torch::Tensor t, const char *what) {
    if (!t.defined() || t.dim() != 3 || t.size(2) != 3)
        throw ShapeError(std::string(what) + ": expected HxWx3 tensor");
    if (t.size(0) < 1 || t.size(1) < 1)
        throw ShapeError(std::string(what) + ": empty spatial dims");
    return t.to(torch::kFloat32).contiguous();
}

} // namespace

ImageTensor ImageTensor::from_tensor(torch::Tensor hw3, bool clip) {
    auto t = checked_hw3(std::move(hw3), "ImageTensor");
    if (clip)
        t = t.clamp(0.0, 1.0);
    return ImageTensor(t);
}

ImageTensor ImageTensor::constant(int64_t h, int64_t w, double r, double g, double b) {
    auto t = torch::empty({h, w, 3}, torch::kFloat32);
    t.select(2, 0).fill_(r);
    t.select(2, 1).fill_(g);
    t.select(2, 2).fill_(b);
    return ImageTensor(t);
}

ImageTensor ImageTensor::from_nchw(torch::Tensor n3hw, bool clip) {
    if (n3hw.dim() != 4 || n3hw.size(0) != 1 || n3hw.size(1) != 3)
        throw ShapeError("ImageTensor::from_nchw: expected 1x3xHxW");
    return from_tensor(n3hw.squeeze(0).permute({1, 2, 0}), clip);
}

ShadowMask ShadowMask::from_tensor(torch::Tensor hw) {
    if (!hw.defined() || hw.dim() != 2)
        throw ShapeError("ShadowMask: expected HxW tensor");
    auto t = hw.to(torch::kFloat32).contiguous();
    auto binary = (t == 0.0).logical_or(t == 1.0);
    if (!binary.all().item<bool>())
        throw ContractError("ShadowMask: values must be exactly 0 or 1");
    return ShadowMask(t);
}

ShadowMask ShadowMask::zeros(int64_t h, int64_t w) {
    return ShadowMask(torch::zeros({h, w}, torch::kFloat32));
}

ShadowMask ShadowMask::ones(int64_t h, int64_t w) {
    return ShadowMask(torch::ones({h, w}, torch::kFloat32));
}

ShadowMask ShadowMask::threshold(const torch::Tensor &hw) {
    if (!hw.defined() || hw.dim() != 2)
        throw ShapeError("ShadowMask::threshold: expected HxW tensor");
    return ShadowMask((hw.to(torch::kFloat32) >= 0.5).to(torch::kFloat32).contiguous());
}

double ShadowMask::coverage() const {
    return data_.mean().item<double>();
}

bool ShadowMask::same_as(const ShadowMask &other) const {
    return data_.sizes() == other.data_.sizes() && data_.equal(other.data_);
}

RegionTensor::RegionTensor(torch::Tensor data_hw3, ShadowMask mask) {
    auto t = checked_hw3(std::move(data_hw3), "RegionTensor");
    if (t.size(0) != mask.height() || t.size(1) != mask.width())
        throw ShapeError("RegionTensor: data/mask dims disagree");
    data_ = (t * mask.channelwise()).contiguous();
    mask_ = std::move(mask);
}

RegionTensor extract_region(const ImageTensor &image, const ShadowMask &mask) {
    if (image.height() != mask.height() || image.width() != mask.width())
        throw ShapeError("extract_region: image/mask dims disagree");
    return RegionTensor(image.data(), mask);
}

ImageTensor embed_region(const ImageTensor &s, const ShadowMask &mask, const RegionTensor &region) {
    if (s.height() != mask.height() || s.width() != mask.width())
        throw ShapeError("embed_region: image/mask dims disagree");
    if (!region.mask().same_as(mask))
        throw ContractError("embed_region: region support differs from the given mask");
    auto m = mask.channelwise();
    auto out = s.data() - s.data() * m + region.data() * m;
    return ImageTensor::from_tensor(out, /*clip=*/true);
}

ImageTensor resize(const ImageTensor &image, int64_t h, int64_t w) {
    if (h < 1 || w < 1)
        throw ContractError("resize: target dims must be positive");
    if (h == image.height() && w == image.width())
        return image;
    namespace F = torch::nn::functional;
    auto out = F::interpolate(image.nchw(),
                              F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{h, w})
                                  .mode(torch::kBilinear)
                                  .align_corners(false));
    return ImageTensor::from_nchw(out, /*clip=*/true);
}

ShadowMask resize_mask(const ShadowMask &mask, int64_t h, int64_t w) {
    if (h < 1 || w < 1)
        throw ContractError("resize_mask: target dims must be positive");
    if (h == mask.height() && w == mask.width())
        return mask;
    namespace F = torch::nn::functional;
    auto out = F::interpolate(mask.data().unsqueeze(0).unsqueeze(0),
                              F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{h, w})
                                  .mode(torch::kBilinear)
                                  .align_corners(false));
    return ShadowMask::threshold(out.squeeze(0).squeeze(0));
}

RegionTensor adjust_brightness(const RegionTensor &region, double level_percent) {
    if (level_percent < -100.0)
        throw ContractError("adjust_brightness: level below -100%");
    double gain = 1.0 + level_percent / 100.0;
    auto scaled = (region.data() * gain).clamp(0.0, 1.0);
    return RegionTensor(scaled, region.mask());
}

} // namespace unshadow
