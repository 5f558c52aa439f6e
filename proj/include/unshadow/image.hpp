#ifndef UNSHADOW_IMAGE_HPP
#define UNSHADOW_IMAGE_HPP

#include <cstdint>
#include <utility>

#include <torch/torch.h>

#include "unshadow/errors.hpp"

namespace unshadow {

/// H x W x 3 float image, RGB, values in [0,1]. The universal pixel container.
class ImageTensor {
public:
    ImageTensor() = default;

    // Validates shape and dtype; clips when asked to.
    static ImageTensor from_tensor(torch::Tensor hw3, bool clip = false);

    // Single constant color.
    static ImageTensor constant(int64_t h, int64_t w, double r, double g, double b);

    const torch::Tensor &data() const { return data_; }
    int64_t height() const { return data_.size(0); }
    int64_t width() const { return data_.size(1); }
    bool defined() const { return data_.defined(); }

    // 1x3xHxW view for network consumption.
    torch::Tensor nchw() const { return data_.permute({2, 0, 1}).unsqueeze(0); }

    // Inverse of nchw() for a 1x3xHxW tensor.
    static ImageTensor from_nchw(torch::Tensor n3hw, bool clip = false);

private:
    explicit ImageTensor(torch::Tensor t) : data_(std::move(t)) {}
    torch::Tensor data_; // HxWx3 float32, contiguous, CPU
};

/// H x W binary map, 1 = shadow pixel. Stored as float 0/1 so it multiplies
/// directly against image tensors.
class ShadowMask {
public:
    ShadowMask() = default;

    // Requires values to be exactly 0 or 1.
    static ShadowMask from_tensor(torch::Tensor hw);

    static ShadowMask zeros(int64_t h, int64_t w);
    static ShadowMask ones(int64_t h, int64_t w);

    // Threshold an arbitrary real map at 0.5.
    static ShadowMask threshold(const torch::Tensor &hw);

    const torch::Tensor &data() const { return data_; }
    int64_t height() const { return data_.size(0); }
    int64_t width() const { return data_.size(1); }
    bool defined() const { return data_.defined(); }

    // Fraction of 1-pixels.
    double coverage() const;
    int64_t count() const { return static_cast<int64_t>(data_.sum().item<double>() + 0.5); }

    // HxWx1 view that broadcasts over channels.
    torch::Tensor channelwise() const { return data_.unsqueeze(2); }

    bool same_as(const ShadowMask &other) const;

private:
    explicit ShadowMask(torch::Tensor t) : data_(std::move(t)) {}
    torch::Tensor data_; // HxW float32 in {0,1}
};

/// Masked image region: data is zero wherever the support mask is zero.
class RegionTensor {
public:
    RegionTensor() = default;

    // Multiplies data by the mask so the invariant holds by construction.
    RegionTensor(torch::Tensor data_hw3, ShadowMask mask);

    const torch::Tensor &data() const { return data_; }
    const ShadowMask &mask() const { return mask_; }
    int64_t height() const { return data_.size(0); }
    int64_t width() const { return data_.size(1); }
    bool defined() const { return data_.defined(); }

    torch::Tensor nchw() const { return data_.permute({2, 0, 1}).unsqueeze(0); }

private:
    torch::Tensor data_; // HxWx3 float32
    ShadowMask mask_;
};

/// Pixelwise product of image and mask; the mask becomes the region support.
RegionTensor extract_region(const ImageTensor &image, const ShadowMask &mask);

/// S - S*S_M + S_r*S_M: masked pixels come from the region, the rest from S.
/// Output clipped to [0,1].
ImageTensor embed_region(const ImageTensor &s, const ShadowMask &mask, const RegionTensor &region);

/// Bilinear resample (half-pixel centers, no corner alignment). Clips to [0,1].
ImageTensor resize(const ImageTensor &image, int64_t h, int64_t w);

/// Resample a mask to new dims and re-binarize at 0.5.
ShadowMask resize_mask(const ShadowMask &mask, int64_t h, int64_t w);

/// Scale masked pixels by (1 + level/100), clipped to [0,1]. level >= -100.
RegionTensor adjust_brightness(const RegionTensor &region, double level_percent);

} // namespace unshadow

#endif
