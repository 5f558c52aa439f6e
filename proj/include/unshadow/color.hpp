#ifndef UNSHADOW_COLOR_HPP
#define UNSHADOW_COLOR_HPP

#include <torch/torch.h>

#include "unshadow/image.hpp"

namespace unshadow {

/// sRGB -> CIELAB under the D65 white point. Returns HxWx3 float32 with
/// L in [0,100] and a,b roughly in [-128,127].
torch::Tensor to_lab(const ImageTensor &image);

/// Inverse conversion; out-of-gamut values are clipped to [0,1].
ImageTensor lab_to_rgb(const torch::Tensor &lab);

} // namespace unshadow

#endif
