#ifndef UNSHADOW_IMAGE_IO_HPP
#define UNSHADOW_IMAGE_IO_HPP

#include <filesystem>

#include "unshadow/image.hpp"

namespace unshadow {

/// Read a PNG/JPEG file as RGB in [0,1]; 8-bit and 16-bit files are normalized.
ImageTensor read_image(const std::filesystem::path &path);

/// Write PNG or JPEG depending on the extension.
void write_image(const std::filesystem::path &path, const ImageTensor &image);

/// Read a mask image (single channel or first channel) thresholded at 128/255.
ShadowMask read_mask(const std::filesystem::path &path);

void write_mask(const std::filesystem::path &path, const ShadowMask &mask);

} // namespace unshadow

#endif
