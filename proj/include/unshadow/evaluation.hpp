#ifndef UNSHADOW_EVALUATION_HPP
#define UNSHADOW_EVALUATION_HPP

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "unshadow/dataset.hpp"
#include "unshadow/image.hpp"

namespace unshadow {

struct RegionScores {
    std::optional<double> shadow;
    std::optional<double> non_shadow;
    std::optional<double> all;
};

/// LAB error per region. The headline number follows the shadow-removal
/// convention of mean absolute per-channel LAB difference; rmse_literal
/// switches to a true root-mean-square. Empty regions report no value.
RegionScores region_rmse_lab(const ImageTensor &pred, const ImageTensor &gt,
                             const ShadowMask &mask, bool rmse_literal = false);

inline constexpr double kPsnrCap = 100.0;

/// 10*log10(1/MSE) in dB, capped at 100 for identical images.
double psnr(const ImageTensor &pred, const ImageTensor &gt);

/// Single-scale SSIM: 11x11 Gaussian window, sigma 1.5, K1 0.01, K2 0.03,
/// valid-region convolution, per channel and averaged.
double ssim(const ImageTensor &pred, const ImageTensor &gt);

struct SampleMetrics {
    std::string id;
    RegionScores rmse_lab;
    double psnr_rgb = 0.0;
    double ssim_rgb = 0.0;
};

struct MetricsReport {
    // Dataset means (unweighted over samples).
    RegionScores rmse_lab;
    double psnr_rgb = 0.0;
    double ssim_rgb = 0.0;
    // Pixel-pooled LAB error across the whole split, for cross-checking.
    RegionScores rmse_lab_pooled;
    size_t sample_count = 0;
    std::vector<SampleMetrics> breakdown;

    std::string to_table() const;
    std::string to_json() const;
    std::string to_csv() const;
    void write(const std::filesystem::path &csv_path, const std::filesystem::path &json_path,
               const std::filesystem::path &table_path) const;
};

struct EvalOptions {
    int64_t resize_to = 256; // both images resized before scoring
    bool rmse_literal = false;
};

/// Score a split against a prediction function (pipeline inference, or the
/// ground truth itself for the self-test). Samples without G are skipped
/// with a warning.
MetricsReport score_split(const std::function<ImageTensor(const ShadowTriplet &)> &predict,
                          const DatasetSplit &split, const EvalOptions &opts = {});

} // namespace unshadow

#endif
