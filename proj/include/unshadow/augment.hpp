#ifndef UNSHADOW_AUGMENT_HPP
#define UNSHADOW_AUGMENT_HPP

#include <array>
#include <functional>
#include <vector>

#include "unshadow/dataset.hpp"
#include "unshadow/image.hpp"
#include "unshadow/rng.hpp"

namespace unshadow {

/// Pool of training-set shadow masks, drawn from during inpainting and
/// resampled to the target dims on use.
class MaskBank {
public:
    static MaskBank from_masks(std::vector<ShadowMask> masks);
    static MaskBank from_split(const DatasetSplit &split);

    bool empty() const { return loaders_.empty(); }
    size_t size() const { return loaders_.size(); }

    ShadowMask draw(Rng &rng, int64_t target_h, int64_t target_w) const;

private:
    std::vector<std::function<ShadowMask()>> loaders_;
};

struct AugmentationConfig {
    double flip_prob = 0.3;
    std::array<double, 2> scale_range = {0.8, 1.2};
    double noise_sigma = 0.02;
    double blur_sigma = 1.5;
    std::array<double, 2> contrast_range = {0.75, 1.25};
    bool inpaint_enabled = true;
    double mu = 75.0; // illuminance factor for the critic's brightened variants

    void validate() const;
};

/// Transplant a randomly drawn bank mask onto a non-shadow area and darken it
/// to the scene's measured shadow mean, jittered +-5%. The returned mask is
/// the union of old and new masks; original shadow pixels are never altered.
/// Returns the input unchanged (logged) when no non-overlapping bank mask is
/// found within 50 draws.
ShadowTriplet inpaint_shadow(const ShadowTriplet &triplet, const MaskBank &bank, Rng &rng);

/// Deterministic core of inpaint_shadow: darken the pixels under new_mask
/// (excluding existing shadow) so their mean becomes
/// shadow_mean * (1 + jitter). jitter in [-0.05, 0.05].
ShadowTriplet inpaint_shadow_with(const ShadowTriplet &triplet, const ShadowMask &new_mask,
                                  double jitter);

/// Horizontal flip / rescale (geometric, applied to image, mask and G alike)
/// plus noise, blur and contrast (photometric, never applied to the mask,
/// co-applied to G).
ShadowTriplet standard_augment(const ShadowTriplet &triplet, const AugmentationConfig &cfg,
                               Rng &rng);

/// Brightness gains at levels {mu-5, mu, mu+5}, in that order. No rng.
std::array<RegionTensor, 3> brightness_variants(const RegionTensor &region, double mu);

/// The critic's positive family; requires mu >= 5.
std::array<RegionTensor, 3> illumination_variants(const RegionTensor &region, double mu);

struct RefinePositiveOptions {
    double crop_min = 0.5; // window side as a fraction of the short dim
    double crop_max = 0.9;
    bool cutout = true; // one mean-filled rectangle of at most 25% area
    double blur_sigma_max = 2.0;
    double noise_sigma_max = 0.02;
};

/// Contrastive positive for the refinement stage: non-shadow crop resized
/// back to the full frame, then cutout, blur and noise.
ImageTensor refinement_positive(const ImageTensor &image, const ShadowMask &mask, Rng &rng,
                                const RefinePositiveOptions &opts = {});

/// Difficulty in [0,1]: 0.5*coverage + 0.5*(1 - contrast), lower is easier.
double curriculum_score(const ShadowTriplet &triplet);

// Shared helpers (also used by tests).
ImageTensor flip_horizontal(const ImageTensor &image);
ShadowMask flip_horizontal(const ShadowMask &mask);
ImageTensor gaussian_blur(const ImageTensor &image, double sigma);

} // namespace unshadow

#endif
