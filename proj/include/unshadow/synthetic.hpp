#ifndef UNSHADOW_SYNTHETIC_HPP
#define UNSHADOW_SYNTHETIC_HPP

#include <filesystem>
#include <vector>

#include "unshadow/dataset.hpp"

namespace unshadow {

struct SyntheticOptions {
    int64_t count = 8;
    int64_t size = 64;
    uint64_t seed = 7;
    // Shadow gain range; centered so that a 75% brightness boost roughly
    // restores the original level.
    double gain_min = 0.52;
    double gain_max = 0.62;
};

/// Flat-color scenes with one geometric darkened region each: the shadow
/// image is the scene with the region multiplied by a gain, the ground truth
/// is the clean scene, the mask is the region.
std::vector<ShadowTriplet> make_synthetic_triplets(const SyntheticOptions &opts = {});

/// Write the synthetic set to disk in a chosen dataset layout (train split
/// directories only), so the loaders and CLI can run end to end without real
/// data.
void write_synthetic_dataset(const std::filesystem::path &root, DatasetLayout layout,
                             const SyntheticOptions &opts = {});

} // namespace unshadow

#endif
