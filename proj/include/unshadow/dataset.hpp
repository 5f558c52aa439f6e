#ifndef UNSHADOW_DATASET_HPP
#define UNSHADOW_DATASET_HPP

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "unshadow/image.hpp"
#include "unshadow/rng.hpp"

namespace unshadow {

/// One dataset sample: shadow image, its mask, optional shadow-free truth.
struct ShadowTriplet {
    ImageTensor shadow;
    ShadowMask mask;
    std::optional<ImageTensor> shadow_free;
    std::string id;

    void validate() const;
};

enum class DatasetLayout { Istd, IstdPlus, Srd };
enum class SplitName { Train, Test };

DatasetLayout parse_layout(const std::string &name);
std::string layout_name(DatasetLayout layout);
std::string split_name(SplitName name);

/// File paths of one sample; decoding happens on materialize().
struct SampleRecord {
    std::string id;
    std::filesystem::path shadow_path;
    std::filesystem::path mask_path;
    std::filesystem::path shadow_free_path; // empty if absent

    ShadowTriplet materialize() const;
};

struct DatasetSplit {
    std::vector<SampleRecord> samples; // lexicographic by filename stem
    SplitName name = SplitName::Train;
    DatasetLayout layout = DatasetLayout::Istd;
    std::vector<std::string> rejected_stems; // shadow files without a mask

    size_t size() const { return samples.size(); }

    void write_rejection_report(const std::filesystem::path &path) const;
};

/// Scan a dataset root. Samples are matched by filename stem; shadow images
/// without a mask are skipped and listed in the rejection report.
DatasetSplit load_split(const std::filesystem::path &root, DatasetLayout layout, SplitName name,
                        bool require_gt);

/// Cut a (crop_h x crop_w) window from outside the shadow mask (under a 5%
/// shadow-pixel tolerance) and return it as a region with an all-ones
/// footprint mask. Rejection-samples up to 100 windows.
RegionTensor sample_nonshadow_crop(const ShadowTriplet &triplet, int64_t crop_h, int64_t crop_w,
                                   Rng &rng);

inline constexpr double kNonShadowCropTolerance = 0.05;
inline constexpr int kNonShadowCropAttempts = 100;

/// Streams triplets of a split in exactly the requested index order, decoding
/// lazily. With decode_workers > 0 images are decoded by a thread pool while
/// delivery order stays the requested order.
class TripletStream {
public:
    TripletStream(const DatasetSplit &split, std::vector<int64_t> order, int decode_workers = 0);
    ~TripletStream();

    std::optional<ShadowTriplet> next();

private:
    struct Prefetcher;
    const DatasetSplit &split_;
    std::vector<int64_t> order_;
    size_t cursor_ = 0;
    std::unique_ptr<Prefetcher> prefetcher_;
};

} // namespace unshadow

#endif
