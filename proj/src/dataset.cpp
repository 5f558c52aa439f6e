#include "unshadow/dataset.hpp"

#include <algorithm>
#include <condition_variable>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <mutex>
#include <queue>
#include <thread>

#include "unshadow/errors.hpp"
#include "unshadow/image_io.hpp"

namespace unshadow {

namespace fs = std::filesystem;

void ShadowTriplet::validate() const {
    if (!shadow.defined() || !mask.defined())
        throw ContractError("ShadowTriplet: shadow and mask required");
    if (shadow.height() != mask.height() || shadow.width() != mask.width())
        throw ShapeError("ShadowTriplet: shadow/mask dims disagree (" + id + ")");
    if (shadow_free &&
        (shadow_free->height() != shadow.height() || shadow_free->width() != shadow.width()))
        throw ShapeError("ShadowTriplet: shadow/shadow_free dims disagree (" + id + ")");
}

DatasetLayout parse_layout(const std::string &name) {
    if (name == "istd")
        return DatasetLayout::Istd;
    if (name == "istd+")
        return DatasetLayout::IstdPlus;
    if (name == "srd")
        return DatasetLayout::Srd;
    throw ConfigError("unknown dataset layout '" + name + "' (expected istd, istd+ or srd)");
}

std::string layout_name(DatasetLayout layout) {
    switch (layout) {
    case DatasetLayout::Istd: return "istd";
    case DatasetLayout::IstdPlus: return "istd+";
    case DatasetLayout::Srd: return "srd";
    }
    return "?";
}

std::string split_name(SplitName name) {
    return name == SplitName::Train ? "train" : "test";
}

ShadowTriplet SampleRecord::materialize() const {
    ShadowTriplet t;
    t.id = id;
    t.shadow = read_image(shadow_path);
    t.mask = read_mask(mask_path);
    if (!shadow_free_path.empty())
        t.shadow_free = read_image(shadow_free_path);
    t.validate();
    return t;
}

namespace {

bool is_image_file(const fs::path &p) {
    auto ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

// stem -> path, lexicographically ordered by stem.
std::map<std::string, fs::path> index_dir(const fs::path &dir) {
    std::map<std::string, fs::path> out;
    for (const auto &entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && is_image_file(entry.path()))
            out[entry.path().stem().string()] = entry.path();
    return out;
}

struct LayoutDirs {
    fs::path shadow, mask, shadow_free;
};

LayoutDirs layout_dirs(const fs::path &root, DatasetLayout layout, SplitName name) {
    if (layout == DatasetLayout::Srd)
        return {root / "shadow", root / "mask", root / "shadow_free"};
    auto prefix = split_name(name) + "_";
    return {root / (prefix + "A"), root / (prefix + "B"), root / (prefix + "C")};
}

} // namespace

DatasetSplit load_split(const fs::path &root, DatasetLayout layout, SplitName name,
                        bool require_gt) {
    if (!fs::is_directory(root))
        throw LayoutError("dataset root does not exist: " + root.string());
    auto dirs = layout_dirs(root, layout, name);
    if (!fs::is_directory(dirs.shadow))
        throw LayoutError("missing shadow directory: " + dirs.shadow.string());
    if (!fs::is_directory(dirs.mask))
        throw LayoutError("missing mask directory: " + dirs.mask.string());
    const bool have_gt_dir = fs::is_directory(dirs.shadow_free);
    if (require_gt && !have_gt_dir)
        throw ContractError("require_gt set but no shadow-free directory at " +
                            dirs.shadow_free.string());

    auto shadows = index_dir(dirs.shadow);
    auto masks = index_dir(dirs.mask);
    auto gts = have_gt_dir ? index_dir(dirs.shadow_free) : std::map<std::string, fs::path>{};

    DatasetSplit split;
    split.name = name;
    split.layout = layout;
    for (const auto &[stem, spath] : shadows) {
        auto mit = masks.find(stem);
        if (mit == masks.end()) {
            split.rejected_stems.push_back(stem);
            continue;
        }
        SampleRecord rec;
        rec.id = stem;
        rec.shadow_path = spath;
        rec.mask_path = mit->second;
        if (auto git = gts.find(stem); git != gts.end())
            rec.shadow_free_path = git->second;
        else if (require_gt)
            throw ContractError("require_gt set but sample '" + stem + "' has no shadow-free image");
        split.samples.push_back(std::move(rec));
    }
    if (split.samples.empty())
        std::cerr << "[unshadow] warning: empty split loaded from " << root << "\n";
    return split;
}

void DatasetSplit::write_rejection_report(const fs::path &path) const {
    std::ofstream os(path, std::ios::trunc);
    if (!os)
        throw IoError("cannot write rejection report: " + path.string());
    for (const auto &stem : rejected_stems)
        os << stem << "\n";
}

RegionTensor sample_nonshadow_crop(const ShadowTriplet &triplet, int64_t crop_h, int64_t crop_w,
                                   Rng &rng) {
    const auto h = triplet.shadow.height(), w = triplet.shadow.width();
    if (crop_h < 1 || crop_w < 1 || crop_h > h || crop_w > w)
        throw ContractError("sample_nonshadow_crop: crop exceeds image dims");
    const double max_shadow = kNonShadowCropTolerance * static_cast<double>(crop_h * crop_w);

    for (int attempt = 0; attempt < kNonShadowCropAttempts; ++attempt) {
        auto top = rng.uniform_int(0, h - crop_h);
        auto left = rng.uniform_int(0, w - crop_w);
        auto window = triplet.mask.data().slice(0, top, top + crop_h).slice(1, left, left + crop_w);
        if (window.sum().item<double>() < max_shadow) {
            auto pixels =
                triplet.shadow.data().slice(0, top, top + crop_h).slice(1, left, left + crop_w);
            return RegionTensor(pixels.contiguous(), ShadowMask::ones(crop_h, crop_w));
        }
    }
    throw SamplingError("sample_nonshadow_crop: no window under the shadow tolerance after " +
                        std::to_string(kNonShadowCropAttempts) + " attempts (" + triplet.id + ")");
}

// Bounded-queue prefetcher that decodes ahead but delivers in order.
struct TripletStream::Prefetcher {
    Prefetcher(const DatasetSplit &split, const std::vector<int64_t> &order, int workers)
        : split_(split), order_(order) {
        for (int i = 0; i < workers; ++i)
            threads_.emplace_back([this] { worker(); });
    }

    ~Prefetcher() {
        {
            std::lock_guard lk(mu_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto &t : threads_)
            t.join();
    }

    ShadowTriplet get(size_t seq) {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [&] { return done_.count(seq) > 0; });
        auto fut = std::move(done_.at(seq));
        done_.erase(seq);
        lk.unlock();
        cv_.notify_all();
        return fut.get();
    }

private:
    void worker() {
        while (true) {
            size_t seq;
            {
                std::unique_lock lk(mu_);
                cv_.wait(lk, [&] { return stop_ || (next_ < order_.size() && done_.size() < 8); });
                if (stop_)
                    return;
                seq = next_++;
            }
            std::promise<ShadowTriplet> prom;
            auto fut = prom.get_future();
            try {
                prom.set_value(split_.samples[static_cast<size_t>(order_[seq])].materialize());
            } catch (...) {
                prom.set_exception(std::current_exception());
            }
            {
                std::lock_guard lk(mu_);
                done_.emplace(seq, std::move(fut));
            }
            cv_.notify_all();
        }
    }

    const DatasetSplit &split_;
    const std::vector<int64_t> &order_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::map<size_t, std::future<ShadowTriplet>> done_;
    size_t next_ = 0;
    bool stop_ = false;
    std::vector<std::thread> threads_;
};

TripletStream::TripletStream(const DatasetSplit &split, std::vector<int64_t> order,
                             int decode_workers)
    : split_(split), order_(std::move(order)) {
    for (auto idx : order_)
        if (idx < 0 || idx >= static_cast<int64_t>(split_.samples.size()))
            throw ContractError("TripletStream: index " + std::to_string(idx) + " out of range");
    if (decode_workers > 0)
        prefetcher_ = std::make_unique<Prefetcher>(split_, order_, decode_workers);
}

TripletStream::~TripletStream() = default;

std::optional<ShadowTriplet> TripletStream::next() {
    if (cursor_ >= order_.size())
        return std::nullopt;
    size_t seq = cursor_++;
    if (prefetcher_)
        return prefetcher_->get(seq);
    return split_.samples[static_cast<size_t>(order_[seq])].materialize();
}

} // namespace unshadow
