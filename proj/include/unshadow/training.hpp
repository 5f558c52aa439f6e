#ifndef UNSHADOW_TRAINING_HPP
#define UNSHADOW_TRAINING_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "unshadow/augment.hpp"
#include "unshadow/dataset.hpp"
#include "unshadow/losses.hpp"
#include "unshadow/networks.hpp"
#include "unshadow/optim.hpp"

namespace unshadow {

enum class TrainMode { Weak, Supervised };

TrainMode parse_mode(const std::string &name);
std::string mode_name(TrainMode mode);

/// Per-term multipliers; everything defaults to 1.0 except the supervised
/// composite, whose internal lambdas live in losses::LossWeights.
struct TermWeights {
    double nce = 1.0;
    double identity = 1.0;
    double critic_distill = 1.0;
    double adversarial = 1.0;
    double illumination = 1.0;
    double refine_nce = 1.0;
    double refine_perceptual = 1.0;
    double supervised = 1.0;
};

struct TrainConfig {
    TrainMode mode = TrainMode::Weak;
    int64_t epochs = 200;
    double lr_base = 1e-4;
    int64_t decay_start_epoch = 75;
    double momentum = 0.9;
    int64_t batch_size = 1;
    int64_t train_resolution = 256;
    uint64_t seed = 0;
    bool curriculum = true;
    bool inpaint = true;
    bool augment = true;
    bool deterministic = false;
    int64_t checkpoint_every = 25;
    int64_t nce_locations = 256;
    double tau = 0.07;
    int64_t crop_size = 64;     // non-shadow crops for critic/identity
    double mu_supervised = 0.0; // brightness family applied to G in supervised mode

    GeneratorSpec generator;                         // DeShadower and Illumination
    GeneratorSpec refiner = {64, 4, 2, true, true};  // residual output
    CriticSpec critic;
    TermWeights weights;
    losses::LossWeights supervised_weights;

    void validate() const;
    std::string canonical() const; // stable serialization for hashing
    uint64_t config_hash() const;
};

/// Base learning rate up to the knee, then linear decay to zero at `epochs`.
double lr_schedule(double epoch, const TrainConfig &cfg);

/// Per-epoch sample orders. Disabled: a seeded shuffle per epoch. Enabled:
/// epoch e exposes the easiest ceil(q(e)*n) samples ranked by
/// curriculum_score, q(e) = min(1, 0.3 + 0.7*e/decay_start), shuffled within
/// the exposed pool.
std::vector<std::vector<int64_t>> curriculum_order(const DatasetSplit &split, bool enabled,
                                                   const TrainConfig &cfg);
std::vector<std::vector<int64_t>> curriculum_order_scored(size_t sample_count,
                                                          const std::vector<double> &scores,
                                                          bool enabled, const TrainConfig &cfg);

struct EpochLossRow {
    int64_t epoch = 0;
    double lr = 0.0;
    std::map<std::string, double> terms; // epoch means of the active terms
};

struct TrainState {
    int64_t epoch = 0; // next epoch to run
    int64_t step = 0;

    DenseUnetGenerator deshadower{nullptr};
    DenseUnetGenerator illumination{nullptr}; // weak mode only
    PatchCritic critic{nullptr};              // weak mode only
    DenseUnetGenerator refiner{nullptr};
    ProjectionHeads deshadow_heads{nullptr};
    ProjectionHeads refine_heads{nullptr};

    SgdMomentum opt_critic;
    SgdMomentum opt_gen;
    SgdMomentum opt_refine;

    Rng rng;
    std::vector<EpochLossRow> history;
};

/// Fresh networks + optimizers. Seeds the torch RNG first so the
/// initialization is reproducible.
TrainState init_state(const TrainConfig &cfg);

/// One alternating update (critic -> generators -> refinement) on a single
/// prepared triplet. Returns the step's loss terms; empty-mask samples are
/// skipped (std::nullopt) with a logged warning.
std::optional<std::map<std::string, double>> train_step_weak(TrainState &state,
                                                             const ShadowTriplet &triplet,
                                                             const TrainConfig &cfg,
                                                             const AugmentationConfig &aug,
                                                             Vgg16Features &backbone);

std::optional<std::map<std::string, double>> train_step_supervised(TrainState &state,
                                                                   const ShadowTriplet &triplet,
                                                                   const TrainConfig &cfg,
                                                                   Vgg16Features &backbone);

void save_checkpoint(const TrainState &state, const TrainConfig &cfg,
                     const std::filesystem::path &path);
TrainState load_checkpoint(const std::filesystem::path &path, const TrainConfig &cfg);

/// Deshadower + refiner reconstructed from a checkpoint for inference.
struct InferencePipeline {
    DenseUnetGenerator deshadower{nullptr};
    DenseUnetGenerator refiner{nullptr};

    struct Stages {
        RegionTensor shadow_region;
        RegionTensor removed;
        ImageTensor embedded;
        ImageTensor refined;
    };

    Stages run_stages(const ShadowTriplet &triplet);
    ImageTensor run(const ShadowTriplet &triplet, bool bypass_refine = false);

    static InferencePipeline from_checkpoint(const std::filesystem::path &path);
    static InferencePipeline from_state(const TrainState &state);
};

struct FitOptions {
    std::filesystem::path out_dir;       // checkpoints + loss CSV
    AugmentationConfig augmentation;     // mu + standard augmentation knobs
    std::optional<std::filesystem::path> resume;
    int decode_workers = 0;
};

/// Full training loop: curriculum ordering, augmentation, the mode's step
/// function, per-epoch loss CSV and periodic checkpoints. Returns the final
/// checkpoint path.
std::filesystem::path fit(const TrainConfig &cfg, const DatasetSplit &split,
                          Vgg16Features &backbone, const FitOptions &opts);

} // namespace unshadow

#endif
