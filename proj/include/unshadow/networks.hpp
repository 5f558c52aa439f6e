#ifndef UNSHADOW_NETWORKS_HPP
#define UNSHADOW_NETWORKS_HPP

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "unshadow/image.hpp"

namespace unshadow {

/// Ordered per-layer feature maps from a network encoder, keyed by layer id.
struct FeatureStack {
    std::vector<std::string> ids;
    std::vector<torch::Tensor> feats; // each C_l x H_l x W_l

    size_t size() const { return ids.size(); }
};

struct GeneratorSpec {
    int64_t base_channels = 64;
    int64_t depth = 4; // encoder stages; also the number of feature taps
    int64_t dense_blocks_per_stage = 2;
    bool skip_connections = true;
    bool residual_output = false; // refinement blends on top of its input

    void validate() const;
};

struct CriticSpec {
    int64_t num_layers = 4;
    int64_t base_channels = 64;

    // Receptive field of one patch score, from the conv stride arithmetic.
    int64_t receptive_patch() const;
    // Smallest input that still produces a non-empty score map.
    int64_t min_input_size() const;
};

// Dense block: a couple of concatenatively-grown conv layers followed by a
// 1x1 compression back to the stage width.
struct DenseBlockImpl : torch::nn::Module {
    DenseBlockImpl(int64_t channels, int64_t growth_layers = 2);
    torch::Tensor forward(torch::Tensor x);

    torch::nn::ModuleList grow{nullptr};
    torch::nn::Sequential compress{nullptr};
};
TORCH_MODULE(DenseBlock);

/// Encoder-decoder generator with dense blocks and skip connections.
/// Fully convolutional; inputs not divisible by 2^depth are reflection-padded
/// and the output cropped back.
struct DenseUnetGeneratorImpl : torch::nn::Module {
    explicit DenseUnetGeneratorImpl(GeneratorSpec spec);

    torch::Tensor forward(torch::Tensor x); // 1x3xHxW -> 1x3xHxW in [0,1]
    std::pair<torch::Tensor, FeatureStack> forward_with_features(torch::Tensor x);

    // Encoder-only pass returning the tap activations (one per stage).
    FeatureStack encode(torch::Tensor x);

    // Channel count of each tap, for sizing projection heads.
    std::vector<int64_t> tap_channels() const;

    GeneratorSpec spec;

private:
    std::pair<torch::Tensor, std::vector<torch::Tensor>> run_encoder(const torch::Tensor &x);

    torch::nn::Conv2d stem{nullptr};
    torch::nn::ModuleList enc_blocks{nullptr};
    torch::nn::ModuleList downs{nullptr};
    torch::nn::Sequential bottleneck{nullptr};
    torch::nn::ModuleList ups{nullptr};
    torch::nn::ModuleList fuse{nullptr};
    torch::nn::ModuleList dec_blocks{nullptr};
    torch::nn::Conv2d head{nullptr};
    std::vector<int64_t> channels_; // per stage, channels_[0] = base
};
TORCH_MODULE(DenseUnetGenerator);

/// Patch discriminator scoring local structure; raw (unbounded) scores,
/// least-squares convention.
struct PatchCriticImpl : torch::nn::Module {
    explicit PatchCriticImpl(CriticSpec spec = {});

    torch::Tensor forward(torch::Tensor x); // 1x3xhxw -> h'xw' score map

    CriticSpec spec;

private:
    torch::nn::Sequential body{nullptr};
};
TORCH_MODULE(PatchCritic);

/// Per-layer two-hidden-layer MLPs mapping sampled feature vectors to
/// unit-norm embeddings.
struct ProjectionHeadsImpl : torch::nn::Module {
    ProjectionHeadsImpl(std::vector<int64_t> in_channels, int64_t hidden_dim = 256,
                        int64_t embed_dim = 256);

    // locations: N x 2 (row, col) normalized to [0,1); the same normalized
    // positions are used across all layers of all stacks being compared.
    // Returns one N x embed_dim unit-norm tensor per layer.
    std::vector<torch::Tensor> project(const FeatureStack &stack,
                                       const torch::Tensor &locations);

    int64_t embed_dim() const { return embed_dim_; }

private:
    torch::nn::ModuleList mlps{nullptr};
    std::vector<int64_t> in_channels_;
    int64_t embed_dim_;
};
TORCH_MODULE(ProjectionHeads);

class Rng;
/// N x 2 normalized sample positions shared across feature stacks.
torch::Tensor sample_feature_locations(Rng &rng, int64_t count);

/// Frozen VGG-16 backbone tapped at the two deepest relu stages used by the
/// perceptual and style losses (both 512 channels at 1/16 scale).
struct Vgg16FeaturesImpl : torch::nn::Module {
    Vgg16FeaturesImpl(); // randomly initialized; load weights for real use

    // Returns {relu5_1, relu5_3} activations. Input 1x3xHxW in [0,1]; H,W >= 32.
    std::pair<torch::Tensor, torch::Tensor> forward(torch::Tensor x);

    void load_weights(const std::filesystem::path &path);
    void save_weights(const std::filesystem::path &path);

    void freeze();

private:
    torch::nn::ModuleList convs{nullptr};
    std::vector<int64_t> conv_indices_; // torchvision features.* numbering
    std::vector<bool> pool_after_;
};
TORCH_MODULE(Vgg16Features);

/// Load the perceptual backbone from disk or fail with instructions on how
/// to produce the weights file.
Vgg16Features load_perceptual_backbone(const std::filesystem::path &path);

int64_t parameter_count(const torch::nn::Module &m);

} // namespace unshadow

#endif
