#include "unshadow/networks.hpp"

#include "unshadow/errors.hpp"
#include "unshadow/rng.hpp"
#include "unshadow/tensor_archive.hpp"

namespace unshadow {

namespace nn = torch::nn;
namespace F = torch::nn::functional;

void GeneratorSpec::validate() const {
    if (depth < 3)
        throw ContractError("GeneratorSpec: depth must be >= 3");
    if (base_channels < 1 || dense_blocks_per_stage < 1)
        throw ContractError("GeneratorSpec: channels and blocks must be positive");
}

int64_t CriticSpec::receptive_patch() const {
    // Walk the conv chain backwards: rf_in = rf_out * stride + (kernel - stride).
    int64_t rf = 1;
    rf = rf * 1 + 3; // output conv, k4 s1
    rf = rf * 1 + 3; // last feature conv, k4 s1
    for (int64_t i = 0; i < num_layers - 1; ++i)
        rf = rf * 2 + 2; // k4 s2
    return rf;
}

int64_t CriticSpec::min_input_size() const {
    for (int64_t in = 1; in < 4096; ++in) {
        int64_t d = in;
        bool ok = true;
        for (int64_t i = 0; i < num_layers - 1 && ok; ++i) {
            d = (d + 2 - 4) / 2 + 1;
            ok = d >= 1;
        }
        d -= 1; // k4 s1 p1
        d -= 1; // output conv
        if (ok && d >= 1)
            return in;
    }
    throw ContractError("CriticSpec: no feasible input size");
}

DenseBlockImpl::DenseBlockImpl(int64_t channels, int64_t growth_layers) {
    int64_t growth = std::max<int64_t>(channels / 2, 4);
    grow = register_module("grow", nn::ModuleList());
    int64_t acc = channels;
    for (int64_t i = 0; i < growth_layers; ++i) {
        grow->push_back(nn::Sequential(
            nn::Conv2d(nn::Conv2dOptions(acc, growth, 3).padding(1)),
            nn::InstanceNorm2d(nn::InstanceNorm2dOptions(growth).affine(true)),
            nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
        acc += growth;
    }
    compress = register_module("compress",
        nn::Sequential(nn::Conv2d(nn::Conv2dOptions(acc, channels, 1)),
                       nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels).affine(true)),
                       nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
}

torch::Tensor DenseBlockImpl::forward(torch::Tensor x) {
    std::vector<torch::Tensor> feats{x};
    for (const auto &m : *grow) {
        auto cat = feats.size() == 1 ? feats[0] : torch::cat(feats, 1);
        feats.push_back(m->as<nn::Sequential>()->forward(cat));
    }
    return compress->forward(torch::cat(feats, 1));
}

namespace {

nn::Sequential dense_stage(int64_t channels, int64_t blocks) {
    nn::Sequential s;
    for (int64_t i = 0; i < blocks; ++i)
        s->push_back(DenseBlock(channels));
    return s;
}

} // namespace

DenseUnetGeneratorImpl::DenseUnetGeneratorImpl(GeneratorSpec spec_) : spec(spec_) {
    spec.validate();
    const int64_t cap = spec.base_channels * 8;
    channels_.push_back(spec.base_channels);
    for (int64_t i = 0; i < spec.depth; ++i)
        channels_.push_back(std::min(channels_.back() * 2, cap));

    stem = register_module("stem", nn::Conv2d(nn::Conv2dOptions(3, channels_[0], 3).padding(1)));
    enc_blocks = register_module("enc_blocks", nn::ModuleList());
    downs = register_module("downs", nn::ModuleList());
    for (int64_t i = 0; i < spec.depth; ++i) {
        enc_blocks->push_back(dense_stage(channels_[i], spec.dense_blocks_per_stage));
        downs->push_back(nn::Sequential(
            nn::Conv2d(nn::Conv2dOptions(channels_[i], channels_[i + 1], 4).stride(2).padding(1)),
            nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels_[i + 1]).affine(true)),
            nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2))));
    }
    bottleneck = register_module("bottleneck",
                                 dense_stage(channels_[spec.depth], spec.dense_blocks_per_stage));

    ups = register_module("ups", nn::ModuleList());
    fuse = register_module("fuse", nn::ModuleList());
    dec_blocks = register_module("dec_blocks", nn::ModuleList());
    for (int64_t i = spec.depth - 1; i >= 0; --i) {
        ups->push_back(nn::Sequential(
            nn::ConvTranspose2d(
                nn::ConvTranspose2dOptions(channels_[i + 1], channels_[i], 4).stride(2).padding(1)),
            nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels_[i]).affine(true)),
            nn::ReLU()));
        int64_t in = spec.skip_connections ? channels_[i] * 2 : channels_[i];
        fuse->push_back(nn::Sequential(
            nn::Conv2d(nn::Conv2dOptions(in, channels_[i], 1)),
            nn::InstanceNorm2d(nn::InstanceNorm2dOptions(channels_[i]).affine(true)),
            nn::ReLU()));
        dec_blocks->push_back(dense_stage(channels_[i], spec.dense_blocks_per_stage));
    }
    head = register_module("head", nn::Conv2d(nn::Conv2dOptions(channels_[0], 3, 3).padding(1)));
}

std::pair<torch::Tensor, std::vector<torch::Tensor>>
DenseUnetGeneratorImpl::run_encoder(const torch::Tensor &x) {
    std::vector<torch::Tensor> skips; // pre-downsample activations
    std::vector<torch::Tensor> taps;  // post-downsample activations
    auto h = stem->forward(x);
    for (int64_t i = 0; i < spec.depth; ++i) {
        h = enc_blocks[static_cast<size_t>(i)]->as<nn::Sequential>()->forward(h);
        skips.push_back(h);
        h = downs[static_cast<size_t>(i)]->as<nn::Sequential>()->forward(h);
        taps.push_back(h);
    }
    // Pack: first spec.depth entries are taps, then skips, then the deep state.
    std::vector<torch::Tensor> all = taps;
    all.insert(all.end(), skips.begin(), skips.end());
    all.push_back(h);
    return {h, std::move(all)};
}

std::pair<torch::Tensor, FeatureStack>
DenseUnetGeneratorImpl::forward_with_features(torch::Tensor x) {
    if (x.dim() != 4 || x.size(1) != 3)
        throw ShapeError("generator: expected 1x3xHxW input");
    const int64_t h_in = x.size(2), w_in = x.size(3);
    const int64_t mult = int64_t(1) << spec.depth;
    const int64_t pad_h = (mult - h_in % mult) % mult;
    const int64_t pad_w = (mult - w_in % mult) % mult;
    if (pad_h || pad_w)
        x = F::pad(x, F::PadFuncOptions({0, pad_w, 0, pad_h}).mode(torch::kReflect));

    auto [deep, packed] = run_encoder(x);
    FeatureStack stack;
    for (int64_t i = 0; i < spec.depth; ++i) {
        stack.ids.push_back("enc" + std::to_string(i + 1));
        stack.feats.push_back(packed[static_cast<size_t>(i)].squeeze(0));
    }

    auto h = bottleneck->forward(deep);
    for (int64_t i = 0; i < spec.depth; ++i) {
        h = ups[static_cast<size_t>(i)]->as<nn::Sequential>()->forward(h);
        if (spec.skip_connections) {
            auto &skip = packed[static_cast<size_t>(spec.depth + (spec.depth - 1 - i))];
            h = torch::cat({h, skip}, 1);
        }
        h = fuse[static_cast<size_t>(i)]->as<nn::Sequential>()->forward(h);
        h = dec_blocks[static_cast<size_t>(i)]->as<nn::Sequential>()->forward(h);
    }
    auto out = head->forward(h);
    out = spec.residual_output ? (x + out).clamp(0.0, 1.0) : torch::sigmoid(out);
    if (pad_h || pad_w)
        out = out.slice(2, 0, h_in).slice(3, 0, w_in);
    return {out, std::move(stack)};
}

torch::Tensor DenseUnetGeneratorImpl::forward(torch::Tensor x) {
    return forward_with_features(std::move(x)).first;
}

FeatureStack DenseUnetGeneratorImpl::encode(torch::Tensor x) {
    if (x.dim() != 4 || x.size(1) != 3)
        throw ShapeError("generator encode: expected 1x3xHxW input");
    const int64_t mult = int64_t(1) << spec.depth;
    const int64_t pad_h = (mult - x.size(2) % mult) % mult;
    const int64_t pad_w = (mult - x.size(3) % mult) % mult;
    if (pad_h || pad_w)
        x = F::pad(x, F::PadFuncOptions({0, pad_w, 0, pad_h}).mode(torch::kReflect));
    auto [deep, packed] = run_encoder(x);
    (void)deep;
    FeatureStack stack;
    for (int64_t i = 0; i < spec.depth; ++i) {
        stack.ids.push_back("enc" + std::to_string(i + 1));
        stack.feats.push_back(packed[static_cast<size_t>(i)].squeeze(0));
    }
    return stack;
}

std::vector<int64_t> DenseUnetGeneratorImpl::tap_channels() const {
    return {channels_.begin() + 1, channels_.end()};
}

PatchCriticImpl::PatchCriticImpl(CriticSpec spec_) : spec(spec_) {
    if (spec.num_layers < 2)
        throw ContractError("CriticSpec: num_layers must be >= 2");
    body = register_module("body", nn::Sequential());
    int64_t in = 3;
    int64_t out = spec.base_channels;
    for (int64_t i = 0; i < spec.num_layers; ++i) {
        const int64_t stride = i < spec.num_layers - 1 ? 2 : 1;
        body->push_back(nn::Conv2d(nn::Conv2dOptions(in, out, 4).stride(stride).padding(1)));
        if (i > 0)
            body->push_back(nn::InstanceNorm2d(nn::InstanceNorm2dOptions(out).affine(true)));
        body->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
        in = out;
        out = std::min(out * 2, spec.base_channels * 8);
    }
    body->push_back(nn::Conv2d(nn::Conv2dOptions(in, 1, 4).stride(1).padding(1)));
}

torch::Tensor PatchCriticImpl::forward(torch::Tensor x) {
    if (x.dim() == 3)
        x = x.unsqueeze(0);
    if (x.dim() != 4 || x.size(1) != 3)
        throw ShapeError("critic: expected 1x3xHxW input");
    const int64_t min_in = spec.min_input_size();
    if (x.size(2) < min_in || x.size(3) < min_in)
        throw ShapeError("critic: input smaller than one scoreable patch (min " +
                         std::to_string(min_in) + " px)");
    return body->forward(x).squeeze(0).squeeze(0);
}

ProjectionHeadsImpl::ProjectionHeadsImpl(std::vector<int64_t> in_channels, int64_t hidden_dim,
                                         int64_t embed_dim)
    : in_channels_(std::move(in_channels)), embed_dim_(embed_dim) {
    mlps = register_module("mlps", nn::ModuleList());
    for (int64_t c : in_channels_) {
        mlps->push_back(nn::Sequential(nn::Linear(c, hidden_dim), nn::ReLU(),
                                       nn::Linear(hidden_dim, hidden_dim), nn::ReLU(),
                                       nn::Linear(hidden_dim, embed_dim)));
    }
}

std::vector<torch::Tensor> ProjectionHeadsImpl::project(const FeatureStack &stack,
                                                        const torch::Tensor &locations) {
    if (stack.size() != in_channels_.size())
        throw ContractError("ProjectionHeads: feature stack has wrong layer count");
    if (locations.dim() != 2 || locations.size(1) != 2)
        throw ContractError("ProjectionHeads: locations must be Nx2");
    if ((locations < 0.0).any().item<bool>() || (locations >= 1.0).any().item<bool>())
        throw ContractError("ProjectionHeads: locations out of [0,1) range");

    std::vector<torch::Tensor> out;
    auto loc = locations.to(torch::kFloat64);
    for (size_t l = 0; l < stack.size(); ++l) {
        const auto &f = stack.feats[l]; // C x H x W
        if (f.dim() != 3 || f.size(0) != in_channels_[l])
            throw ContractError("ProjectionHeads: layer " + stack.ids[l] + " has wrong shape");
        const int64_t h = f.size(1), w = f.size(2);
        auto rows = (loc.select(1, 0) * h).floor().clamp(0, h - 1).to(torch::kLong);
        auto cols = (loc.select(1, 1) * w).floor().clamp(0, w - 1).to(torch::kLong);
        auto flat = f.flatten(1);                    // C x (H*W)
        auto idx = rows * w + cols;                  // N
        auto vecs = flat.index_select(1, idx).t();   // N x C
        auto emb = mlps[l]->as<nn::Sequential>()->forward(vecs);
        out.push_back(F::normalize(emb, F::NormalizeFuncOptions().dim(1).p(2)));
    }
    return out;
}

torch::Tensor sample_feature_locations(Rng &rng, int64_t count) {
    auto loc = torch::empty({count, 2}, torch::kFloat64);
    auto acc = loc.accessor<double, 2>();
    for (int64_t i = 0; i < count; ++i) {
        acc[i][0] = rng.uniform(0.0, 1.0);
        acc[i][1] = rng.uniform(0.0, 1.0);
    }
    return loc;
}

Vgg16FeaturesImpl::Vgg16FeaturesImpl() {
    // torchvision vgg16.features numbering for the 13 conv layers.
    conv_indices_ = {0, 2, 5, 7, 10, 12, 14, 17, 19, 21, 24, 26, 28};
    const std::vector<int64_t> widths = {64, 64, 128, 128, 256, 256, 256,
                                         512, 512, 512, 512, 512, 512};
    // Max-pool after conv1_2, conv2_2, conv3_3, conv4_3.
    pool_after_ = {false, true, false, true, false, false, true,
                   false, false, true, false, false, false};
    convs = register_module("convs", nn::ModuleList());
    int64_t in = 3;
    for (size_t i = 0; i < widths.size(); ++i) {
        convs->push_back(nn::Conv2d(nn::Conv2dOptions(in, widths[i], 3).padding(1)));
        in = widths[i];
    }
}

std::pair<torch::Tensor, torch::Tensor> Vgg16FeaturesImpl::forward(torch::Tensor x) {
    if (x.dim() != 4 || x.size(1) != 3)
        throw ShapeError("vgg16: expected 1x3xHxW input");
    if (x.size(2) < 32 || x.size(3) < 32)
        throw ShapeError("vgg16: input must be at least 32x32");
    auto mean = torch::tensor({0.485, 0.456, 0.406}, x.options()).view({1, 3, 1, 1});
    auto std = torch::tensor({0.229, 0.224, 0.225}, x.options()).view({1, 3, 1, 1});
    x = (x - mean) / std;

    torch::Tensor relu5_1;
    for (size_t i = 0; i < convs->size(); ++i) {
        x = torch::relu(convs[i]->as<nn::Conv2d>()->forward(x));
        if (i == 10)
            relu5_1 = x;
        if (pool_after_[i])
            x = F::max_pool2d(x, F::MaxPool2dFuncOptions(2).stride(2));
    }
    return {relu5_1, x}; // x is relu5_3
}

void Vgg16FeaturesImpl::load_weights(const std::filesystem::path &path) {
    auto ar = TensorArchive::load(path);
    torch::NoGradGuard ng;
    for (size_t i = 0; i < convs->size(); ++i) {
        auto prefix = "features." + std::to_string(conv_indices_[i]);
        auto *conv = convs[i]->as<nn::Conv2d>();
        conv->weight.copy_(ar.get(prefix + ".weight").to(conv->weight.dtype()));
        conv->bias.copy_(ar.get(prefix + ".bias").to(conv->bias.dtype()));
    }
    freeze();
}

void Vgg16FeaturesImpl::save_weights(const std::filesystem::path &path) {
    TensorArchive ar;
    ar.metadata = "{\"format\":\"vgg16_features\"}";
    for (size_t i = 0; i < convs->size(); ++i) {
        auto prefix = "features." + std::to_string(conv_indices_[i]);
        auto *conv = convs[i]->as<nn::Conv2d>();
        ar.add(prefix + ".weight", conv->weight);
        ar.add(prefix + ".bias", conv->bias);
    }
    ar.save(path);
}

void Vgg16FeaturesImpl::freeze() {
    for (auto &p : parameters())
        p.set_requires_grad(false);
    eval();
}

Vgg16Features load_perceptual_backbone(const std::filesystem::path &path) {
    if (!std::filesystem::exists(path))
        throw IoError("perceptual backbone weights not found at '" + path.string() +
                      "'. Export them with tools/export_vgg16.py "
                      "(e.g. `python tools/export_vgg16.py --out vgg16_features.usnt`) "
                      "or point UNSHADOW_VGG_WEIGHTS / paths.vgg_weights at an existing file.");
    Vgg16Features vgg;
    vgg->load_weights(path);
    return vgg;
}

int64_t parameter_count(const torch::nn::Module &m) {
    int64_t n = 0;
    for (const auto &p : m.parameters())
        n += p.numel();
    return n;
}

} // namespace unshadow
