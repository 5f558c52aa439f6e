#ifndef UNSHADOW_LOSSES_HPP
#define UNSHADOW_LOSSES_HPP

#include <vector>

#include <torch/torch.h>

#include "unshadow/image.hpp"
#include "unshadow/networks.hpp"

namespace unshadow::losses {

/// Embeddings grouped per encoder layer, one N x D tensor per layer.
using LayerEmbeddings = std::vector<torch::Tensor>;

struct NceBatch {
    torch::Tensor query;     // N x D
    torch::Tensor positive;  // N x D, paired with query
    torch::Tensor negatives; // M x D shared across queries, or N x M x D
    double tau = 0.07;
};

/// InfoNCE: mean over queries of -log softmax of the positive similarity
/// against positive + negatives, sharpened by tau. Log-sum-exp stabilized.
torch::Tensor info_nce(const NceBatch &batch);

/// Sum of info_nce over layers; every sampled location of the negative stack
/// serves as a negative for each query of the same layer.
torch::Tensor layerwise_nce(const LayerEmbeddings &query, const LayerEmbeddings &positive,
                            const LayerEmbeddings &negative, double tau = 0.07);

/// Mean absolute difference restricted to the support mask.
torch::Tensor masked_mae(const torch::Tensor &a, const torch::Tensor &b, const ShadowMask &mask);

/// L1 between the generator's reconstruction of a shadow-free region and the
/// region itself, over its support.
torch::Tensor identity_loss(DenseUnetGenerator &generator, const RegionTensor &shadow_free_sample);

/// Mean (1 - score)^2 over a patch score map.
torch::Tensor critic_distill_from_scores(const torch::Tensor &scores);
torch::Tensor critic_distill_loss(PatchCritic &critic, const RegionTensor &generated);

/// Least-squares GAN split: generator wants scores at 1, the critic wants
/// fakes at 0 and reals at 1.
torch::Tensor lsgan_generator_loss(const torch::Tensor &fake_scores);
torch::Tensor lsgan_critic_loss(const torch::Tensor &fake_scores,
                                const std::vector<torch::Tensor> &real_scores);

struct AdversarialPair {
    torch::Tensor generator;
    torch::Tensor critic;
};
/// Both halves at once; `generated` stays attached for the generator term and
/// is detached for the critic term.
AdversarialPair adversarial_losses(PatchCritic &critic, const RegionTensor &generated,
                                   const RegionTensor &real);

/// L1 between the shadow-removed region and the brightened reference over
/// their (shared) support.
torch::Tensor illumination_loss(const RegionTensor &shadow_removed, const RegionTensor &bright);

/// Same machinery as layerwise_nce, used by the refinement stage.
torch::Tensor refinement_nce(const LayerEmbeddings &query, const LayerEmbeddings &positive,
                             const LayerEmbeddings &negative, double tau = 0.07);

/// Half the sum over the backbone's two tap points of the mean squared
/// feature difference.
torch::Tensor refinement_perceptual(const ImageTensor &refined, const ImageTensor &input,
                                    Vgg16Features &backbone);
torch::Tensor refinement_perceptual_nchw(const torch::Tensor &refined, const torch::Tensor &input,
                                         Vgg16Features &backbone);

/// Mean absolute error over all pixels and channels.
torch::Tensor pixel_loss(const torch::Tensor &pred, const torch::Tensor &gt);

/// Mean per-pixel angle between RGB vectors; zero-norm pixels contribute 0.
torch::Tensor color_loss(const torch::Tensor &pred, const torch::Tensor &gt);

/// Gram matrix of C x H x W features, normalized by C*H*W.
torch::Tensor gram(const torch::Tensor &features);

/// Mean over the two tap points of the squared Frobenius distance between
/// Gram matrices of the two images' features.
torch::Tensor style_loss(const torch::Tensor &pred_nchw, const torch::Tensor &gt_nchw,
                         Vgg16Features &backbone);

struct LossWeights {
    double lambda_pixel = 1.0;
    double lambda_color = 1.0;
    double lambda_style = 1.0e4;

    void validate() const;
};

/// lambda1 * pixel + lambda2 * color + lambda3 * style.
torch::Tensor supervised_total(const ImageTensor &pred, const ImageTensor &gt,
                               Vgg16Features &backbone, const LossWeights &weights = {});
torch::Tensor supervised_total_nchw(const torch::Tensor &pred, const torch::Tensor &gt,
                                    Vgg16Features &backbone, const LossWeights &weights = {});

} // namespace unshadow::losses

#endif
