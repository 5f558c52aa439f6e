#include "unshadow/losses.hpp"

#include "unshadow/errors.hpp"

namespace unshadow::losses {

torch::Tensor info_nce(const NceBatch &batch) {
    if (batch.tau <= 0.0)
        throw ContractError("info_nce: tau must be positive");
    const auto &q = batch.query;
    const auto &p = batch.positive;
    auto n = batch.negatives;
    if (q.dim() != 2 || p.dim() != 2 || q.sizes() != p.sizes())
        throw ContractError("info_nce: query/positive must be matching NxD");

    auto pos_sim = (q * p).sum(1, /*keepdim=*/true); // N x 1
    torch::Tensor neg_sim;
    if (n.dim() == 2) {
        neg_sim = q.matmul(n.t()); // N x M
    } else if (n.dim() == 3 && n.size(0) == q.size(0)) {
        neg_sim = torch::bmm(n, q.unsqueeze(2)).squeeze(2); // N x M
    } else {
        throw ContractError("info_nce: negatives must be MxD or NxMxD");
    }

    auto logits = torch::cat({pos_sim, neg_sim}, 1) / batch.tau;
    // -log softmax at index 0, via the stabilized log-sum-exp.
    auto loss = torch::logsumexp(logits, 1) - logits.select(1, 0);
    return loss.mean();
}

torch::Tensor layerwise_nce(const LayerEmbeddings &query, const LayerEmbeddings &positive,
                            const LayerEmbeddings &negative, double tau) {
    if (query.size() != positive.size() || query.size() != negative.size())
        throw ContractError("layerwise_nce: layer counts disagree");
    if (query.empty())
        throw ContractError("layerwise_nce: no layers");
    torch::Tensor total;
    for (size_t l = 0; l < query.size(); ++l) {
        auto term = info_nce({query[l], positive[l], negative[l], tau});
        total = total.defined() ? total + term : term;
    }
    return total;
}

torch::Tensor masked_mae(const torch::Tensor &a, const torch::Tensor &b, const ShadowMask &mask) {
    if (a.sizes() != b.sizes())
        throw ShapeError("masked_mae: operand dims disagree");
    auto m = mask.channelwise().to(a.dtype());
    auto support = m.sum() * a.size(2);
    if (support.item<double>() <= 0.0)
        throw ContractError("masked_mae: empty support");
    return ((a - b).abs() * m).sum() / support;
}

torch::Tensor identity_loss(DenseUnetGenerator &generator, const RegionTensor &sample) {
    auto out = generator->forward(sample.nchw()).squeeze(0).permute({1, 2, 0});
    auto masked = out * sample.mask().channelwise();
    return masked_mae(masked, sample.data(), sample.mask());
}

torch::Tensor critic_distill_from_scores(const torch::Tensor &scores) {
    return (1.0 - scores).pow(2).mean();
}

torch::Tensor critic_distill_loss(PatchCritic &critic, const RegionTensor &generated) {
    return critic_distill_from_scores(critic->forward(generated.nchw()));
}

torch::Tensor lsgan_generator_loss(const torch::Tensor &fake_scores) {
    return (1.0 - fake_scores).pow(2).mean();
}

torch::Tensor lsgan_critic_loss(const torch::Tensor &fake_scores,
                                const std::vector<torch::Tensor> &real_scores) {
    if (real_scores.empty())
        throw ContractError("lsgan_critic_loss: need at least one real score map");
    auto loss = fake_scores.pow(2).mean();
    torch::Tensor real_term;
    for (const auto &r : real_scores) {
        auto t = (1.0 - r).pow(2).mean();
        real_term = real_term.defined() ? real_term + t : t;
    }
    return loss + real_term / static_cast<double>(real_scores.size());
}

AdversarialPair adversarial_losses(PatchCritic &critic, const RegionTensor &generated,
                                   const RegionTensor &real) {
    auto fake_attached = critic->forward(generated.nchw());
    auto fake_detached = critic->forward(generated.nchw().detach());
    auto real_scores = critic->forward(real.nchw());
    return {lsgan_generator_loss(fake_attached),
            lsgan_critic_loss(fake_detached, {real_scores})};
}

torch::Tensor illumination_loss(const RegionTensor &shadow_removed, const RegionTensor &bright) {
    if (!shadow_removed.mask().same_as(bright.mask()))
        throw ContractError("illumination_loss: support masks disagree");
    return masked_mae(shadow_removed.data(), bright.data(), shadow_removed.mask());
}

torch::Tensor refinement_nce(const LayerEmbeddings &query, const LayerEmbeddings &positive,
                             const LayerEmbeddings &negative, double tau) {
    return layerwise_nce(query, positive, negative, tau);
}

torch::Tensor refinement_perceptual_nchw(const torch::Tensor &refined, const torch::Tensor &input,
                                         Vgg16Features &backbone) {
    auto [a1, a2] = backbone->forward(refined);
    auto [b1, b2] = backbone->forward(input);
    return 0.5 * ((a1 - b1).pow(2).mean() + (a2 - b2).pow(2).mean());
}

torch::Tensor refinement_perceptual(const ImageTensor &refined, const ImageTensor &input,
                                    Vgg16Features &backbone) {
    return refinement_perceptual_nchw(refined.nchw(), input.nchw(), backbone);
}

torch::Tensor pixel_loss(const torch::Tensor &pred, const torch::Tensor &gt) {
    if (pred.sizes() != gt.sizes())
        throw ShapeError("pixel_loss: operand dims disagree");
    return (pred - gt).abs().mean();
}

torch::Tensor color_loss(const torch::Tensor &pred, const torch::Tensor &gt) {
    if (pred.sizes() != gt.sizes() || pred.dim() < 1 || pred.size(pred.dim() - 1) != 3)
        throw ShapeError("color_loss: expected matching ...x3 tensors");
    constexpr double eps = 1e-8;
    auto a = pred.flatten(0, pred.dim() - 2); // P x 3
    auto b = gt.flatten(0, gt.dim() - 2);
    auto dot = (a * b).sum(1);
    auto na = a.norm(2, 1);
    auto nb = b.norm(2, 1);
    auto cosine = (dot / (na * nb + eps)).clamp(-1.0, 1.0);
    auto angle = torch::arccos(cosine);
    // Zero-norm pixels have no direction; count them as zero angle.
    auto valid = (na > 0.0).logical_and(nb > 0.0).to(angle.dtype());
    return (angle * valid).mean();
}

torch::Tensor gram(const torch::Tensor &features) {
    if (features.dim() != 3)
        throw ShapeError("gram: expected CxHxW features");
    const auto c = features.size(0), h = features.size(1), w = features.size(2);
    auto v = features.reshape({c, h * w});
    return v.matmul(v.t()) / static_cast<double>(c * h * w);
}

torch::Tensor style_loss(const torch::Tensor &pred_nchw, const torch::Tensor &gt_nchw,
                         Vgg16Features &backbone) {
    auto [p1, p2] = backbone->forward(pred_nchw);
    auto [g1, g2] = backbone->forward(gt_nchw);
    auto d1 = (gram(p1.squeeze(0)) - gram(g1.squeeze(0))).pow(2).sum();
    auto d2 = (gram(p2.squeeze(0)) - gram(g2.squeeze(0))).pow(2).sum();
    return (d1 + d2) / 2.0;
}

void LossWeights::validate() const {
    if (lambda_pixel < 0 || lambda_color < 0 || lambda_style < 0)
        throw ContractError("LossWeights: weights must be non-negative");
}

torch::Tensor supervised_total_nchw(const torch::Tensor &pred, const torch::Tensor &gt,
                                    Vgg16Features &backbone, const LossWeights &weights) {
    weights.validate();
    auto lp = pixel_loss(pred, gt);
    auto lc = color_loss(pred.permute({0, 2, 3, 1}), gt.permute({0, 2, 3, 1}));
    auto ls = style_loss(pred, gt, backbone);
    return weights.lambda_pixel * lp + weights.lambda_color * lc + weights.lambda_style * ls;
}

torch::Tensor supervised_total(const ImageTensor &pred, const ImageTensor &gt,
                               Vgg16Features &backbone, const LossWeights &weights) {
    return supervised_total_nchw(pred.nchw(), gt.nchw(), backbone, weights);
}

} // namespace unshadow::losses
