#include "unshadow/optim.hpp"

namespace unshadow {

SgdMomentum::SgdMomentum(std::vector<torch::Tensor> params, double lr, double momentum)
    : params_(std::move(params)), lr_(lr), momentum_(momentum) {
    buffers_.reserve(params_.size());
    for (const auto &p : params_)
        buffers_.push_back(torch::zeros_like(p));
}

void SgdMomentum::zero_grad() {
    for (auto &p : params_)
        if (p.grad().defined())
            p.mutable_grad().zero_();
}

void SgdMomentum::step() {
    torch::NoGradGuard ng;
    for (size_t i = 0; i < params_.size(); ++i) {
        auto &p = params_[i];
        if (!p.grad().defined())
            continue;
        buffers_[i].mul_(momentum_).add_(p.grad());
        p.add_(buffers_[i], -lr_);
    }
}

} // namespace unshadow
