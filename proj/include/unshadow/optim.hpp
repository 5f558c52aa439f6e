#ifndef UNSHADOW_OPTIM_HPP
#define UNSHADOW_OPTIM_HPP

#include <vector>

#include <torch/torch.h>

namespace unshadow {

/// Plain SGD with momentum (buf = m*buf + grad; p -= lr*buf), matching the
/// usual convention with zero dampening. Kept minimal so momentum buffers
/// serialize deterministically into checkpoints.
class SgdMomentum {
public:
    SgdMomentum() = default;
    SgdMomentum(std::vector<torch::Tensor> params, double lr, double momentum);

    void zero_grad();
    void step();

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

    const std::vector<torch::Tensor> &params() const { return params_; }
    std::vector<torch::Tensor> &buffers() { return buffers_; }
    const std::vector<torch::Tensor> &buffers() const { return buffers_; }

private:
    std::vector<torch::Tensor> params_;
    std::vector<torch::Tensor> buffers_;
    double lr_ = 0.0;
    double momentum_ = 0.0;
};

} // namespace unshadow

#endif
