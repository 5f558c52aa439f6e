#ifndef UNSHADOW_RNG_HPP
#define UNSHADOW_RNG_HPP

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include <torch/torch.h>

namespace unshadow {

// Seeded generator handed explicitly to every randomized operation.
// Same seed + same call order => identical outputs, on any platform.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : engine_(seed) {}

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> d(lo, hi);
        return d(engine_);
    }

    // Inclusive bounds.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        std::uniform_int_distribution<int64_t> d(lo, hi);
        return d(engine_);
    }

    double normal(double mean, double sigma) {
        std::normal_distribution<double> d(mean, sigma);
        return d(engine_);
    }

    bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }

    // Fill a float tensor with N(mean, sigma) draws, element order fixed.
    torch::Tensor normal_tensor(torch::IntArrayRef sizes, double mean, double sigma) {
        auto out = torch::empty(sizes, torch::kFloat32);
        auto flat = out.view(-1);
        auto acc = flat.accessor<float, 1>();
        std::normal_distribution<double> d(mean, sigma);
        for (int64_t i = 0; i < flat.size(0); ++i)
            acc[i] = static_cast<float>(d(engine_));
        return out;
    }

    torch::Tensor uniform_tensor(torch::IntArrayRef sizes, double lo, double hi) {
        auto out = torch::empty(sizes, torch::kFloat32);
        auto flat = out.view(-1);
        auto acc = flat.accessor<float, 1>();
        std::uniform_real_distribution<double> d(lo, hi);
        for (int64_t i = 0; i < flat.size(0); ++i)
            acc[i] = static_cast<float>(d(engine_));
        return out;
    }

    // Fisher-Yates shuffle of an index vector.
    template <typename T>
    void shuffle(std::vector<T> &v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_int(0, static_cast<int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Engine state round-trips through text, used by checkpointing.
    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void deserialize(const std::string &state) {
        std::istringstream is(state);
        is >> engine_;
    }

    std::mt19937_64 &engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace unshadow

#endif
