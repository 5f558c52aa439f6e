#include "unshadow/evaluation.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "unshadow/color.hpp"
#include "unshadow/errors.hpp"

namespace unshadow {

namespace {

std::optional<double> lab_region_error(const torch::Tensor &diff_abs, const torch::Tensor &mask,
                                       bool rmse_literal) {
    double count = mask.sum().item<double>() * 3.0;
    if (count <= 0.0)
        return std::nullopt;
    auto m = mask.unsqueeze(2);
    if (rmse_literal)
        return std::sqrt((diff_abs.pow(2) * m).sum().item<double>() / count);
    return (diff_abs * m).sum().item<double>() / count;
}

} // namespace

RegionScores region_rmse_lab(const ImageTensor &pred, const ImageTensor &gt,
                             const ShadowMask &mask, bool rmse_literal) {
    if (pred.height() != gt.height() || pred.width() != gt.width() ||
        pred.height() != mask.height() || pred.width() != mask.width())
        throw ContractError("region_rmse_lab: dims disagree");
    auto diff = (to_lab(pred).to(torch::kFloat64) - to_lab(gt).to(torch::kFloat64)).abs();
    auto m = mask.data().to(torch::kFloat64);
    RegionScores out;
    out.shadow = lab_region_error(diff, m, rmse_literal);
    out.non_shadow = lab_region_error(diff, 1.0 - m, rmse_literal);
    out.all = lab_region_error(diff, torch::ones_like(m), rmse_literal);
    return out;
}

double psnr(const ImageTensor &pred, const ImageTensor &gt) {
    if (pred.height() != gt.height() || pred.width() != gt.width())
        throw ContractError("psnr: dims disagree");
    double mse = (pred.data().to(torch::kFloat64) - gt.data().to(torch::kFloat64))
                     .pow(2)
                     .mean()
                     .item<double>();
    if (mse <= 0.0)
        return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim(const ImageTensor &pred, const ImageTensor &gt) {
    if (pred.height() != gt.height() || pred.width() != gt.width())
        throw ContractError("ssim: dims disagree");
    constexpr int64_t kWindow = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01;
    constexpr double kC2 = 0.03 * 0.03;
    if (pred.height() < kWindow || pred.width() < kWindow)
        throw ContractError("ssim: images smaller than the 11x11 window");

    auto xs = torch::arange(kWindow, torch::kFloat64) - (kWindow - 1) / 2.0;
    auto g1 = torch::exp(-(xs * xs) / (2.0 * kSigma * kSigma));
    g1 /= g1.sum();
    auto window = g1.view({-1, 1}).matmul(g1.view({1, -1})).view({1, 1, kWindow, kWindow});
    window = window.repeat({3, 1, 1, 1});

    namespace F = torch::nn::functional;
    auto x = pred.data().to(torch::kFloat64).permute({2, 0, 1}).unsqueeze(0);
    auto y = gt.data().to(torch::kFloat64).permute({2, 0, 1}).unsqueeze(0);
    auto opts = F::Conv2dFuncOptions().groups(3);

    auto mu_x = F::conv2d(x, window, opts);
    auto mu_y = F::conv2d(y, window, opts);
    auto sigma_x = F::conv2d(x * x, window, opts) - mu_x * mu_x;
    auto sigma_y = F::conv2d(y * y, window, opts) - mu_y * mu_y;
    auto sigma_xy = F::conv2d(x * y, window, opts) - mu_x * mu_y;

    auto num = (2.0 * mu_x * mu_y + kC1) * (2.0 * sigma_xy + kC2);
    auto den = (mu_x * mu_x + mu_y * mu_y + kC1) * (sigma_x + sigma_y + kC2);
    return (num / den).mean().item<double>();
}

namespace {

std::string fmt(const std::optional<double> &v, int precision = 4) {
    if (!v)
        return "-";
    std::ostringstream os;
    os.precision(precision);
    os << std::fixed << *v;
    return os.str();
}

} // namespace

std::string MetricsReport::to_table() const {
    std::ostringstream os;
    os << "region      RMSE(LAB)   PSNR(dB)   SSIM\n";
    os << "shadow      " << fmt(rmse_lab.shadow) << "\n";
    os << "non-shadow  " << fmt(rmse_lab.non_shadow) << "\n";
    os << "all         " << fmt(rmse_lab.all) << "      " << fmt(psnr_rgb, 2) << "      "
       << fmt(ssim_rgb) << "\n";
    os << "samples: " << sample_count << "\n";
    return os.str();
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    auto region = [](const RegionScores &r) {
        nlohmann::json o;
        o["shadow"] = r.shadow ? nlohmann::json(*r.shadow) : nlohmann::json();
        o["non_shadow"] = r.non_shadow ? nlohmann::json(*r.non_shadow) : nlohmann::json();
        o["all"] = r.all ? nlohmann::json(*r.all) : nlohmann::json();
        return o;
    };
    j["rmse_lab"] = region(rmse_lab);
    j["rmse_lab_pooled"] = region(rmse_lab_pooled);
    j["psnr_rgb"] = psnr_rgb;
    j["ssim_rgb"] = ssim_rgb;
    j["sample_count"] = sample_count;
    j["breakdown"] = nlohmann::json::array();
    for (const auto &s : breakdown) {
        nlohmann::json row;
        row["id"] = s.id;
        row["rmse_lab"] = region(s.rmse_lab);
        row["psnr_rgb"] = s.psnr_rgb;
        row["ssim_rgb"] = s.ssim_rgb;
        j["breakdown"].push_back(row);
    }
    return j.dump(2);
}

std::string MetricsReport::to_csv() const {
    std::ostringstream os;
    os << "id,rmse_shadow,rmse_non_shadow,rmse_all,psnr,ssim\n";
    auto cell = [](const std::optional<double> &v) { return v ? std::to_string(*v) : ""; };
    for (const auto &s : breakdown)
        os << s.id << "," << cell(s.rmse_lab.shadow) << "," << cell(s.rmse_lab.non_shadow) << ","
           << cell(s.rmse_lab.all) << "," << s.psnr_rgb << "," << s.ssim_rgb << "\n";
    os << "mean," << cell(rmse_lab.shadow) << "," << cell(rmse_lab.non_shadow) << ","
       << cell(rmse_lab.all) << "," << psnr_rgb << "," << ssim_rgb << "\n";
    return os.str();
}

void MetricsReport::write(const std::filesystem::path &csv_path,
                          const std::filesystem::path &json_path,
                          const std::filesystem::path &table_path) const {
    auto dump = [](const std::filesystem::path &p, const std::string &text) {
        std::ofstream os(p, std::ios::trunc);
        if (!os)
            throw IoError("cannot write report: " + p.string());
        os << text;
    };
    dump(csv_path, to_csv());
    dump(json_path, to_json());
    dump(table_path, to_table());
}

MetricsReport score_split(const std::function<ImageTensor(const ShadowTriplet &)> &predict,
                          const DatasetSplit &split, const EvalOptions &opts) {
    MetricsReport report;
    double sum_shadow = 0, sum_non = 0, sum_all = 0, sum_psnr = 0, sum_ssim = 0;
    size_t n_shadow = 0, n_non = 0, n_all = 0;

    // Pixel-pooled accumulators.
    double pool_abs_shadow = 0, pool_abs_non = 0, pool_abs_all = 0;
    double pool_cnt_shadow = 0, pool_cnt_non = 0, pool_cnt_all = 0;

    for (const auto &rec : split.samples) {
        auto triplet = rec.materialize();
        if (!triplet.shadow_free) {
            std::cerr << "[unshadow] eval: sample '" << rec.id << "' has no ground truth, skipped\n";
            continue;
        }
        auto pred = resize(predict(triplet), opts.resize_to, opts.resize_to);
        auto gt = resize(*triplet.shadow_free, opts.resize_to, opts.resize_to);
        auto mask = resize_mask(triplet.mask, opts.resize_to, opts.resize_to);

        SampleMetrics sm;
        sm.id = rec.id;
        sm.rmse_lab = region_rmse_lab(pred, gt, mask, opts.rmse_literal);
        sm.psnr_rgb = psnr(pred, gt);
        sm.ssim_rgb = ssim(pred, gt);
        report.breakdown.push_back(sm);

        if (sm.rmse_lab.shadow) {
            sum_shadow += *sm.rmse_lab.shadow;
            ++n_shadow;
        }
        if (sm.rmse_lab.non_shadow) {
            sum_non += *sm.rmse_lab.non_shadow;
            ++n_non;
        }
        if (sm.rmse_lab.all) {
            sum_all += *sm.rmse_lab.all;
            ++n_all;
        }
        sum_psnr += sm.psnr_rgb;
        sum_ssim += sm.ssim_rgb;

        auto diff = (to_lab(pred).to(torch::kFloat64) - to_lab(gt).to(torch::kFloat64)).abs();
        auto m = mask.data().to(torch::kFloat64).unsqueeze(2);
        pool_abs_shadow += (diff * m).sum().item<double>();
        pool_cnt_shadow += m.sum().item<double>() * 3.0;
        pool_abs_non += (diff * (1.0 - m)).sum().item<double>();
        pool_cnt_non += (1.0 - m).sum().item<double>() * 3.0;
        pool_abs_all += diff.sum().item<double>();
        pool_cnt_all += static_cast<double>(diff.numel());
    }

    report.sample_count = report.breakdown.size();
    if (report.sample_count == 0)
        throw ContractError("score_split: no usable samples (missing ground truth?)");

    auto mean = [](double sum, size_t n) -> std::optional<double> {
        if (n == 0)
            return std::nullopt;
        return sum / static_cast<double>(n);
    };
    report.rmse_lab.shadow = mean(sum_shadow, n_shadow);
    report.rmse_lab.non_shadow = mean(sum_non, n_non);
    report.rmse_lab.all = mean(sum_all, n_all);
    report.psnr_rgb = sum_psnr / static_cast<double>(report.sample_count);
    report.ssim_rgb = sum_ssim / static_cast<double>(report.sample_count);
    report.rmse_lab_pooled.shadow =
        pool_cnt_shadow > 0 ? std::optional(pool_abs_shadow / pool_cnt_shadow) : std::nullopt;
    report.rmse_lab_pooled.non_shadow =
        pool_cnt_non > 0 ? std::optional(pool_abs_non / pool_cnt_non) : std::nullopt;
    report.rmse_lab_pooled.all =
        pool_cnt_all > 0 ? std::optional(pool_abs_all / pool_cnt_all) : std::nullopt;
    return report;
}

} // namespace unshadow
