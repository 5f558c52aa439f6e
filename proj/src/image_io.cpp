#include "unshadow/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "unshadow/errors.hpp"

namespace unshadow {

namespace {

cv::Mat load_mat(const std::filesystem::path &path, int flags) {
    cv::Mat m = cv::imread(path.string(), flags);
    if (m.empty())
        throw IoError("cannot read image: " + path.string());
    return m;
}

} // namespace

ImageTensor read_image(const std::filesystem::path &path) {
    cv::Mat bgr = load_mat(path, cv::IMREAD_COLOR);
    cv::Mat f;
    double scale = bgr.depth() == CV_16U ? 1.0 / 65535.0 : 1.0 / 255.0;
    bgr.convertTo(f, CV_32FC3, scale);

    auto t = torch::empty({f.rows, f.cols, 3}, torch::kFloat32);
    auto acc = t.accessor<float, 3>();
    for (int y = 0; y < f.rows; ++y) {
        const cv::Vec3f *row = f.ptr<cv::Vec3f>(y);
        for (int x = 0; x < f.cols; ++x) {
            acc[y][x][0] = row[x][2];
            acc[y][x][1] = row[x][1];
            acc[y][x][2] = row[x][0];
        }
    }
    return ImageTensor::from_tensor(t, /*clip=*/true);
}

void write_image(const std::filesystem::path &path, const ImageTensor &image) {
    auto t = image.data();
    cv::Mat bgr(static_cast<int>(image.height()), static_cast<int>(image.width()), CV_8UC3);
    auto acc = t.accessor<float, 3>();
    for (int y = 0; y < bgr.rows; ++y) {
        cv::Vec3b *row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            auto q = [&](int c) {
                float v = acc[y][x][c] * 255.0f + 0.5f;
                return static_cast<uchar>(std::clamp(v, 0.0f, 255.0f));
            };
            row[x] = cv::Vec3b(q(2), q(1), q(0));
        }
    }
    if (!cv::imwrite(path.string(), bgr))
        throw IoError("cannot write image: " + path.string());
}

ShadowMask read_mask(const std::filesystem::path &path) {
    cv::Mat gray = load_mat(path, cv::IMREAD_GRAYSCALE);
    auto t = torch::empty({gray.rows, gray.cols}, torch::kFloat32);
    auto acc = t.accessor<float, 2>();
    for (int y = 0; y < gray.rows; ++y) {
        const uchar *row = gray.ptr<uchar>(y);
        for (int x = 0; x < gray.cols; ++x)
            acc[y][x] = row[x] >= 128 ? 1.0f : 0.0f;
    }
    return ShadowMask::from_tensor(t);
}

void write_mask(const std::filesystem::path &path, const ShadowMask &mask) {
    cv::Mat gray(static_cast<int>(mask.height()), static_cast<int>(mask.width()), CV_8UC1);
    auto acc = mask.data().accessor<float, 2>();
    for (int y = 0; y < gray.rows; ++y) {
        uchar *row = gray.ptr<uchar>(y);
        for (int x = 0; x < gray.cols; ++x)
            row[x] = acc[y][x] > 0.5f ? 255 : 0;
    }
    if (!cv::imwrite(path.string(), gray))
        throw IoError("cannot write mask: " + path.string());
}

} // namespace unshadow
