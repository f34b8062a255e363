#include "cugr/image.hpp"

#include "cugr/common.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

namespace cugr {

namespace {
const std::vector<int> kPngParams = {cv::IMWRITE_PNG_COMPRESSION, 6};
}

void write_png_rgb(const std::string& path, const ImageU8& img) {
    check(img.height > 0 && img.width > 0, "write_png_rgb: empty image");
    cv::Mat bgr(img.height, img.width, CV_8UC3);
    for (int y = 0; y < img.height; ++y) {
        uint8_t* row = bgr.ptr<uint8_t>(y);
        const uint8_t* src = img.px(y, 0);
        for (int x = 0; x < img.width; ++x) {
            row[3 * x + 0] = src[3 * x + 2];
            row[3 * x + 1] = src[3 * x + 1];
            row[3 * x + 2] = src[3 * x + 0];
        }
    }
    check(cv::imwrite(path, bgr, kPngParams), "write_png_rgb: failed to write " + path);
}

ImageU8 read_png_rgb(const std::string& path) {
    cv::Mat bgr = cv::imread(path, cv::IMREAD_COLOR);
    check(!bgr.empty(), "read_png_rgb: cannot read " + path);
    ImageU8 img(bgr.rows, bgr.cols);
    for (int y = 0; y < bgr.rows; ++y) {
        const uint8_t* row = bgr.ptr<uint8_t>(y);
        uint8_t* dst = img.px(y, 0);
        for (int x = 0; x < bgr.cols; ++x) {
            dst[3 * x + 0] = row[3 * x + 2];
            dst[3 * x + 1] = row[3 * x + 1];
            dst[3 * x + 2] = row[3 * x + 0];
        }
    }
    return img;
}

void write_png_gray(const std::string& path, int height, int width,
                    const std::vector<uint8_t>& gray) {
    check(gray.size() == static_cast<size_t>(height) * width, "write_png_gray: size mismatch");
    cv::Mat m(height, width, CV_8UC1);
    for (int y = 0; y < height; ++y)
        std::copy_n(gray.data() + static_cast<size_t>(y) * width, width, m.ptr<uint8_t>(y));
    check(cv::imwrite(path, m, kPngParams), "write_png_gray: failed to write " + path);
}

std::vector<uint8_t> read_png_gray(const std::string& path, int& height, int& width) {
    cv::Mat m = cv::imread(path, cv::IMREAD_GRAYSCALE);
    check(!m.empty(), "read_png_gray: cannot read " + path);
    height = m.rows;
    width = m.cols;
    std::vector<uint8_t> gray(static_cast<size_t>(m.rows) * m.cols);
    for (int y = 0; y < m.rows; ++y)
        std::copy_n(m.ptr<uint8_t>(y), m.cols, gray.data() + static_cast<size_t>(y) * m.cols);
    return gray;
}

} // namespace cugr
