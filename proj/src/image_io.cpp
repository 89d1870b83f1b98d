#include "triagenet/image_io.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "triagenet/errors.hpp"

namespace triagenet::data {

ImageTensor resize_bilinear(const ImageTensor& src, int out_height,
                            int out_width) {
    if (out_height <= 0 || out_width <= 0)
        throw ConfigError("resize target must be positive");
    if (src.height == out_height && src.width == out_width) return src;

    ImageTensor dst(out_height, out_width, src.channels);
    const float scale_y = static_cast<float>(src.height) / out_height;
    const float scale_x = static_cast<float>(src.width) / out_width;
    for (int oy = 0; oy < out_height; ++oy) {
        // Map destination pixel centers onto source pixel centers.
        const float sy = (oy + 0.5f) * scale_y - 0.5f;
        const int y0 = std::clamp(static_cast<int>(std::floor(sy)), 0,
                                  src.height - 1);
        const int y1 = std::min(y0 + 1, src.height - 1);
        const float fy = std::clamp(sy - y0, 0.0f, 1.0f);
        for (int ox = 0; ox < out_width; ++ox) {
            const float sx = (ox + 0.5f) * scale_x - 0.5f;
            const int x0 = std::clamp(static_cast<int>(std::floor(sx)), 0,
                                      src.width - 1);
            const int x1 = std::min(x0 + 1, src.width - 1);
            const float fx = std::clamp(sx - x0, 0.0f, 1.0f);
            for (int c = 0; c < src.channels; ++c) {
                const float top = src.at(y0, x0, c) * (1.0f - fx) +
                                  src.at(y0, x1, c) * fx;
                const float bottom = src.at(y1, x0, c) * (1.0f - fx) +
                                     src.at(y1, x1, c) * fx;
                dst.at(oy, ox, c) = top * (1.0f - fy) + bottom * fy;
            }
        }
    }
    return dst;
}

ImageTensor load_image_file(const std::filesystem::path& path, int height,
                            int width) {
    cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty())
        throw DataError("cannot decode image: " + path.string());

    ImageTensor full(bgr.rows, bgr.cols, 3);
    for (int y = 0; y < bgr.rows; ++y) {
        const auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < bgr.cols; ++x) {
            full.at(y, x, 0) = row[x][2] / 255.0f;
            full.at(y, x, 1) = row[x][1] / 255.0f;
            full.at(y, x, 2) = row[x][0] / 255.0f;
        }
    }
    return resize_bilinear(full, height, width);
}

ImageTensor load_image(const ManifestEntry& entry, int height, int width) {
    if (entry.image_path.empty())
        throw DataError("manifest entry \"" + entry.image_id +
                        "\" has no resolved image path");
    return load_image_file(entry.image_path, height, width);
}

void write_png(const std::filesystem::path& path, const ImageTensor& image) {
    if (image.channels != 3)
        throw DataError("png writer expects 3 channels, got " +
                        std::to_string(image.channels));
    cv::Mat bgr(image.height, image.width, CV_8UC3);
    for (int y = 0; y < image.height; ++y) {
        auto* row = bgr.ptr<cv::Vec3b>(y);
        for (int x = 0; x < image.width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const float v = std::clamp(image.at(y, x, c), 0.0f, 1.0f);
                row[x][2 - c] = static_cast<unsigned char>(
                    std::lround(v * 255.0f));
            }
        }
    }
    if (!cv::imwrite(path.string(), bgr))
        throw DataError("cannot write image: " + path.string());
}

}  // namespace triagenet::data
