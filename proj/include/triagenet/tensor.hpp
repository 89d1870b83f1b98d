#pragma once

#include <cstddef>
#include <vector>

namespace triagenet {

// Dense H x W x C array, row-major with the channel index innermost.
template <typename T>
struct Tensor3 {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<T> data;

    Tensor3() = default;
    Tensor3(int h, int w, int c)
        : height(h), width(w), channels(c),
          data(static_cast<std::size_t>(h) * w * c, T{}) {}

    T& at(int y, int x, int c) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    const T& at(int y, int x, int c) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    std::size_t size() const { return data.size(); }

    bool same_shape(const Tensor3& other) const {
        return height == other.height && width == other.width &&
               channels == other.channels;
    }
};

// Network input: RGB pixels normalized to [0, 1].
using ImageTensor = Tensor3<float>;

template <typename T>
Tensor3<T> convert(const ImageTensor& img) {
    Tensor3<T> out(img.height, img.width, img.channels);
    for (std::size_t i = 0; i < img.data.size(); ++i)
        out.data[i] = static_cast<T>(img.data[i]);
    return out;
}

}  // namespace triagenet
