#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace safeaug {

/// Dense H x W x C image, row-major, channel-interleaved.
///
/// Pixels are stored as floats. Dataset loaders convert 8-bit sources to the
/// unit interval (x / 255); the transform engine operates in that space and
/// quantises internally where a transform is defined on the 8-bit scale
/// (CLAHE, GaussNoise variance).
class Image {
public:
    Image() = default;

    Image(int height, int width, int channels, float fill = 0.0f)
        : height_(height), width_(width), channels_(channels),
          data_(static_cast<std::size_t>(height) * width * channels, fill) {
        if (height < 1 || width < 1 || (channels != 1 && channels != 3)) {
            throw std::invalid_argument("Image: bad shape " + std::to_string(height) + "x" +
                                        std::to_string(width) + "x" + std::to_string(channels));
        }
    }

    Image(int height, int width, int channels, std::vector<float> data)
        : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
        if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
            throw std::invalid_argument("Image: data size does not match shape");
        }
    }

    static Image from_u8(int height, int width, int channels, const std::uint8_t* bytes) {
        Image img(height, width, channels);
        const std::size_t n = img.size();
        for (std::size_t i = 0; i < n; ++i) img.data_[i] = static_cast<float>(bytes[i]) / 255.0f;
        return img;
    }

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float& at(int y, int x, int c) {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    float at(int y, int x, int c) const {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    const std::vector<float>& data() const { return data_; }
    std::vector<float>& data() { return data_; }

    float mean() const {
        if (data_.empty()) return 0.0f;
        double s = 0.0;
        for (float v : data_) s += v;
        return static_cast<float>(s / static_cast<double>(data_.size()));
    }

    void clamp(float lo = 0.0f, float hi = 1.0f) {
        for (float& v : data_) v = v < lo ? lo : (v > hi ? hi : v);
    }

    bool same_shape(const Image& other) const {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    bool operator==(const Image& other) const {
        return same_shape(other) && data_ == other.data_;
    }

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

struct Shape3 {
    int height = 0;
    int width = 0;
    int channels = 0;
    bool operator==(const Shape3&) const = default;
};

}  // namespace safeaug
