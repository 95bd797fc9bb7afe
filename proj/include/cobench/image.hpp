#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cobench {

// Row-major H x W x C float image. Public operations keep every value in [0, 1].
class Image {
public:
    Image() = default;
    Image(int height, int width, int channels, float fill = 0.0f);
    Image(int height, int width, int channels, std::vector<float> data);

    int height() const noexcept { return height_; }
    int width() const noexcept { return width_; }
    int channels() const noexcept { return channels_; }
    int min_side() const noexcept { return height_ < width_ ? height_ : width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t index(int y, int x, int c) const noexcept {
        return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
    }
    float& at(int y, int x, int c) noexcept { return data_[index(y, x, c)]; }
    float at(int y, int x, int c) const noexcept { return data_[index(y, x, c)]; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    bool same_shape(const Image& other) const noexcept {
        return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
    }

    friend bool operator==(const Image&, const Image&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

Image clamp01(Image image);

// True when every value lies in [0, 1] (NaN fails).
bool in_unit_range(const Image& image) noexcept;

} // namespace cobench
