#include "cobench/image.hpp"

#include "cobench/error.hpp"

#include <algorithm>
#include <string>

namespace cobench {

namespace {

void check_shape(int height, int width, int channels) {
    if (height <= 0 || width <= 0)
        throw ValidationError("image dimensions must be positive, got " + std::to_string(height) + "x" +
                              std::to_string(width));
    if (channels != 1 && channels != 3)
        throw ValidationError("image channels must be 1 or 3, got " + std::to_string(channels));
}

} // namespace

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
    check_shape(height, width, channels);
    data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image::Image(int height, int width, int channels, std::vector<float> data)
    : height_(height), width_(width), channels_(channels), data_(std::move(data)) {
    check_shape(height, width, channels);
    if (data_.size() != static_cast<std::size_t>(height) * width * channels)
        throw ValidationError("image data length " + std::to_string(data_.size()) + " does not match " +
                              std::to_string(height) + "x" + std::to_string(width) + "x" + std::to_string(channels));
}

Image clamp01(Image image) {
    for (float& v : image.data()) v = std::min(1.0f, std::max(0.0f, v));
    return image;
}

bool in_unit_range(const Image& image) noexcept {
    return std::all_of(image.data().begin(), image.data().end(), [](float v) { return v >= 0.0f && v <= 1.0f; });
}

} // namespace cobench
