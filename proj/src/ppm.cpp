#include "cobench/ppm.hpp"

#include "cobench/error.hpp"

#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>
#include <thread>

namespace cobench {

namespace {

std::uint8_t quantize(float v) {
    const float c = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::size_t pos() const { return pos_; }

    void skip_space_and_comments() {
        while (pos_ < bytes_.size()) {
            if (bytes_[pos_] == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
            } else if (std::isspace(bytes_[pos_])) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long read_uint(const char* what) {
        skip_space_and_comments();
        const std::size_t start = pos_;
        long value = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000) throw ParseError(std::string("ppm: ") + what + " is too large", start);
            ++pos_;
        }
        if (pos_ == start) throw ParseError(std::string("ppm: expected ") + what, start);
        return value;
    }

    void expect_single_whitespace() {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
            throw ParseError("ppm: expected whitespace before pixel data", pos_);
        ++pos_;
    }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

} // namespace

std::vector<std::uint8_t> encode_ppm(const Image& image) {
    if (image.empty()) throw ValidationError("ppm: cannot encode an empty image");
    const std::string header =
        "P6\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(header.size() + static_cast<std::size_t>(image.height()) * image.width() * 3);
    for (int y = 0; y < image.height(); ++y) {
        for (int x = 0; x < image.width(); ++x) {
            for (int c = 0; c < 3; ++c) {
                const int src = image.channels() == 3 ? c : 0;
                out.push_back(quantize(image.at(y, x, src)));
            }
        }
    }
    return out;
}

Image decode_ppm(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw ParseError("ppm: missing P6 magic", 0);
    struct {
        std::size_t width, height, maxval;
    } h{};
    HeaderReader body(bytes.subspan(2));
    h.width = static_cast<std::size_t>(body.read_uint("width"));
    h.height = static_cast<std::size_t>(body.read_uint("height"));
    h.maxval = static_cast<std::size_t>(body.read_uint("maxval"));
    if (h.width == 0 || h.height == 0) throw ParseError("ppm: zero image dimension", 2 + body.pos());
    if (h.maxval == 0 || h.maxval > 255)
        throw ParseError("ppm: unsupported maxval " + std::to_string(h.maxval), 2 + body.pos());
    body.expect_single_whitespace();
    const std::size_t data_start = 2 + body.pos();
    const std::size_t expected = h.width * h.height * 3;
    if (bytes.size() - data_start < expected)
        throw ParseError("ppm: truncated pixel data, expected " + std::to_string(expected) + " bytes, found " +
                             std::to_string(bytes.size() - data_start),
                         bytes.size());
    std::vector<float> data(expected);
    const float scale = 1.0f / static_cast<float>(h.maxval);
    for (std::size_t i = 0; i < expected; ++i) {
        const std::uint8_t b = bytes[data_start + i];
        if (b > h.maxval) throw ParseError("ppm: sample exceeds maxval", data_start + i);
        data[i] = h.maxval == 255 ? static_cast<float>(b) / 255.0f : static_cast<float>(b) * scale;
    }
    return Image(static_cast<int>(h.height), static_cast<int>(h.width), 3, std::move(data));
}

void write_ppm(const Image& image, const std::filesystem::path& path) { write_file_atomic(path, encode_ppm(image)); }

Image read_ppm(const std::filesystem::path& path) { return decode_ppm(read_file_bytes(path)); }

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    static std::atomic<unsigned long> counter{0};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000) + "_" +
           std::to_string(counter++);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

} // namespace cobench
