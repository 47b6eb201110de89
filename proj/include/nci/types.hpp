#ifndef NCI_TYPES_HPP
#define NCI_TYPES_HPP

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace nci {

// Configuration that cannot produce the requested output (e.g. fewer in-band
// frequency bins than codes). Distinct from invalid call arguments.
class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input stream. Carries the byte offset (and line, for text
// formats) where parsing failed; both are already part of what().
class parse_error : public std::runtime_error {
public:
    parse_error(const std::string& msg, std::size_t byte_offset, long line = -1)
        : std::runtime_error(format(msg, byte_offset, line)),
          byte_offset(byte_offset),
          line(line) {}

    std::size_t byte_offset = 0;
    long line = -1;

private:
    static std::string format(const std::string& msg, std::size_t off, long line) {
        std::string s = msg + " (byte " + std::to_string(off);
        if (line >= 0) s += ", line " + std::to_string(line);
        return s + ")";
    }
};

// H x W x C float raster, row-major, channel-interleaved. Values are relative
// brightness; [0,1] for scene inputs, unbounded for derived maps.
struct Image {
    int h = 0, w = 0, c = 0;
    std::vector<float> data;

    Image() = default;
    Image(int h_, int w_, int c_, float fill = 0.0f)
        : h(h_), w(w_), c(c_), data(static_cast<std::size_t>(h_) * w_ * c_, fill) {}

    float& at(int y, int x, int ch) {
        return data[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
    float at(int y, int x, int ch) const {
        return data[(static_cast<std::size_t>(y) * w + x) * c + ch];
    }
    std::size_t size() const { return data.size(); }
    bool same_shape(const Image& o) const { return h == o.h && w == o.w && c == o.c; }
};

// T x H x W x C float tensor with a frame rate; the observation y(x, t).
struct FrameSequence {
    int t = 0, h = 0, w = 0, c = 0;
    double fps = 30.0;
    std::vector<float> data;
    std::string provenance;

    FrameSequence() = default;
    FrameSequence(int t_, int h_, int w_, int c_, double fps_ = 30.0)
        : t(t_), h(h_), w(w_), c(c_), fps(fps_),
          data(static_cast<std::size_t>(t_) * h_ * w_ * c_, 0.0f) {}

    std::size_t frame_stride() const { return static_cast<std::size_t>(h) * w * c; }

    float& at(int ti, int y, int x, int ch) {
        return data[frame_stride() * ti + (static_cast<std::size_t>(y) * w + x) * c + ch];
    }
    float at(int ti, int y, int x, int ch) const {
        return data[frame_stride() * ti + (static_cast<std::size_t>(y) * w + x) * c + ch];
    }

    float* frame(int ti) { return data.data() + frame_stride() * ti; }
    const float* frame(int ti) const { return data.data() + frame_stride() * ti; }

    Image frame_image(int ti) const {
        Image im(h, w, c);
        const float* src = frame(ti);
        std::copy(src, src + frame_stride(), im.data.begin());
        return im;
    }
};

// FNV-1a 64-bit; used for manifest hashes and the selftest digest.
inline std::uint64_t fnv1a(const void* bytes, std::size_t n,
                           std::uint64_t h = 0xCBF29CE484222325ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001B3ull;
    }
    return h;
}

}  // namespace nci

#endif
