#include "nci/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace nci {

double pixel_luminance(const Image& im, int y, int x) {
    if (im.c == 3)
        return 0.299 * im.at(y, x, 0) + 0.587 * im.at(y, x, 1) + 0.114 * im.at(y, x, 2);
    double s = 0.0;
    for (int ch = 0; ch < im.c; ++ch) s += im.at(y, x, ch);
    return s / im.c;
}

double default_code_floor(double a, double b, double mean_brightness, double code_rms, int w,
                          int M) {
    if (!(code_rms > 0.0) || w < 1 || M < 1)
        throw std::invalid_argument("code_floor: code_rms, w, M must be positive");
    const double sigma_n = a + b * std::sqrt(std::max(mean_brightness, 0.0));
    return 3.0 * sigma_n / (std::sqrt(double(M) * w) * code_rms);
}

ManipulationMask manipulation_mask(const Image& frame, const CodeImage& ci, double bright_thresh,
                                   double code_floor, double min_weight) {
    const Image& cv = ci.values;
    if (frame.h != cv.h || frame.w != cv.w || frame.c != cv.c)
        throw std::invalid_argument("mask: frame and code image dimensions differ");
    if (code_floor < 0.0) throw std::invalid_argument("mask: code_floor must be >= 0");

    ManipulationMask out;
    out.bright_thresh = bright_thresh;
    out.code_floor = code_floor;
    out.min_weight = min_weight;
    out.score_map = Image(frame.h, frame.w, 1);
    out.mask.assign(static_cast<std::size_t>(frame.h) * frame.w, 0);

#pragma omp parallel for schedule(static)
    for (int y = 0; y < frame.h; ++y) {
        for (int x = 0; x < frame.w; ++x) {
            bool conclusive = true;
            bool dark_in_code = true;
            double wmean = 0.0;
            for (int ch = 0; ch < frame.c; ++ch) {
                const std::size_t i =
                    (static_cast<std::size_t>(y) * frame.w + x) * frame.c + ch;
                if (frame.data[i] >= kSaturation) conclusive = false;
                if (!ci.sample_valid(i)) conclusive = false;
                if (std::abs(cv.data[i]) >= code_floor) dark_in_code = false;
                if (!ci.weight_map.data.empty()) wmean += ci.weight_map.data[i];
            }
            if (!ci.weight_map.data.empty() && wmean / frame.c < min_weight) conclusive = false;

            const double lum = std::clamp(pixel_luminance(frame, y, x), 0.0, 1.0);
            const double score = conclusive && dark_in_code ? lum : 0.0;
            out.score_map.at(y, x, 0) = static_cast<float>(score);
            out.mask[static_cast<std::size_t>(y) * frame.w + x] =
                score > bright_thresh ? 1 : 0;
        }
    }
    return out;
}

namespace {

// Min/max normalization over valid samples, invalid rendered black.
Image normalized_panel(const CodeImage& ci) {
    const Image& v = ci.values;
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!ci.sample_valid(i)) continue;
        if (first) lo = hi = v.data[i], first = false;
        else lo = std::min<double>(lo, v.data[i]), hi = std::max<double>(hi, v.data[i]);
    }
    const double span = hi > lo ? hi - lo : 1.0;
    Image out(v.h, v.w, 3);
    for (int y = 0; y < v.h; ++y)
        for (int x = 0; x < v.w; ++x)
            for (int ch = 0; ch < 3; ++ch) {
                const int src = v.c == 3 ? ch : 0;
                const std::size_t i =
                    (static_cast<std::size_t>(y) * v.w + x) * v.c + src;
                out.at(y, x, ch) = ci.sample_valid(i)
                                       ? static_cast<float>((v.data[i] - lo) / span)
                                       : 0.0f;
            }
    return out;
}

Image to_rgb(const Image& im) {
    Image out(im.h, im.w, 3);
    for (int y = 0; y < im.h; ++y)
        for (int x = 0; x < im.w; ++x)
            for (int ch = 0; ch < 3; ++ch)
                out.at(y, x, ch) = im.at(y, x, im.c == 3 ? ch : 0);
    return out;
}

}  // namespace

Image side_by_side_export(const Image& frame, const std::vector<CodeImage>& code_images,
                          const ManipulationMask& mask) {
    for (const CodeImage& ci : code_images)
        if (ci.values.h != frame.h || ci.values.w != frame.w)
            throw std::invalid_argument("montage: code image dimensions differ from frame");
    if (mask.score_map.h != frame.h || mask.score_map.w != frame.w)
        throw std::invalid_argument("montage: mask dimensions differ from frame");

    const int panels = 2 + static_cast<int>(code_images.size());
    Image out(frame.h, frame.w * panels, 3);

    auto blit = [&](const Image& src, int panel) {
        for (int y = 0; y < frame.h; ++y)
            for (int x = 0; x < frame.w; ++x)
                for (int ch = 0; ch < 3; ++ch)
                    out.at(y, panel * frame.w + x, ch) = src.at(y, x, ch);
    };

    blit(to_rgb(frame), 0);
    for (std::size_t i = 0; i < code_images.size(); ++i)
        blit(normalized_panel(code_images[i]), 1 + static_cast<int>(i));

    Image score_panel = to_rgb(mask.score_map);
    for (int y = 0; y < frame.h; ++y)
        for (int x = 0; x < frame.w; ++x)
            if (mask.mask[static_cast<std::size_t>(y) * frame.w + x]) {
                score_panel.at(y, x, 0) = 1.0f;
                score_panel.at(y, x, 1) = 0.0f;
                score_panel.at(y, x, 2) = 0.0f;
            }
    blit(score_panel, panels - 1);
    return out;
}

}  // namespace nci
