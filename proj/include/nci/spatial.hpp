#ifndef NCI_SPATIAL_HPP
#define NCI_SPATIAL_HPP

// Spatial-manipulation flagging: pixels that are well exposed in the frame
// but show no response in the code image are suspicious. Dark pixels,
// saturated pixels, and pixels with low transient weight are inconclusive
// rather than flagged.

#include <cstdint>
#include <vector>

#include "nci/decode.hpp"
#include "nci/types.hpp"

namespace nci {

struct ManipulationMask {
    Image score_map;                 // H x W in [0, 1]
    std::vector<std::uint8_t> mask;  // H*W, 1 = flagged; mask = score > threshold
    double bright_thresh = 0.25;
    double code_floor = 0.0;
    double min_weight = 0.5;
};

// Rec. 601 luma for 3-channel images, the value itself for 1-channel.
double pixel_luminance(const Image& im, int y, int x);

// score(x) = luminance(frame) where every channel of the code image is below
// code_floor in magnitude and the pixel is conclusive; mask = score >
// bright_thresh. code_floor must be supplied (see default_code_floor).
ManipulationMask manipulation_mask(const Image& frame, const CodeImage& code_image,
                                   double bright_thresh, double code_floor,
                                   double min_weight = 0.5);

// 3x the predicted code-image noise std (a + b*sqrt(L)) / (sqrt(M*w)*code_rms):
// the default "dark in the code image" floor.
double default_code_floor(double a, double b, double mean_brightness, double code_rms, int w,
                          int M);

// Horizontal montage: frame, each code image min/max-normalized, then the
// score map with flagged pixels forced to full red. All panels share the
// frame's pixel dimensions; output is 3-channel.
Image side_by_side_export(const Image& frame, const std::vector<CodeImage>& code_images,
                          const ManipulationMask& mask);

}  // namespace nci

#endif
