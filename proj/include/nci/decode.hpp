#ifndef NCI_DECODE_HPP
#define NCI_DECODE_HPP

// Code-image recovery: per pixel and channel, the transfer coefficient to a
// coded source is estimated as the least-squares fit of the observed trace
// against the (mean-centered) code over an analysis window, optionally on
// temporal-bilateral residuals and with per-sample transient weights.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "nci/types.hpp"

namespace nci {

struct AnalysisWindow {
    std::int64_t t_center = 0;  // frame index in the video
    int w = 450;                // window length, clamped into the video
    int downsample = 1;         // per-axis spatial box factor (2 -> M = 4)

    void validate() const;  // w >= 2, downsample >= 1
};

// Concrete frame range [t0, t0 + len) after clamping a window into a video.
struct ResolvedWindow {
    std::int64_t t0 = 0;
    int len = 0;
};
ResolvedWindow resolve_window(const AnalysisWindow& win, int video_frames);

struct CodeImage {
    Image values;                      // estimates, proportional to alpha_i(x)
    Image weight_map;                  // mean transient weights; empty if unweighted
    std::vector<std::uint8_t> valid;   // per sample; empty = all valid
    int source_id = 0;
    std::int64_t window_t0 = 0;
    int window_len = 0;
    bool scale_ambiguous = true;  // values known only up to a global factor

    bool sample_valid(std::size_t i) const { return valid.empty() || valid[i]; }
};

// Residual y - B(y) of a 1-D temporal bilateral filter per pixel trace;
// Gaussian falloff along time with std radius/2, range std sigma_r. Large
// transients are tracked by B and removed; sub-sigma_r code fluctuations pass
// through. A constant trace yields an exactly zero residual.
FrameSequence bilateral_residual(const FrameSequence& video, double sigma_r = 0.05,
                                 int radius = 15);

// Whole-frame translational stabilization against frame 0 via phase
// correlation of the luminance; returns the aligned video (circular shifts)
// and the per-frame (dy, dx) shifts that were removed. Pixels wrapped across
// a border carry no scene content and should be ignored downstream.
std::pair<FrameSequence, std::vector<std::pair<int, int>>> stabilize_translation(
    const FrameSequence& video);

// Least-squares code image over the window: value = c~' y / c~' c~ with
// c~ = c - mean(c). code must have resolve_window(win, video.t).len samples
// aligned so code[j] drives video frame t0 + j.
CodeImage code_image(const FrameSequence& video, const std::vector<double>& code,
                     const AnalysisWindow& win);

// Transient-weighted variant: per sample g = exp(-((y - y_anchor)^2) / (2 sigma^2))
// with the window's center frame as anchor; saturated samples get g = 0. The
// estimate is the g-weighted least-squares fit, and weight_map records the
// per-pixel mean of g. weight_source supplies the traces used for g (pass the
// raw video when estimating on bilateral residuals).
CodeImage transient_filtered_code_image(const FrameSequence& video,
                                        const FrameSequence& weight_source,
                                        const std::vector<double>& code,
                                        const AnalysisWindow& win, double sigma = 0.05);
CodeImage transient_filtered_code_image(const FrameSequence& video,
                                        const std::vector<double>& code,
                                        const AnalysisWindow& win, double sigma = 0.05);

// Box-mean spatial downsample by a per-axis factor; trailing remainder rows
// and columns are dropped.
FrameSequence spatial_downsample(const FrameSequence& video, int factor);
Image spatial_downsample(const Image& image, int factor);

// Sample value at or above this level counts as saturated.
inline constexpr double kSaturation = 0.999;

// 16-bit NetPBM export (PGM for 1 channel, PPM for 3) plus a "<base>.txt"
// sidecar recording window, source id, the min/max used for scaling, and the
// invalid-sample count. Invalid samples export as 0.
void export_code_image(const CodeImage& ci, const std::string& path_base);

}  // namespace nci

#endif
