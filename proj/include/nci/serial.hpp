#ifndef NCI_SERIAL_HPP
#define NCI_SERIAL_HPP

// Single-threaded reference implementations of the parallel kernels. The
// render, bilateral, and code-image references must match the parallel
// versions bit-exactly (same per-item arithmetic, no scheduling influence);
// the direct correlation reference bounds the FFT path within 1e-6.

#include <cstdint>
#include <vector>

#include "nci/decode.hpp"
#include "nci/simulate.hpp"
#include "nci/temporal.hpp"
#include "nci/types.hpp"

namespace nci::serial {

FrameSequence render(const SceneModel& scene, const CodeSpec& spec, const NoiseModel& noise,
                     std::int64_t t0, int t_count);

FrameSequence bilateral_residual(const FrameSequence& video, double sigma_r = 0.05,
                                 int radius = 15);

CodeImage code_image(const FrameSequence& video, const std::vector<double>& code,
                     const AnalysisWindow& win);

// Direct O(n*m) normalized cross-correlation (window sums computed per
// offset, no FFT, no prefix sums).
std::vector<double> ncc_scan_direct(const std::vector<double>& trace,
                                    const std::vector<double>& code, std::int64_t lo,
                                    std::int64_t hi);

AlignmentMatrix alignment_matrix(const std::vector<double>& trace,
                                 const std::vector<double>& code, int col_window, int col_hop,
                                 std::int64_t offset_range);

}  // namespace nci::serial

#endif
