#ifndef NCI_TEMPORAL_HPP
#define NCI_TEMPORAL_HPP

// Temporal registration and tamper detection: matched filtering of the
// spatial-average trace against the code, windowed alignment matrices whose
// offset tracks expose cuts and reorders, a factored frequency-domain speed
// scan, and local-SNR patch weighting for scenes where the global average
// trace is too noisy.

#include <cstdint>
#include <utility>
#include <vector>

#include "nci/types.hpp"

namespace nci {

inline constexpr double kConfidenceThreshold = 1.5;  // peak / second-peak
inline constexpr int kPeakExclusion = 3;             // frames around the peak

struct RegisterResult {
    std::int64_t offset = 0;
    double peak = 0.0;        // NCC at the best offset
    double confidence = 0.0;  // peak / second peak outside the exclusion zone
    bool conclusive = false;
};

struct AlignmentMatrix {
    std::vector<double> scores;  // row-major (offset, column)
    std::int64_t offset_lo = 0;
    int num_offsets = 0;
    int num_cols = 0;
    int col_window = 90;
    int col_hop = 15;

    double score(int o, int j) const {
        return scores[static_cast<std::size_t>(o) * num_cols + static_cast<std::size_t>(j)];
    }
};

struct AlignmentCurve {
    std::vector<std::int64_t> best_offset;  // per column
    std::vector<double> confidence;
    std::vector<std::uint8_t> confident;
    std::vector<std::pair<int, std::int64_t>> discontinuities;  // (column, offset jump)
    int col_hop = 15;
};

struct SpeedScanResult {
    double rho = 1.0;
    std::int64_t offset = 0;  // in code frames, at the detected rho
    double confidence = 0.0;
    std::vector<std::pair<double, double>> score_curve;  // (rho, spectral score)
};

struct PatchRegisterResult {
    RegisterResult reg;
    Image weight_map;  // per-tile soft-max weights
};

// Per-frame spatial mean over all pixels and channels.
std::vector<double> spatial_mean_trace(const FrameSequence& video);

// Normalized cross-correlation of a mean-centered trace against code windows
// at offsets [lo, hi]: ncc[o - lo] = y~' c_o / (|y~| |c_o - mean(c_o)|).
// FFT-based; matches the direct sum within 1e-6.
std::vector<double> ncc_scan(const std::vector<double>& trace, const std::vector<double>& code,
                             std::int64_t lo, std::int64_t hi);

// Peak pick with peak/second-peak confidence (second peak searched outside
// +-kPeakExclusion of the best offset).
RegisterResult pick_peak(const std::vector<double>& ncc, std::int64_t lo,
                         double threshold = kConfidenceThreshold);

RegisterResult global_register(const std::vector<double>& trace, const std::vector<double>& code,
                               std::int64_t lo, std::int64_t hi,
                               double threshold = kConfidenceThreshold);
RegisterResult global_register(const FrameSequence& video, const std::vector<double>& code,
                               std::int64_t lo, std::int64_t hi,
                               double threshold = kConfidenceThreshold);

// Column j covers video frames [j*col_hop, j*col_hop + col_window); scores
// are NCC against code offsets [0, offset_range].
AlignmentMatrix alignment_matrix(const FrameSequence& video, const std::vector<double>& code,
                                 int col_window = 90, int col_hop = 15,
                                 std::int64_t offset_range = -1);
AlignmentMatrix alignment_matrix(const std::vector<double>& trace,
                                 const std::vector<double>& code, int col_window, int col_hop,
                                 std::int64_t offset_range);

// Per-column argmax track. A discontinuity is a jump of the diagonal residual
// (best_offset - column position) larger than jump_threshold between
// consecutive confident columns.
AlignmentCurve extract_alignment_curve(const AlignmentMatrix& m, double jump_threshold = 2.0,
                                       double confidence_floor = 1.2);

// Geometric rho grid [rho_lo, rho_hi] with ratio step; per rho the code is
// linearly resampled and magnitude spectra are compared; the best rho is then
// matched-filtered in time for the offset.
SpeedScanResult speed_scan(const std::vector<double>& trace, const std::vector<double>& code,
                           double rho_lo = 0.5, double rho_hi = 2.0, double rho_step = 1.01);
SpeedScanResult speed_scan(const FrameSequence& video, const std::vector<double>& code,
                           double rho_lo = 0.5, double rho_hi = 2.0, double rho_step = 1.01);

// Per-tile registration with soft-max confidence weighting (weight for tile i
// is exp(beta*conf_i) normalized); the returned score is the weighted sum of
// tile NCC curves, so one high-SNR tile can carry an otherwise washed-out
// frame. Edge tiles may be smaller when patch_size does not divide the frame.
PatchRegisterResult patch_weighted_register(const FrameSequence& video,
                                            const std::vector<double>& code, int patch_size,
                                            std::int64_t lo, std::int64_t hi,
                                            double threshold = kConfidenceThreshold,
                                            double beta = 4.0);

// Linear-interpolation resample of code at positions start + j*rho.
std::vector<double> resample_code(const std::vector<double>& code, double rho, std::size_t count,
                                  double start = 0.0);

}  // namespace nci

#endif
