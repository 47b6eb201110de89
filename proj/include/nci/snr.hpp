#ifndef NCI_SNR_HPP
#define NCI_SNR_HPP

// Decode-SNR model: the code-image estimate averages M*w samples whose noise
// std is a + b*sqrt(L), so SNR_dB = 20*log10(sqrt(M*w) * code_rms_r / (a + b*sqrt(L))).

#include <iosfwd>
#include <vector>

#include "nci/decode.hpp"
#include "nci/types.hpp"

namespace nci {

struct SnrModel {
    double a = 0.0;  // read-noise std, brightness units
    double b = 0.0;  // photon-noise coefficient, brightness^(1/2) units

    void validate() const;  // a, b >= 0
};

// Reported instead of infinity when the measured or predicted noise is zero.
inline constexpr double kSnrMaxDb = 300.0;

// code_rms_r: rms of the code times the pixel's transfer coefficient, in
// brightness units. Returns kSnrMaxDb when a = b = 0.
double predict_snr_db(const SnrModel& model, double code_rms_r, double L, int w, int M);

// Empirical SNR from >= 2 independent-noise decodes: per pixel, signal = |mean
// across trials|, noise = std across trials; per-pixel dB aggregated by median
// over pixels valid in every trial.
double measure_snr_db(const std::vector<CodeImage>& trials);

// Empirical SNR against ground truth: noise = std of (estimate - truth) pooled
// over valid pixels, signal = per-pixel |estimate|; median of per-pixel dB.
double measure_snr_db(const CodeImage& estimate, const Image& truth);

// CSV of predictions over a parameter grid; one row per (L, code_rms, w, M).
void write_prediction_table_csv(const SnrModel& model, const std::vector<double>& L_values,
                                const std::vector<double>& rms_values,
                                const std::vector<int>& w_values,
                                const std::vector<int>& M_values, std::ostream& out);

}  // namespace nci

#endif
