#ifndef NCI_CODEGEN_HPP
#define NCI_CODEGEN_HPP

// Generation, extension and serialization of noise-like illumination code
// signals. Codes are synthesized per segment in the Fourier domain: every
// in-band frequency bin gets one random amplitude and phase, bins are dealt
// to codes in shuffled round-robin blocks, and each code is the inverse
// transform of its own bins. Amplitudes and phases are drawn *before* the
// bins are assigned, and synthesis accumulates on a fixed 2^-40 brightness
// grid in 64-bit integers, so the elementwise sum of all k codes is
// bit-identical no matter how many codes the bandwidth is split across.

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "nci/types.hpp"

namespace nci {

struct CodeSpec {
    double fps = 30.0;
    int segment_len = 128;
    double band_lo = 2.0;   // Hz
    double band_hi = 9.0;   // Hz
    int num_codes = 1;
    std::uint64_t master_seed = 0;
    double amplitude_scale = 0.005;  // relative-brightness gain

    void validate() const;  // throws std::invalid_argument / config_error

    // DFT bin indices whose frequency lies in [band_lo, band_hi].
    std::vector<int> band_bins() const;
    double bin_freq(int bin) const { return bin * fps / segment_len; }
};

struct CodeSignal {
    std::vector<double> samples;  // zero-mean relative brightness per frame
    double fps = 30.0;
    int source_id = 0;
    int seg_begin = 0, seg_end = 0;  // segment coverage [begin, end)
};

// Per-segment audit record: which frequency bin fed which code.
struct SegmentAssignment {
    int segment_index = 0;
    std::vector<std::pair<int, int>> bin_to_code;  // (bin, code id)
};

struct CodeBank {
    CodeSpec spec;
    std::vector<CodeSignal> codes;  // num_codes entries of equal length
    std::vector<SegmentAssignment> assignment_log;

    int num_segments() const {
        return codes.empty() ? 0
                             : static_cast<int>(codes[0].samples.size()) /
                                   spec.segment_len;
    }
    std::int64_t num_frames() const {
        return codes.empty() ? 0 : static_cast<std::int64_t>(codes[0].samples.size());
    }
};

struct CodeSegment {
    std::vector<std::vector<double>> rows;  // num_codes x segment_len
    SegmentAssignment log;
};

// One segment of all k codes. Pure function of (spec, segment_index).
CodeSegment sample_segment(const CodeSpec& spec, int segment_index);

CodeBank make_code_bank(const CodeSpec& spec, int num_segments);

// Samples of one code over the half-open frame interval [t0, t1), generating
// whatever segments are needed on demand. Pure and deterministic.
std::vector<double> code_for_interval(const CodeSpec& spec, std::int64_t t0,
                                      std::int64_t t1, int source_id);
std::vector<double> code_for_interval(const CodeBank& bank, std::int64_t t0,
                                      std::int64_t t1, int source_id);

// Tabulated human flicker-sensitivity stand-in (higher = more visible).
// Monotone over 1-12 Hz, rising toward the 8-9 Hz region; linear between
// knots, clamped outside the table. The table is a documented placeholder,
// not a psychophysical measurement; callers may substitute their own curve.
double flicker_sensitivity(double freq_hz);
double flicker_sensitivity(double freq_hz, const std::vector<std::pair<double, double>>& table);

// Mean code amplitude at a frequency: amplitude_scale / sensitivity(freq).
// freq must lie inside the spec passband.
double flicker_weight(const CodeSpec& spec, double freq_hz);

// Lossless text round trip. Header lines "# key=value" carry the CodeSpec;
// each body row holds one frame of all k codes, comma separated.
void write_code_csv(const CodeBank& bank, std::ostream& out);
CodeBank read_code_csv(std::istream& in);

}  // namespace nci

#endif
