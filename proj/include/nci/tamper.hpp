#ifndef NCI_TAMPER_HPP
#define NCI_TAMPER_HPP

// Ground-truth manipulations: temporal cuts (optionally hidden by a short
// cross-fade), segment reordering, linear-interpolation retiming, and spatial
// composites. Every operation appends a record to an EditLog; replaying the
// log on the original reproduces the manipulated video bit-exactly.

#include <cstdint>
#include <iosfwd>
#include <utility>
#include <vector>

#include "nci/types.hpp"

namespace nci {

struct Edit {
    enum class Kind { Cut, Splice, Retime, Composite };
    Kind kind = Kind::Cut;

    // cut
    std::int64_t t_start = 0;
    std::int64_t n_removed = 0;
    int crossfade = 0;  // frames blended after the seam (0 = hard cut)

    // splice: concatenation order of half-open source ranges
    std::vector<std::pair<std::int64_t, std::int64_t>> segments;

    // retime: resample [r0, r1) at source positions r0 + j*rho
    double rho = 1.0;
    std::int64_t r0 = 0, r1 = 0;

    // composite: replace rect (y, x, h, w) over frames [r0, r1)
    int rect_y = 0, rect_x = 0, rect_h = 0, rect_w = 0;
    FrameSequence patch;  // t = 1 for a static patch, else one frame per step
};

struct EditLog {
    std::vector<Edit> edits;
};

// Removes frames [t_start, t_start + n_removed). With crossfade = n > 0, the
// first n surviving frames after the seam become convex blends between the
// last pre-cut frame and their own content (a warp-cut stand-in).
FrameSequence cut(const FrameSequence& video, std::int64_t t_start, std::int64_t n_removed,
                  int crossfade, EditLog& log);

// Concatenates the given source ranges in order.
FrameSequence splice(const FrameSequence& video,
                     const std::vector<std::pair<std::int64_t, std::int64_t>>& segment_order,
                     EditLog& log);

// Linear-interpolation temporal resampling of [r0, r1) (whole video when
// r1 <= r0) at speed factor rho: the range's n frames become round(n / rho)
// frames sampled at source positions r0 + j*rho, clamped at the range end.
FrameSequence retime(const FrameSequence& video, double rho, std::int64_t r0, std::int64_t r1,
                     EditLog& log);

// Replaces rect pixels over frames [t0, t1) with patch content; patch is a
// single frame (applied statically) or one frame per step, at rect size.
FrameSequence composite(const FrameSequence& video, const FrameSequence& patch, int rect_y,
                        int rect_x, std::int64_t t0, std::int64_t t1, EditLog& log);

// Replays a log in order; bit-exact equal to the chained operations.
FrameSequence apply_edits(const FrameSequence& original, const EditLog& log);

// Line-oriented text form; patch payloads are hex-encoded so the round trip
// is exact.
void write_edit_log(const EditLog& log, std::ostream& out);
EditLog read_edit_log(std::istream& in);

}  // namespace nci

#endif
