#ifndef NCI_IO_FORMATS_HPP
#define NCI_IO_FORMATS_HPP

// On-disk formats: YUV4MPEG2 ingest, the FSEQ float-tensor container, and
// NetPBM emit/ingest for images and masks. Parsers reject trailing garbage
// and report byte offsets; writers are deterministic.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nci/types.hpp"

namespace nci {

// --- YUV4MPEG2 -------------------------------------------------------------
// Accepts C444 and C420 (C420, C420jpeg, C420mpeg2, C420paldv are all read
// with the same bilinear chroma upsampling). Pixels are converted to RGB with
// the BT.601 full-range matrix:
//   R = Y/255 + 1.402*(Cr-128)/255
//   G = Y/255 - 0.344136*(Cb-128)/255 - 0.714136*(Cr-128)/255
//   B = Y/255 + 1.772*(Cb-128)/255
FrameSequence read_y4m(std::istream& in);

// --- FSEQ ------------------------------------------------------------------
// Little-endian container: magic "FSEQ", u32 version (=1), u32 T,H,W,C, then
// T*H*W*C float32 values in (t, h, w, c) row-major order.
inline constexpr std::uint32_t kFseqVersion = 1;

void write_fseq(const FrameSequence& seq, std::ostream& out);
FrameSequence read_fseq(std::istream& in);

// --- NetPBM ----------------------------------------------------------------
// P5 for single-channel images, P6 for 3-channel; bit_depth 8 or 16 selects
// maxval 255 or 65535 (16-bit samples are big-endian). Values are clamped to
// [0, 1] and rounded to the nearest level.
void write_netpbm(const Image& im, int bit_depth, std::ostream& out);
Image read_netpbm(std::istream& in);

// 1-bit P4 bitmap; nonzero mask bytes map to black (1) bits.
void write_pbm(const std::vector<std::uint8_t>& mask, int h, int w, std::ostream& out);
std::vector<std::uint8_t> read_pbm(std::istream& in, int& h, int& w);

}  // namespace nci

#endif
