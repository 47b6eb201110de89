#include "nci/io_formats.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

namespace nci {

namespace {

static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

// istream wrapper that tracks the byte offset for error reporting.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    std::size_t offset() const { return off_; }

    bool read_exact(void* dst, std::size_t n) {
        in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
        off_ += static_cast<std::size_t>(in_.gcount());
        return static_cast<std::size_t>(in_.gcount()) == n;
    }

    // Returns EOF at end of stream.
    int get() {
        int ch = in_.get();
        if (ch != EOF) ++off_;
        return ch;
    }

    bool at_eof() { return in_.peek() == EOF; }

private:
    std::istream& in_;
    std::size_t off_ = 0;
};

void expect_end(Reader& r, const char* what) {
    if (!r.at_eof()) throw parse_error(std::string(what) + ": trailing bytes", r.offset());
}

std::uint32_t rd_u32le(Reader& r, const char* what) {
    unsigned char b[4];
    std::size_t at = r.offset();
    if (!r.read_exact(b, 4)) throw parse_error(std::string(what) + ": truncated header", at);
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

void wr_u32le(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                          static_cast<unsigned char>(v >> 8 & 0xFF),
                          static_cast<unsigned char>(v >> 16 & 0xFF),
                          static_cast<unsigned char>(v >> 24 & 0xFF)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

// --- Y4M ---------------------------------------------------------------

namespace {

// Reads up to and including '\n'; the newline is not stored.
std::string read_line(Reader& r, const char* what) {
    std::string s;
    for (;;) {
        int ch = r.get();
        if (ch == EOF) throw parse_error(std::string(what) + ": truncated header line", r.offset());
        if (ch == '\n') return s;
        s.push_back(static_cast<char>(ch));
        if (s.size() > 4096) throw parse_error(std::string(what) + ": unterminated header line", r.offset());
    }
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < line.size()) {
        std::size_t j = line.find(' ', i);
        if (j == std::string::npos) j = line.size();
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j + 1;
    }
    return out;
}

long parse_uint(const std::string& s, std::size_t off, const char* what) {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos)
        throw parse_error(std::string("y4m: bad ") + what + " '" + s + "'", off);
    return std::stol(s);
}

// Clamp-to-edge bilinear upsample of a half-resolution chroma plane to h x w,
// with sample centers aligned (JPEG-style siting).
void upsample_chroma(const unsigned char* plane, int ch, int cw, int h, int w,
                     std::vector<float>& out) {
    out.resize(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        double fy = 0.5 * y - 0.25;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int ya = std::clamp(y0, 0, ch - 1);
        int yb = std::clamp(y0 + 1, 0, ch - 1);
        for (int x = 0; x < w; ++x) {
            double fx = 0.5 * x - 0.25;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int xa = std::clamp(x0, 0, cw - 1);
            int xb = std::clamp(x0 + 1, 0, cw - 1);
            double top = (1.0 - wx) * plane[ya * cw + xa] + wx * plane[ya * cw + xb];
            double bot = (1.0 - wx) * plane[yb * cw + xa] + wx * plane[yb * cw + xb];
            out[static_cast<std::size_t>(y) * w + x] =
                static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    }
}

}  // namespace

FrameSequence read_y4m(std::istream& in) {
    Reader r(in);
    std::string header = read_line(r, "y4m");
    std::vector<std::string> fields = split_fields(header);
    if (fields.empty() || fields[0] != "YUV4MPEG2")
        throw parse_error("y4m: bad magic", 0);

    int w = 0, h = 0;
    double fps = 0.0;
    int subsample = 2;  // default chroma mode is C420
    for (std::size_t i = 1; i < fields.size(); ++i) {
        const std::string& f = fields[i];
        std::string v = f.substr(1);
        switch (f[0]) {
        case 'W': w = static_cast<int>(parse_uint(v, r.offset(), "width")); break;
        case 'H': h = static_cast<int>(parse_uint(v, r.offset(), "height")); break;
        case 'F': {
            std::size_t colon = v.find(':');
            if (colon == std::string::npos)
                throw parse_error("y4m: bad frame rate '" + f + "'", r.offset());
            long num = parse_uint(v.substr(0, colon), r.offset(), "frame rate");
            long den = parse_uint(v.substr(colon + 1), r.offset(), "frame rate");
            if (den == 0) throw parse_error("y4m: zero frame-rate denominator", r.offset());
            fps = static_cast<double>(num) / static_cast<double>(den);
            break;
        }
        case 'C':
            if (v == "444") subsample = 1;
            else if (v == "420" || v == "420jpeg" || v == "420mpeg2" || v == "420paldv")
                subsample = 2;
            else
                throw parse_error("y4m: unknown chroma tag '" + f + "'", r.offset());
            break;
        case 'I': case 'A': case 'X':
            break;  // interlacing, aspect, extensions: ignored
        default:
            throw parse_error("y4m: unknown header field '" + f + "'", r.offset());
        }
    }
    if (w <= 0 || h <= 0) throw parse_error("y4m: missing frame dimensions", r.offset());
    if (fps <= 0.0) throw parse_error("y4m: missing frame rate", r.offset());
    if (subsample == 2 && (w % 2 != 0 || h % 2 != 0))
        throw parse_error("y4m: 4:2:0 requires even dimensions", r.offset());

    const int cw = w / subsample, chh = h / subsample;
    const std::size_t ysize = static_cast<std::size_t>(w) * h;
    const std::size_t csize = static_cast<std::size_t>(cw) * chh;
    std::vector<unsigned char> yp(ysize), up(csize), vp(csize);
    std::vector<float> cb, cr;

    std::vector<float> data;
    int frames = 0;
    while (!r.at_eof()) {
        std::string marker = read_line(r, "y4m");
        std::vector<std::string> mf = split_fields(marker);
        if (mf.empty() || mf[0] != "FRAME")
            throw parse_error("y4m: expected FRAME marker before frame " + std::to_string(frames),
                              r.offset());
        if (!r.read_exact(yp.data(), ysize) || !r.read_exact(up.data(), csize) ||
            !r.read_exact(vp.data(), csize))
            throw parse_error("y4m: truncated frame " + std::to_string(frames), r.offset());

        if (subsample == 2) {
            upsample_chroma(up.data(), chh, cw, h, w, cb);
            upsample_chroma(vp.data(), chh, cw, h, w, cr);
        } else {
            cb.assign(up.begin(), up.end());
            cr.assign(vp.begin(), vp.end());
        }

        data.resize(data.size() + ysize * 3);
        float* dst = data.data() + static_cast<std::size_t>(frames) * ysize * 3;
        for (std::size_t i = 0; i < ysize; ++i) {
            double yy = yp[i] / 255.0;
            double pb = (cb[i] - 128.0) / 255.0;
            double pr = (cr[i] - 128.0) / 255.0;
            double rr = yy + 1.402 * pr;
            double gg = yy - 0.344136 * pb - 0.714136 * pr;
            double bb = yy + 1.772 * pb;
            dst[3 * i + 0] = static_cast<float>(std::clamp(rr, 0.0, 1.0));
            dst[3 * i + 1] = static_cast<float>(std::clamp(gg, 0.0, 1.0));
            dst[3 * i + 2] = static_cast<float>(std::clamp(bb, 0.0, 1.0));
        }
        ++frames;
    }

    FrameSequence seq;
    seq.t = frames;
    seq.h = h;
    seq.w = w;
    seq.c = 3;
    seq.fps = fps;
    seq.data = std::move(data);
    seq.provenance = "y4m";
    return seq;
}

// --- FSEQ --------------------------------------------------------------

void write_fseq(const FrameSequence& seq, std::ostream& out) {
    out.write("FSEQ", 4);
    wr_u32le(out, kFseqVersion);
    wr_u32le(out, static_cast<std::uint32_t>(seq.t));
    wr_u32le(out, static_cast<std::uint32_t>(seq.h));
    wr_u32le(out, static_cast<std::uint32_t>(seq.w));
    wr_u32le(out, static_cast<std::uint32_t>(seq.c));
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(seq.data.data()),
                  static_cast<std::streamsize>(seq.data.size() * 4));
    } else {
        for (float v : seq.data) {
            std::uint32_t u;
            std::memcpy(&u, &v, 4);
            wr_u32le(out, u);
        }
    }
    if (!out) throw std::runtime_error("fseq: write failed");
}

FrameSequence read_fseq(std::istream& in) {
    Reader r(in);
    char magic[4];
    if (!r.read_exact(magic, 4) || std::memcmp(magic, "FSEQ", 4) != 0)
        throw parse_error("fseq: bad magic", 0);
    std::uint32_t version = rd_u32le(r, "fseq");
    if (version != kFseqVersion)
        throw parse_error("fseq: unsupported version " + std::to_string(version), 4);
    std::uint32_t t = rd_u32le(r, "fseq");
    std::uint32_t h = rd_u32le(r, "fseq");
    std::uint32_t w = rd_u32le(r, "fseq");
    std::uint32_t c = rd_u32le(r, "fseq");
    std::uint64_t total = std::uint64_t(t) * h * w * c;
    if (total > (std::uint64_t(1) << 33))
        throw parse_error("fseq: implausible dimensions", 8);

    FrameSequence seq;
    seq.t = static_cast<int>(t);
    seq.h = static_cast<int>(h);
    seq.w = static_cast<int>(w);
    seq.c = static_cast<int>(c);
    seq.data.resize(static_cast<std::size_t>(total));
    if constexpr (std::endian::native == std::endian::little) {
        if (!r.read_exact(seq.data.data(), seq.data.size() * 4))
            throw parse_error("fseq: truncated payload", r.offset());
    } else {
        for (float& v : seq.data) {
            std::uint32_t u = rd_u32le(r, "fseq");
            std::memcpy(&v, &u, 4);
        }
    }
    expect_end(r, "fseq");
    seq.provenance = "fseq";
    return seq;
}

// --- NetPBM ------------------------------------------------------------

namespace {

// Next whitespace-delimited non-negative integer; '#' starts a comment that
// runs to end of line.
long pbm_int(Reader& r, const char* what) {
    int ch = r.get();
    for (;;) {
        if (ch == '#') {
            while (ch != '\n' && ch != EOF) ch = r.get();
        } else if (ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n') {
            ch = r.get();
        } else {
            break;
        }
    }
    if (ch < '0' || ch > '9')
        throw parse_error(std::string("netpbm: expected ") + what, r.offset());
    long v = 0;
    while (ch >= '0' && ch <= '9') {
        v = v * 10 + (ch - '0');
        if (v > 1 << 30) throw parse_error(std::string("netpbm: oversized ") + what, r.offset());
        ch = r.get();
    }
    // ch is the single whitespace byte that ends the token (or EOF → caller
    // fails on the next read).
    if (ch != ' ' && ch != '\t' && ch != '\r' && ch != '\n' && ch != EOF)
        throw parse_error(std::string("netpbm: malformed ") + what, r.offset());
    return v;
}

}  // namespace

void write_netpbm(const Image& im, int bit_depth, std::ostream& out) {
    if (bit_depth != 8 && bit_depth != 16)
        throw std::invalid_argument("write_netpbm: bit depth must be 8 or 16");
    if (im.c != 1 && im.c != 3)
        throw std::invalid_argument("write_netpbm: image must have 1 or 3 channels");
    if (im.h <= 0 || im.w <= 0)
        throw std::invalid_argument("write_netpbm: empty image");

    const long maxval = bit_depth == 8 ? 255 : 65535;
    out << (im.c == 1 ? "P5" : "P6") << "\n" << im.w << " " << im.h << "\n" << maxval << "\n";

    std::vector<unsigned char> row(static_cast<std::size_t>(im.w) * im.c * (bit_depth / 8));
    for (int y = 0; y < im.h; ++y) {
        unsigned char* p = row.data();
        for (int x = 0; x < im.w; ++x) {
            for (int ch = 0; ch < im.c; ++ch) {
                double v = std::clamp(static_cast<double>(im.at(y, x, ch)), 0.0, 1.0);
                long q = std::lround(v * maxval);
                if (bit_depth == 8) {
                    *p++ = static_cast<unsigned char>(q);
                } else {
                    *p++ = static_cast<unsigned char>(q >> 8);
                    *p++ = static_cast<unsigned char>(q & 0xFF);
                }
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw std::runtime_error("netpbm: write failed");
}

Image read_netpbm(std::istream& in) {
    Reader r(in);
    int m0 = r.get(), m1 = r.get();
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw parse_error("netpbm: bad magic", 0);
    const int channels = m1 == '5' ? 1 : 3;
    long w = pbm_int(r, "width");
    long h = pbm_int(r, "height");
    long maxval = pbm_int(r, "maxval");
    if (w <= 0 || h <= 0) throw parse_error("netpbm: bad dimensions", r.offset());
    if (maxval <= 0 || maxval > 65535) throw parse_error("netpbm: bad maxval", r.offset());

    Image im(static_cast<int>(h), static_cast<int>(w), channels);
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(im.size() * bytes);
    if (!r.read_exact(raw.data(), raw.size()))
        throw parse_error("netpbm: truncated pixel data", r.offset());
    for (std::size_t i = 0; i < im.size(); ++i) {
        long q = bytes == 1 ? raw[i] : (long(raw[2 * i]) << 8 | raw[2 * i + 1]);
        im.data[i] = static_cast<float>(static_cast<double>(q) / maxval);
    }
    expect_end(r, "netpbm");
    return im;
}

void write_pbm(const std::vector<std::uint8_t>& mask, int h, int w, std::ostream& out) {
    if (h <= 0 || w <= 0 || mask.size() != static_cast<std::size_t>(h) * w)
        throw std::invalid_argument("write_pbm: mask size does not match dimensions");
    out << "P4\n" << w << " " << h << "\n";
    const int stride = (w + 7) / 8;
    std::vector<unsigned char> row(static_cast<std::size_t>(stride));
    for (int y = 0; y < h; ++y) {
        std::fill(row.begin(), row.end(), 0);
        for (int x = 0; x < w; ++x)
            if (mask[static_cast<std::size_t>(y) * w + x])
                row[x / 8] |= static_cast<unsigned char>(0x80 >> (x % 8));
        out.write(reinterpret_cast<const char*>(row.data()), stride);
    }
    if (!out) throw std::runtime_error("pbm: write failed");
}

std::vector<std::uint8_t> read_pbm(std::istream& in, int& h, int& w) {
    Reader r(in);
    int m0 = r.get(), m1 = r.get();
    if (m0 != 'P' || m1 != '4') throw parse_error("pbm: bad magic", 0);
    long ww = pbm_int(r, "width");
    long hh = pbm_int(r, "height");
    if (ww <= 0 || hh <= 0) throw parse_error("pbm: bad dimensions", r.offset());
    const int stride = static_cast<int>((ww + 7) / 8);
    std::vector<unsigned char> raw(static_cast<std::size_t>(stride) * hh);
    if (!r.read_exact(raw.data(), raw.size()))
        throw parse_error("pbm: truncated bitmap", r.offset());
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(hh) * ww);
    for (long y = 0; y < hh; ++y)
        for (long x = 0; x < ww; ++x)
            mask[y * ww + x] =
                (raw[y * stride + x / 8] >> (7 - x % 8)) & 1u;
    expect_end(r, "pbm");
    h = static_cast<int>(hh);
    w = static_cast<int>(ww);
    return mask;
}

}  // namespace nci
