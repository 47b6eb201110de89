#include "nci/tamper.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace nci {

namespace {

FrameSequence like(const FrameSequence& v, int t) {
    FrameSequence out(t, v.h, v.w, v.c, v.fps);
    out.provenance = v.provenance;
    return out;
}

void check_range(const FrameSequence& v, std::int64_t t0, std::int64_t t1, const char* op) {
    if (t0 < 0 || t1 < t0 || t1 > v.t)
        throw std::invalid_argument(std::string(op) + ": frame range out of bounds");
}

}  // namespace

FrameSequence cut(const FrameSequence& video, std::int64_t t_start, std::int64_t n_removed,
                  int crossfade, EditLog& log) {
    check_range(video, t_start, t_start + n_removed, "cut");
    if (crossfade < 0) throw std::invalid_argument("cut: crossfade must be >= 0");

    FrameSequence out = like(video, static_cast<int>(video.t - n_removed));
    const std::size_t fs = video.frame_stride();
    std::copy_n(video.data.begin(), fs * static_cast<std::size_t>(t_start), out.data.begin());
    std::copy(video.data.begin() + fs * static_cast<std::size_t>(t_start + n_removed),
              video.data.end(), out.data.begin() + fs * static_cast<std::size_t>(t_start));

    if (crossfade > 0 && n_removed > 0 && t_start > 0 && t_start < out.t) {
        const float* prev = out.frame(static_cast<int>(t_start - 1));
        const int n = std::min<std::int64_t>(crossfade, out.t - t_start);
        for (int j = 0; j < n; ++j) {
            float* f = out.frame(static_cast<int>(t_start + j));
            const double w = double(j + 1) / double(crossfade + 1);
            for (std::size_t p = 0; p < fs; ++p)
                f[p] = static_cast<float>((1.0 - w) * prev[p] + w * f[p]);
        }
    }

    Edit e;
    e.kind = Edit::Kind::Cut;
    e.t_start = t_start;
    e.n_removed = n_removed;
    e.crossfade = crossfade;
    log.edits.push_back(std::move(e));
    return out;
}

FrameSequence splice(const FrameSequence& video,
                     const std::vector<std::pair<std::int64_t, std::int64_t>>& segment_order,
                     EditLog& log) {
    std::int64_t total = 0;
    for (auto [t0, t1] : segment_order) {
        check_range(video, t0, t1, "splice");
        total += t1 - t0;
    }
    FrameSequence out = like(video, static_cast<int>(total));
    const std::size_t fs = video.frame_stride();
    std::size_t at = 0;
    for (auto [t0, t1] : segment_order) {
        std::copy(video.data.begin() + fs * static_cast<std::size_t>(t0),
                  video.data.begin() + fs * static_cast<std::size_t>(t1),
                  out.data.begin() + at);
        at += fs * static_cast<std::size_t>(t1 - t0);
    }
    Edit e;
    e.kind = Edit::Kind::Splice;
    e.segments = segment_order;
    log.edits.push_back(std::move(e));
    return out;
}

FrameSequence retime(const FrameSequence& video, double rho, std::int64_t r0, std::int64_t r1,
                     EditLog& log) {
    if (!(rho > 0.0)) throw std::invalid_argument("retime: rho must be > 0");
    if (r1 <= r0) {
        r0 = 0;
        r1 = video.t;
    }
    check_range(video, r0, r1, "retime");
    const std::int64_t n = r1 - r0;
    const std::int64_t m = std::llround(double(n) / rho);
    if (m < 1) throw std::invalid_argument("retime: resampled range is empty");

    FrameSequence out = like(video, static_cast<int>(video.t - n + m));
    const std::size_t fs = video.frame_stride();
    std::copy_n(video.data.begin(), fs * static_cast<std::size_t>(r0), out.data.begin());
    for (std::int64_t j = 0; j < m; ++j) {
        double pos = std::min(double(r0) + double(j) * rho, double(r1 - 1));
        std::int64_t i0 = static_cast<std::int64_t>(std::floor(pos));
        std::int64_t i1 = std::min(i0 + 1, r1 - 1);
        double w = pos - double(i0);
        const float* a = video.frame(static_cast<int>(i0));
        const float* b = video.frame(static_cast<int>(i1));
        float* dst = out.frame(static_cast<int>(r0 + j));
        if (w == 0.0) {
            std::copy_n(a, fs, dst);
        } else {
            for (std::size_t p = 0; p < fs; ++p)
                dst[p] = static_cast<float>((1.0 - w) * a[p] + w * b[p]);
        }
    }
    std::copy(video.data.begin() + fs * static_cast<std::size_t>(r1), video.data.end(),
              out.data.begin() + fs * static_cast<std::size_t>(r0 + m));

    Edit e;
    e.kind = Edit::Kind::Retime;
    e.rho = rho;
    e.r0 = r0;
    e.r1 = r1;
    log.edits.push_back(std::move(e));
    return out;
}

FrameSequence composite(const FrameSequence& video, const FrameSequence& patch, int rect_y,
                        int rect_x, std::int64_t t0, std::int64_t t1, EditLog& log) {
    if (t1 <= t0) {
        t0 = 0;
        t1 = video.t;
    }
    check_range(video, t0, t1, "composite");
    if (rect_y < 0 || rect_x < 0 || patch.h < 0 || patch.w < 0 ||
        rect_y + patch.h > video.h || rect_x + patch.w > video.w)
        throw std::invalid_argument("composite: rect outside frame");
    if (patch.c != video.c)
        throw std::invalid_argument("composite: patch channel count mismatch");
    if (patch.t != 1 && patch.t != t1 - t0)
        throw std::invalid_argument("composite: patch must have 1 frame or one per step");

    FrameSequence out = video;
    for (std::int64_t t = t0; t < t1; ++t) {
        const float* src = patch.frame(patch.t == 1 ? 0 : static_cast<int>(t - t0));
        float* dst = out.frame(static_cast<int>(t));
        for (int y = 0; y < patch.h; ++y)
            for (int x = 0; x < patch.w; ++x)
                for (int ch = 0; ch < patch.c; ++ch)
                    dst[(static_cast<std::size_t>(rect_y + y) * video.w + rect_x + x) * video.c +
                        ch] = src[(static_cast<std::size_t>(y) * patch.w + x) * patch.c + ch];
    }

    Edit e;
    e.kind = Edit::Kind::Composite;
    e.rect_y = rect_y;
    e.rect_x = rect_x;
    e.rect_h = patch.h;
    e.rect_w = patch.w;
    e.r0 = t0;
    e.r1 = t1;
    e.patch = patch;
    log.edits.push_back(std::move(e));
    return out;
}

FrameSequence apply_edits(const FrameSequence& original, const EditLog& log) {
    FrameSequence v = original;
    EditLog scratch;
    for (const Edit& e : log.edits) {
        switch (e.kind) {
        case Edit::Kind::Cut:
            v = cut(v, e.t_start, e.n_removed, e.crossfade, scratch);
            break;
        case Edit::Kind::Splice:
            v = splice(v, e.segments, scratch);
            break;
        case Edit::Kind::Retime:
            v = retime(v, e.rho, e.r0, e.r1, scratch);
            break;
        case Edit::Kind::Composite:
            v = composite(v, e.patch, e.rect_y, e.rect_x, e.r0, e.r1, scratch);
            break;
        }
    }
    return v;
}

// --- text serialization --------------------------------------------------

namespace {

const char kHexDigits[] = "0123456789abcdef";

std::string hex_encode(const std::vector<float>& data) {
    std::string s;
    s.reserve(data.size() * 8);
    for (float v : data) {
        std::uint32_t u;
        std::memcpy(&u, &v, 4);
        for (int shift = 28; shift >= 0; shift -= 4)
            s.push_back(kHexDigits[(u >> shift) & 0xF]);
    }
    return s;
}

std::vector<float> hex_decode(const std::string& s, long line_no) {
    if (s.size() % 8 != 0)
        throw parse_error("edit log: hex payload length not a multiple of 8", 0, line_no);
    std::vector<float> out(s.size() / 8);
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::uint32_t u = 0;
        for (int j = 0; j < 8; ++j) {
            char ch = s[i * 8 + j];
            int d = ch >= '0' && ch <= '9'   ? ch - '0'
                    : ch >= 'a' && ch <= 'f' ? ch - 'a' + 10
                                             : -1;
            if (d < 0) throw parse_error("edit log: bad hex digit", 0, line_no);
            u = u << 4 | static_cast<std::uint32_t>(d);
        }
        std::memcpy(&out[i], &u, 4);
    }
    return out;
}

}  // namespace

void write_edit_log(const EditLog& log, std::ostream& out) {
    out << "# edit log v1\n";
    char buf[64];
    for (const Edit& e : log.edits) {
        switch (e.kind) {
        case Edit::Kind::Cut:
            out << "cut t_start=" << e.t_start << " n_removed=" << e.n_removed
                << " crossfade=" << e.crossfade << "\n";
            break;
        case Edit::Kind::Splice: {
            out << "splice segments=";
            for (std::size_t i = 0; i < e.segments.size(); ++i) {
                if (i) out << ",";
                out << e.segments[i].first << ":" << e.segments[i].second;
            }
            out << "\n";
            break;
        }
        case Edit::Kind::Retime:
            std::snprintf(buf, sizeof buf, "%.17g", e.rho);
            out << "retime rho=" << buf << " range=" << e.r0 << ":" << e.r1 << "\n";
            break;
        case Edit::Kind::Composite:
            out << "composite rect=" << e.rect_y << "," << e.rect_x << "," << e.rect_h << ","
                << e.rect_w << " range=" << e.r0 << ":" << e.r1 << " patch=" << e.patch.t << "x"
                << e.patch.h << "x" << e.patch.w << "x" << e.patch.c << ":"
                << hex_encode(e.patch.data) << "\n";
            break;
        }
    }
}

namespace {

// "key=value" tokens after the op name; values may not contain spaces.
std::pair<std::string, std::string> split_kv(const std::string& tok, long line_no) {
    std::size_t eq = tok.find('=');
    if (eq == std::string::npos)
        throw parse_error("edit log: expected key=value, got '" + tok + "'", 0, line_no);
    return {tok.substr(0, eq), tok.substr(eq + 1)};
}

std::pair<std::int64_t, std::int64_t> parse_span(const std::string& v, long line_no) {
    std::size_t colon = v.find(':');
    if (colon == std::string::npos)
        throw parse_error("edit log: expected a:b span, got '" + v + "'", 0, line_no);
    return {std::stoll(v.substr(0, colon)), std::stoll(v.substr(colon + 1))};
}

}  // namespace

EditLog read_edit_log(std::istream& in) {
    EditLog log;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;

        std::istringstream ss(line);
        std::string op;
        ss >> op;
        Edit e;
        std::string tok;
        if (op == "cut") {
            e.kind = Edit::Kind::Cut;
            while (ss >> tok) {
                auto [k, v] = split_kv(tok, line_no);
                if (k == "t_start") e.t_start = std::stoll(v);
                else if (k == "n_removed") e.n_removed = std::stoll(v);
                else if (k == "crossfade") e.crossfade = std::stoi(v);
                else throw parse_error("edit log: unknown cut key '" + k + "'", 0, line_no);
            }
        } else if (op == "splice") {
            e.kind = Edit::Kind::Splice;
            while (ss >> tok) {
                auto [k, v] = split_kv(tok, line_no);
                if (k != "segments")
                    throw parse_error("edit log: unknown splice key '" + k + "'", 0, line_no);
                std::size_t i = 0;
                while (i < v.size()) {
                    std::size_t j = v.find(',', i);
                    if (j == std::string::npos) j = v.size();
                    e.segments.push_back(parse_span(v.substr(i, j - i), line_no));
                    i = j + 1;
                }
            }
            if (e.segments.empty())
                throw parse_error("edit log: splice without segments", 0, line_no);
        } else if (op == "retime") {
            e.kind = Edit::Kind::Retime;
            while (ss >> tok) {
                auto [k, v] = split_kv(tok, line_no);
                if (k == "rho") e.rho = std::stod(v);
                else if (k == "range") std::tie(e.r0, e.r1) = parse_span(v, line_no);
                else throw parse_error("edit log: unknown retime key '" + k + "'", 0, line_no);
            }
        } else if (op == "composite") {
            e.kind = Edit::Kind::Composite;
            while (ss >> tok) {
                auto [k, v] = split_kv(tok, line_no);
                if (k == "rect") {
                    if (std::sscanf(v.c_str(), "%d,%d,%d,%d", &e.rect_y, &e.rect_x, &e.rect_h,
                                    &e.rect_w) != 4)
                        throw parse_error("edit log: bad rect '" + v + "'", 0, line_no);
                } else if (k == "range") {
                    std::tie(e.r0, e.r1) = parse_span(v, line_no);
                } else if (k == "patch") {
                    int t, h, w, c;
                    std::size_t colon = v.find(':');
                    if (colon == std::string::npos ||
                        std::sscanf(v.substr(0, colon).c_str(), "%dx%dx%dx%d", &t, &h, &w, &c) !=
                            4)
                        throw parse_error("edit log: bad patch header", 0, line_no);
                    e.patch = FrameSequence(t, h, w, c);
                    e.patch.data = hex_decode(v.substr(colon + 1), line_no);
                    if (e.patch.data.size() !=
                        static_cast<std::size_t>(t) * h * w * c)
                        throw parse_error("edit log: patch payload size mismatch", 0, line_no);
                } else {
                    throw parse_error("edit log: unknown composite key '" + k + "'", 0, line_no);
                }
            }
        } else {
            throw parse_error("edit log: unknown op '" + op + "'", 0, line_no);
        }
        log.edits.push_back(std::move(e));
    }
    return log;
}

}  // namespace nci
