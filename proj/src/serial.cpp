#include "nci/serial.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "nci/prng.hpp"

namespace nci::serial {

namespace {
// Matches the tag used by the parallel renderer so noise streams line up.
constexpr std::uint64_t kNoiseTag = 0xF0;
}

FrameSequence render(const SceneModel& scene, const CodeSpec& spec, const NoiseModel& noise,
                     std::int64_t t0, int t_count) {
    scene.validate();
    noise.validate();
    spec.validate();
    if (t_count <= 0) throw std::invalid_argument("render: t_count must be >= 1");
    const int k = static_cast<int>(scene.transport.size());
    if (k != spec.num_codes)
        throw std::invalid_argument("render: transport image count != num_codes");

    std::vector<std::vector<double>> codes(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) codes[i] = code_for_interval(spec, t0, t0 + t_count, i);

    const int h = scene.base.h, w = scene.base.w, c = scene.base.c;
    FrameSequence out(t_count, h, w, c, spec.fps);
    out.provenance = "render";
    const bool noisy = noise.read_std > 0.0 || noise.photon_coeff > 0.0;
    const double levels = noise.quant_bits > 0 ? double((1 << noise.quant_bits) - 1) : 0.0;
    const bool encode = scene.gamma > 0.0 && scene.gamma != 1.0;

    for (int t = 0; t < t_count; ++t) {
        float* frame = out.frame(t);
        for (std::size_t p = 0; p < scene.base.size(); ++p) {
            double v = scene.base.data[p];
            for (int i = 0; i < k; ++i)
                v += codes[i][static_cast<std::size_t>(t)] * scene.transport[i].data[p];
            frame[p] = static_cast<float>(v);
        }
        for (const Sprite& s : scene.sprites) {
            const auto& pos = s.path[std::min<std::size_t>(t, s.path.size() - 1)];
            for (int sy = 0; sy < s.image.h; ++sy) {
                int y = pos.first + sy;
                if (y < 0 || y >= h) continue;
                for (int sx = 0; sx < s.image.w; ++sx) {
                    int x = pos.second + sx;
                    if (x < 0 || x >= w) continue;
                    for (int ch = 0; ch < c; ++ch)
                        frame[(static_cast<std::size_t>(y) * w + x) * c + ch] =
                            s.image.at(sy, sx, ch);
                }
            }
        }
        if (noisy) {
            Xoshiro256pp rng(hash_seed(
                {noise.noise_seed, kNoiseTag, static_cast<std::uint64_t>(t0 + t)}));
            for (std::size_t p = 0; p < scene.base.size(); ++p) {
                double n = rng.normal();
                frame[p] = static_cast<float>(frame[p] + noise.sigma(frame[p]) * n);
            }
        }
        for (std::size_t p = 0; p < scene.base.size(); ++p) {
            double v = std::clamp(static_cast<double>(frame[p]), 0.0, 1.0);
            if (encode) v = std::pow(v, scene.gamma);
            if (levels > 0.0) v = std::round(v * levels) / levels;
            frame[p] = static_cast<float>(v);
        }
    }
    return out;
}

FrameSequence bilateral_residual(const FrameSequence& video, double sigma_r, int radius) {
    if (radius < 1) throw std::invalid_argument("bilateral: radius must be >= 1");
    if (!(sigma_r > 0.0)) throw std::invalid_argument("bilateral: sigma_r must be > 0");

    std::vector<double> ws(static_cast<std::size_t>(2 * radius + 1));
    const double s2 = 2.0 * (radius / 2.0) * (radius / 2.0);
    for (int d = -radius; d <= radius; ++d)
        ws[static_cast<std::size_t>(d + radius)] = std::exp(-double(d) * d / s2);

    FrameSequence out(video.t, video.h, video.w, video.c, video.fps);
    out.provenance = video.provenance;
    const std::size_t fs = video.frame_stride();
    const double inv2sr2 = 1.0 / (2.0 * sigma_r * sigma_r);

    std::vector<double> trace(static_cast<std::size_t>(video.t));
    for (std::size_t p = 0; p < fs; ++p) {
        for (int t = 0; t < video.t; ++t)
            trace[static_cast<std::size_t>(t)] = video.data[fs * t + p];
        for (int t = 0; t < video.t; ++t) {
            const double y0 = trace[static_cast<std::size_t>(t)];
            double num = 0.0, den = 0.0;
            const int lo = std::max(0, t - radius), hi = std::min(video.t - 1, t + radius);
            for (int u = lo; u <= hi; ++u) {
                const double diff = trace[static_cast<std::size_t>(u)] - y0;
                const double w = ws[static_cast<std::size_t>(u - t + radius)] *
                                 std::exp(-diff * diff * inv2sr2);
                num += w * diff;
                den += w;
            }
            out.data[fs * t + p] = static_cast<float>(-(num / den));
        }
    }
    return out;
}

CodeImage code_image(const FrameSequence& video, const std::vector<double>& code,
                     const AnalysisWindow& win) {
    const ResolvedWindow rw = resolve_window(win, video.t);
    if (code.size() != static_cast<std::size_t>(rw.len))
        throw std::invalid_argument("code_image: code length must match resolved window");

    const FrameSequence v = nci::spatial_downsample(video, win.downsample);

    double sum = 0.0;
    for (double x : code) sum += x;
    const double cbar = sum / double(code.size());
    std::vector<double> ctil(code.size());
    double den = 0.0;
    for (std::size_t j = 0; j < code.size(); ++j) {
        ctil[j] = code[j] - cbar;
        den += ctil[j] * code[j];
    }
    if (!(den > 1e-300)) throw config_error("code_image: degenerate (zero-energy) code window");

    CodeImage ci;
    ci.values = Image(v.h, v.w, v.c);
    ci.window_t0 = rw.t0;
    ci.window_len = rw.len;
    for (std::size_t p = 0; p < v.frame_stride(); ++p) {
        double num = 0.0;
        for (int j = 0; j < rw.len; ++j)
            num += ctil[static_cast<std::size_t>(j)] *
                   static_cast<double>(v.data[v.frame_stride() * (rw.t0 + j) + p]);
        ci.values.data[p] = static_cast<float>(num / den);
    }
    return ci;
}

std::vector<double> ncc_scan_direct(const std::vector<double>& trace,
                                    const std::vector<double>& code, std::int64_t lo,
                                    std::int64_t hi) {
    const std::int64_t n = static_cast<std::int64_t>(trace.size());
    const std::int64_t m = static_cast<std::int64_t>(code.size());
    if (n < 2) throw std::invalid_argument("ncc: trace too short");
    lo = std::max<std::int64_t>(lo, 0);
    hi = std::min<std::int64_t>(hi, m - n);
    if (lo > hi) throw std::invalid_argument("ncc: empty search range");

    double mean = 0.0;
    for (double v : trace) mean += v;
    mean /= double(n);
    std::vector<double> yc(trace.size());
    double ynorm2 = 0.0;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        yc[i] = trace[i] - mean;
        ynorm2 += yc[i] * yc[i];
    }
    const double ynorm = std::sqrt(ynorm2);

    std::vector<double> ncc(static_cast<std::size_t>(hi - lo + 1), 0.0);
    for (std::int64_t o = lo; o <= hi; ++o) {
        double raw = 0.0, s1 = 0.0, s2 = 0.0;
        for (std::int64_t t = 0; t < n; ++t) {
            const double cv = code[static_cast<std::size_t>(o + t)];
            raw += yc[static_cast<std::size_t>(t)] * cv;
            s1 += cv;
            s2 += cv * cv;
        }
        const double var = s2 - s1 * s1 / double(n);
        const double denom = ynorm * std::sqrt(std::max(var, 0.0));
        double v = denom > 1e-12 ? raw / denom : 0.0;
        ncc[static_cast<std::size_t>(o - lo)] = std::clamp(v, -1.0, 1.0);
    }
    return ncc;
}

AlignmentMatrix alignment_matrix(const std::vector<double>& trace,
                                 const std::vector<double>& code, int col_window, int col_hop,
                                 std::int64_t offset_range) {
    const std::int64_t n = static_cast<std::int64_t>(trace.size());
    const std::int64_t m = static_cast<std::int64_t>(code.size());
    if (col_window < 2 || col_window > n)
        throw std::invalid_argument("alignment: col_window must be in [2, video length]");
    if (col_hop < 1) throw std::invalid_argument("alignment: col_hop must be >= 1");
    if (offset_range < 0) offset_range = m - col_window;
    offset_range = std::min<std::int64_t>(offset_range, m - col_window);
    if (offset_range < 0) throw std::invalid_argument("alignment: code shorter than col_window");

    AlignmentMatrix mat;
    mat.col_window = col_window;
    mat.col_hop = col_hop;
    mat.offset_lo = 0;
    mat.num_offsets = static_cast<int>(offset_range + 1);
    mat.num_cols = static_cast<int>((n - col_window) / col_hop + 1);
    mat.scores.assign(static_cast<std::size_t>(mat.num_offsets) * mat.num_cols, 0.0);

    for (int j = 0; j < mat.num_cols; ++j) {
        std::vector<double> window(trace.begin() + static_cast<std::ptrdiff_t>(j) * col_hop,
                                   trace.begin() + static_cast<std::ptrdiff_t>(j) * col_hop +
                                       col_window);
        std::vector<double> col = ncc_scan_direct(window, code, 0, offset_range);
        for (int o = 0; o < mat.num_offsets; ++o)
            mat.scores[static_cast<std::size_t>(o) * mat.num_cols + j] =
                col[static_cast<std::size_t>(o)];
    }
    return mat;
}

}  // namespace nci::serial
