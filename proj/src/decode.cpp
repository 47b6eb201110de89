#include "nci/decode.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "nci/fft.hpp"
#include "nci/io_formats.hpp"

namespace nci {

void AnalysisWindow::validate() const {
    if (w < 2) throw std::invalid_argument("window: w must be >= 2");
    if (downsample < 1) throw std::invalid_argument("window: downsample must be >= 1");
}

ResolvedWindow resolve_window(const AnalysisWindow& win, int video_frames) {
    win.validate();
    if (video_frames < 2) throw std::invalid_argument("window: video too short");
    const int len = std::min(win.w, video_frames);
    std::int64_t t0 = win.t_center - len / 2;
    t0 = std::clamp<std::int64_t>(t0, 0, video_frames - len);
    return {t0, len};
}

FrameSequence bilateral_residual(const FrameSequence& video, double sigma_r, int radius) {
    if (radius < 1) throw std::invalid_argument("bilateral: radius must be >= 1");
    if (!(sigma_r > 0.0)) throw std::invalid_argument("bilateral: sigma_r must be > 0");

    // Temporal Gaussian taps, std = radius / 2.
    std::vector<double> ws(static_cast<std::size_t>(2 * radius + 1));
    const double s2 = 2.0 * (radius / 2.0) * (radius / 2.0);
    for (int d = -radius; d <= radius; ++d) ws[static_cast<std::size_t>(d + radius)] = std::exp(-double(d) * d / s2);

    FrameSequence out(video.t, video.h, video.w, video.c, video.fps);
    out.provenance = video.provenance;
    const std::size_t npix = video.frame_stride();
    const std::size_t fs = npix;
    const double inv2sr2 = 1.0 / (2.0 * sigma_r * sigma_r);

#pragma omp parallel
    {
        std::vector<double> trace(static_cast<std::size_t>(video.t));
#pragma omp for schedule(static)
        for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(npix); ++p) {
            for (int t = 0; t < video.t; ++t)
                trace[static_cast<std::size_t>(t)] = video.data[fs * t + static_cast<std::size_t>(p)];
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
                // B = y0 + num/den, so a constant trace gives residual exactly 0.
                out.data[fs * t + static_cast<std::size_t>(p)] =
                    static_cast<float>(-(num / den));
            }
        }
    }
    return out;
}

namespace {

std::vector<double> frame_luminance(const FrameSequence& v, int t) {
    std::vector<double> lum(static_cast<std::size_t>(v.h) * v.w);
    const float* f = v.frame(t);
    for (std::size_t i = 0; i < lum.size(); ++i) {
        double s = 0.0;
        for (int ch = 0; ch < v.c; ++ch) s += f[i * v.c + ch];
        lum[i] = s / v.c;
    }
    return lum;
}

}  // namespace

std::pair<FrameSequence, std::vector<std::pair<int, int>>> stabilize_translation(
    const FrameSequence& video) {
    if (video.t < 2) throw std::invalid_argument("stabilize: need at least 2 frames");
    const int h = video.h, w = video.w;
    const std::size_t nbins = static_cast<std::size_t>(h) * (w / 2 + 1);

    std::vector<std::complex<double>> f0(nbins);
    {
        std::vector<double> lum = frame_luminance(video, 0);
        fft::rfft2(lum.data(), h, w, f0.data());
    }

    std::vector<std::pair<int, int>> shifts(static_cast<std::size_t>(video.t), {0, 0});
    FrameSequence out = video;

#pragma omp parallel
    {
        std::vector<std::complex<double>> ft(nbins);
        std::vector<double> corr(static_cast<std::size_t>(h) * w);
#pragma omp for schedule(dynamic)
        for (int t = 1; t < video.t; ++t) {
            std::vector<double> lum = frame_luminance(video, t);
            fft::rfft2(lum.data(), h, w, ft.data());
            for (std::size_t i = 0; i < nbins; ++i) {
                std::complex<double> c = f0[i] * std::conj(ft[i]);
                double mag = std::abs(c);
                ft[i] = mag > 1e-15 ? c / mag : std::complex<double>(0.0, 0.0);
            }
            fft::irfft2(ft.data(), h, w, corr.data());
            std::size_t peak = 0;
            for (std::size_t i = 1; i < corr.size(); ++i)
                if (corr[i] > corr[peak]) peak = i;
            int py = static_cast<int>(peak) / w, px = static_cast<int>(peak) % w;
            // Peak at -d (mod size): content of frame t sits at +d relative to frame 0.
            int dy = py == 0 ? 0 : (py > h / 2 ? h - py : -py);
            int dx = px == 0 ? 0 : (px > w / 2 ? w - px : -px);
            shifts[static_cast<std::size_t>(t)] = {dy, dx};

            // Undo the translation with a circular shift.
            const float* src = video.frame(t);
            float* dst = out.frame(t);
            for (int y = 0; y < h; ++y) {
                int sy = ((y + dy) % h + h) % h;
                for (int x = 0; x < w; ++x) {
                    int sx = ((x + dx) % w + w) % w;
                    for (int ch = 0; ch < video.c; ++ch)
                        dst[(static_cast<std::size_t>(y) * w + x) * video.c + ch] =
                            src[(static_cast<std::size_t>(sy) * w + sx) * video.c + ch];
                }
            }
        }
    }
    return {std::move(out), std::move(shifts)};
}

FrameSequence spatial_downsample(const FrameSequence& video, int factor) {
    if (factor < 1) throw std::invalid_argument("downsample: factor must be >= 1");
    if (factor == 1) return video;
    const int hd = video.h / factor, wd = video.w / factor;
    if (hd < 1 || wd < 1) throw std::invalid_argument("downsample: factor exceeds frame size");
    FrameSequence out(video.t, hd, wd, video.c, video.fps);
    out.provenance = video.provenance;
    const double inv = 1.0 / (double(factor) * factor);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < video.t; ++t) {
        const float* src = video.frame(t);
        float* dst = out.frame(t);
        for (int y = 0; y < hd; ++y)
            for (int x = 0; x < wd; ++x)
                for (int ch = 0; ch < video.c; ++ch) {
                    double acc = 0.0;
                    for (int by = 0; by < factor; ++by)
                        for (int bx = 0; bx < factor; ++bx)
                            acc += src[(static_cast<std::size_t>(y * factor + by) * video.w +
                                        static_cast<std::size_t>(x * factor + bx)) *
                                           video.c +
                                       ch];
                    dst[(static_cast<std::size_t>(y) * wd + x) * video.c + ch] =
                        static_cast<float>(acc * inv);
                }
    }
    return out;
}

Image spatial_downsample(const Image& image, int factor) {
    FrameSequence v(1, image.h, image.w, image.c);
    v.data = image.data;
    return spatial_downsample(v, factor).frame_image(0);
}

namespace {

struct CodeStats {
    std::vector<double> ctil;  // c - mean(c)
    double cbar = 0.0;
    double den = 0.0;  // sum ctil * c
};

CodeStats center_code(const std::vector<double>& code) {
    CodeStats s;
    double sum = 0.0;
    for (double v : code) sum += v;
    s.cbar = sum / double(code.size());
    s.ctil.resize(code.size());
    for (std::size_t j = 0; j < code.size(); ++j) {
        s.ctil[j] = code[j] - s.cbar;
        s.den += s.ctil[j] * code[j];
    }
    return s;
}

}  // namespace

CodeImage code_image(const FrameSequence& video, const std::vector<double>& code,
                     const AnalysisWindow& win) {
    const ResolvedWindow rw = resolve_window(win, video.t);
    if (code.size() != static_cast<std::size_t>(rw.len))
        throw std::invalid_argument("code_image: code length must match resolved window");

    const FrameSequence v = spatial_downsample(video, win.downsample);
    const CodeStats cs = center_code(code);
    if (!(cs.den > 1e-300)) throw config_error("code_image: degenerate (zero-energy) code window");

    CodeImage ci;
    ci.values = Image(v.h, v.w, v.c);
    ci.window_t0 = rw.t0;
    ci.window_len = rw.len;
    const std::size_t npix = v.frame_stride();

#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(npix); ++p) {
        double num = 0.0;
        for (int j = 0; j < rw.len; ++j)
            num += cs.ctil[static_cast<std::size_t>(j)] *
                   static_cast<double>(v.data[v.frame_stride() * (rw.t0 + j) + static_cast<std::size_t>(p)]);
        ci.values.data[static_cast<std::size_t>(p)] = static_cast<float>(num / cs.den);
    }
    return ci;
}

CodeImage transient_filtered_code_image(const FrameSequence& video,
                                        const FrameSequence& weight_source,
                                        const std::vector<double>& code,
                                        const AnalysisWindow& win, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("transient filter: sigma must be > 0");
    if (weight_source.t != video.t || weight_source.h != video.h ||
        weight_source.w != video.w || weight_source.c != video.c)
        throw std::invalid_argument("transient filter: weight source shape mismatch");
    const ResolvedWindow rw = resolve_window(win, video.t);
    if (code.size() != static_cast<std::size_t>(rw.len))
        throw std::invalid_argument("transient filter: code length must match resolved window");

    const FrameSequence v = spatial_downsample(video, win.downsample);
    const FrameSequence ws = spatial_downsample(weight_source, win.downsample);
    {
        CodeStats probe = center_code(code);
        if (!(probe.den > 1e-300))
            throw config_error("transient filter: degenerate (zero-energy) code window");
    }

    CodeImage ci;
    ci.values = Image(v.h, v.w, v.c);
    ci.weight_map = Image(v.h, v.w, v.c);
    ci.valid.assign(v.frame_stride(), 1);
    ci.window_t0 = rw.t0;
    ci.window_len = rw.len;

    const std::size_t npix = v.frame_stride();
    const int anchor = rw.len / 2;
    const double inv2s2 = 1.0 / (2.0 * sigma * sigma);
    std::size_t invalid_count = 0;

#pragma omp parallel
    {
        std::vector<double> y(static_cast<std::size_t>(rw.len));
        std::vector<double> g(static_cast<std::size_t>(rw.len));
#pragma omp for schedule(static) reduction(+ : invalid_count)
        for (std::ptrdiff_t p = 0; p < static_cast<std::ptrdiff_t>(npix); ++p) {
            for (int j = 0; j < rw.len; ++j)
                y[static_cast<std::size_t>(j)] = static_cast<double>(
                    v.data[v.frame_stride() * (rw.t0 + j) + static_cast<std::size_t>(p)]);
            const double ref = static_cast<double>(
                ws.data[ws.frame_stride() * (rw.t0 + anchor) + static_cast<std::size_t>(p)]);
            double gsum = 0.0, gcsum = 0.0;
            for (int j = 0; j < rw.len; ++j) {
                const double wv = static_cast<double>(
                    ws.data[ws.frame_stride() * (rw.t0 + j) + static_cast<std::size_t>(p)]);
                const double diff = wv - ref;
                double gj = wv >= kSaturation ? 0.0 : std::exp(-diff * diff * inv2s2);
                g[static_cast<std::size_t>(j)] = gj;
                gsum += gj;
                gcsum += gj * code[static_cast<std::size_t>(j)];
            }
            ci.weight_map.data[static_cast<std::size_t>(p)] =
                static_cast<float>(gsum / double(rw.len));
            if (!(gsum > 0.0)) {
                ci.valid[static_cast<std::size_t>(p)] = 0;
                ++invalid_count;
                continue;
            }
            const double cbar = gcsum / gsum;
            double num = 0.0, den = 0.0;
            for (int j = 0; j < rw.len; ++j) {
                const double ct = code[static_cast<std::size_t>(j)] - cbar;
                num += g[static_cast<std::size_t>(j)] * ct * y[static_cast<std::size_t>(j)];
                den += g[static_cast<std::size_t>(j)] * ct * code[static_cast<std::size_t>(j)];
            }
            if (!(den > 1e-300)) {
                ci.valid[static_cast<std::size_t>(p)] = 0;
                ++invalid_count;
                continue;
            }
            ci.values.data[static_cast<std::size_t>(p)] = static_cast<float>(num / den);
        }
    }
    if (invalid_count == 0) ci.valid.clear();
    return ci;
}

CodeImage transient_filtered_code_image(const FrameSequence& video,
                                        const std::vector<double>& code,
                                        const AnalysisWindow& win, double sigma) {
    return transient_filtered_code_image(video, video, code, win, sigma);
}

void export_code_image(const CodeImage& ci, const std::string& path_base) {
    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (std::size_t i = 0; i < ci.values.size(); ++i) {
        if (!ci.sample_valid(i)) continue;
        double v = ci.values.data[i];
        if (first) {
            lo = hi = v;
            first = false;
        } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    const double span = hi - lo;

    Image scaled(ci.values.h, ci.values.w, ci.values.c);
    std::size_t invalid = 0;
    for (std::size_t i = 0; i < ci.values.size(); ++i) {
        if (!ci.sample_valid(i)) {
            scaled.data[i] = 0.0f;
            ++invalid;
        } else {
            scaled.data[i] =
                span > 0.0 ? static_cast<float>((ci.values.data[i] - lo) / span) : 0.0f;
        }
    }

    const std::string img_path = path_base + (ci.values.c == 1 ? ".pgm" : ".ppm");
    std::ofstream img(img_path, std::ios::binary);
    if (!img) throw std::runtime_error("export: cannot open " + img_path);
    write_netpbm(scaled, 16, img);

    std::ofstream txt(path_base + ".txt");
    if (!txt) throw std::runtime_error("export: cannot open " + path_base + ".txt");
    char buf[64];
    txt << "source_id = " << ci.source_id << "\n";
    txt << "window_t0 = " << ci.window_t0 << "\n";
    txt << "window_len = " << ci.window_len << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", lo);
    txt << "min = " << buf << "\n";
    std::snprintf(buf, sizeof buf, "%.17g", hi);
    txt << "max = " << buf << "\n";
    txt << "invalid_samples = " << invalid << "\n";
    txt << "scale_ambiguous = " << (ci.scale_ambiguous ? 1 : 0) << "\n";
    if (!txt) throw std::runtime_error("export: write failed for " + path_base + ".txt");
}

}  // namespace nci
