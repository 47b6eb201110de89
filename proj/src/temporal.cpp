#include "nci/temporal.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <stdexcept>

#include "nci/fft.hpp"

namespace nci {

std::vector<double> spatial_mean_trace(const FrameSequence& video) {
    if (video.t < 1) throw std::invalid_argument("trace: empty video");
    std::vector<double> trace(static_cast<std::size_t>(video.t));
    const std::size_t fs = video.frame_stride();
    const double inv = 1.0 / static_cast<double>(fs);
#pragma omp parallel for schedule(static)
    for (int t = 0; t < video.t; ++t) {
        const float* f = video.frame(t);
        double acc = 0.0;
        for (std::size_t i = 0; i < fs; ++i) acc += f[i];
        trace[static_cast<std::size_t>(t)] = acc * inv;
    }
    return trace;
}

namespace {

std::vector<double> center(const std::vector<double>& x) {
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(x.size());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - mean;
    return out;
}

double norm2(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

}  // namespace

std::vector<double> ncc_scan(const std::vector<double>& trace, const std::vector<double>& code,
                             std::int64_t lo, std::int64_t hi) {
    const std::int64_t n = static_cast<std::int64_t>(trace.size());
    const std::int64_t m = static_cast<std::int64_t>(code.size());
    if (n < 2) throw std::invalid_argument("ncc: trace too short");
    lo = std::max<std::int64_t>(lo, 0);
    hi = std::min<std::int64_t>(hi, m - n);
    if (lo > hi) throw std::invalid_argument("ncc: empty search range");

    const std::vector<double> yc = center(trace);
    const double ynorm = norm2(yc);

    // Raw correlations for every offset in one FFT pass.
    std::vector<double> raw = fft::cross_correlate(yc, code);

    // Per-offset code-window norms via prefix sums.
    std::vector<double> ps1(code.size() + 1, 0.0), ps2(code.size() + 1, 0.0);
    for (std::size_t i = 0; i < code.size(); ++i) {
        ps1[i + 1] = ps1[i] + code[i];
        ps2[i + 1] = ps2[i] + code[i] * code[i];
    }

    std::vector<double> ncc(static_cast<std::size_t>(hi - lo + 1), 0.0);
    for (std::int64_t o = lo; o <= hi; ++o) {
        const double s1 = ps1[static_cast<std::size_t>(o + n)] - ps1[static_cast<std::size_t>(o)];
        const double s2 = ps2[static_cast<std::size_t>(o + n)] - ps2[static_cast<std::size_t>(o)];
        const double var = s2 - s1 * s1 / static_cast<double>(n);
        const double denom = ynorm * std::sqrt(std::max(var, 0.0));
        double v = denom > 1e-12 ? raw[static_cast<std::size_t>(o)] / denom : 0.0;
        ncc[static_cast<std::size_t>(o - lo)] = std::clamp(v, -1.0, 1.0);
    }
    return ncc;
}

RegisterResult pick_peak(const std::vector<double>& ncc, std::int64_t lo, double threshold) {
    RegisterResult r;
    if (ncc.empty()) throw std::invalid_argument("pick_peak: empty scan");
    std::size_t best = 0;
    for (std::size_t i = 1; i < ncc.size(); ++i)
        if (ncc[i] > ncc[best]) best = i;
    r.offset = lo + static_cast<std::int64_t>(best);
    r.peak = ncc[best];

    double second = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < ncc.size(); ++i) {
        if (std::llabs(static_cast<long long>(i) - static_cast<long long>(best)) <=
            kPeakExclusion)
            continue;
        if (!any || ncc[i] > second) second = ncc[i], any = true;
    }
    if (r.peak <= 0.0) {
        r.confidence = 0.0;
    } else if (!any || second <= 0.0) {
        r.confidence = 1e9;
    } else {
        r.confidence = r.peak / second;
    }
    r.conclusive = r.peak > 0.0 && r.confidence >= threshold;
    return r;
}

RegisterResult global_register(const std::vector<double>& trace, const std::vector<double>& code,
                               std::int64_t lo, std::int64_t hi, double threshold) {
    return pick_peak(ncc_scan(trace, code, lo, hi), std::max<std::int64_t>(lo, 0), threshold);
}

RegisterResult global_register(const FrameSequence& video, const std::vector<double>& code,
                               std::int64_t lo, std::int64_t hi, double threshold) {
    return global_register(spatial_mean_trace(video), code, lo, hi, threshold);
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

#pragma omp parallel for schedule(dynamic)
    for (int j = 0; j < mat.num_cols; ++j) {
        std::vector<double> window(trace.begin() + static_cast<std::ptrdiff_t>(j) * col_hop,
                                   trace.begin() + static_cast<std::ptrdiff_t>(j) * col_hop +
                                       col_window);
        std::vector<double> col = ncc_scan(window, code, 0, offset_range);
        for (int o = 0; o < mat.num_offsets; ++o)
            mat.scores[static_cast<std::size_t>(o) * mat.num_cols + j] =
                col[static_cast<std::size_t>(o)];
    }
    return mat;
}

AlignmentMatrix alignment_matrix(const FrameSequence& video, const std::vector<double>& code,
                                 int col_window, int col_hop, std::int64_t offset_range) {
    return alignment_matrix(spatial_mean_trace(video), code, col_window, col_hop, offset_range);
}

AlignmentCurve extract_alignment_curve(const AlignmentMatrix& m, double jump_threshold,
                                       double confidence_floor) {
    if (m.num_cols < 1 || m.num_offsets < 1)
        throw std::invalid_argument("alignment curve: empty matrix");
    AlignmentCurve curve;
    curve.col_hop = m.col_hop;
    curve.best_offset.resize(static_cast<std::size_t>(m.num_cols));
    curve.confidence.resize(static_cast<std::size_t>(m.num_cols));
    curve.confident.resize(static_cast<std::size_t>(m.num_cols));

    for (int j = 0; j < m.num_cols; ++j) {
        std::vector<double> col(static_cast<std::size_t>(m.num_offsets));
        for (int o = 0; o < m.num_offsets; ++o) col[static_cast<std::size_t>(o)] = m.score(o, j);
        RegisterResult r = pick_peak(col, m.offset_lo, confidence_floor);
        curve.best_offset[static_cast<std::size_t>(j)] = r.offset;
        curve.confidence[static_cast<std::size_t>(j)] = r.confidence;
        curve.confident[static_cast<std::size_t>(j)] = r.conclusive ? 1 : 0;
    }

    int prev = -1;
    for (int j = 0; j < m.num_cols; ++j) {
        if (!curve.confident[static_cast<std::size_t>(j)]) continue;
        if (prev >= 0) {
            // Residual against the unit-slope diagonal; equal for both columns
            // of an unedited stretch.
            const std::int64_t rj = curve.best_offset[static_cast<std::size_t>(j)] -
                                    static_cast<std::int64_t>(j) * m.col_hop;
            const std::int64_t rp = curve.best_offset[static_cast<std::size_t>(prev)] -
                                    static_cast<std::int64_t>(prev) * m.col_hop;
            if (std::llabs(rj - rp) > jump_threshold)
                curve.discontinuities.emplace_back(j, rj - rp);
        }
        prev = j;
    }
    return curve;
}

std::vector<double> resample_code(const std::vector<double>& code, double rho, std::size_t count,
                                  double start) {
    if (!(rho > 0.0)) throw std::invalid_argument("resample: rho must be > 0");
    std::vector<double> out(count);
    const double last = static_cast<double>(code.size() - 1);
    for (std::size_t j = 0; j < count; ++j) {
        double pos = start + static_cast<double>(j) * rho;
        if (pos < 0.0 || pos > last)
            throw std::invalid_argument("resample: position outside code");
        std::size_t i0 = static_cast<std::size_t>(pos);
        double w = pos - static_cast<double>(i0);
        out[j] = w == 0.0 ? code[i0] : (1.0 - w) * code[i0] + w * code[i0 + 1];
    }
    return out;
}

SpeedScanResult speed_scan(const std::vector<double>& trace, const std::vector<double>& code,
                           double rho_lo, double rho_hi, double rho_step) {
    if (!(rho_lo > 0.0) || rho_hi < rho_lo || !(rho_step > 1.0))
        throw std::invalid_argument("speed scan: bad rho grid");
    const std::size_t n = trace.size();
    if (n < 8) throw std::invalid_argument("speed scan: trace too short");
    if (static_cast<double>(code.size()) < static_cast<double>(n - 1) * rho_hi + 2.0)
        throw std::invalid_argument("speed scan: code too short for rho_hi");

    std::vector<double> grid;
    for (double r = rho_lo; r <= rho_hi * (1.0 + 1e-9); r *= rho_step) grid.push_back(r);

    const std::size_t nfft = fft::good_size(n);
    const std::size_t nbins = nfft / 2 + 1;

    std::vector<double> ymag(nbins);
    {
        std::vector<double> padded(nfft, 0.0);
        std::vector<double> yc = center(trace);
        std::copy(yc.begin(), yc.end(), padded.begin());
        std::vector<std::complex<double>> spec(nbins);
        fft::rfft(padded.data(), nfft, spec.data());
        for (std::size_t i = 0; i < nbins; ++i) ymag[i] = std::abs(spec[i]);
    }
    double ynorm = 0.0;
    for (std::size_t i = 1; i < nbins; ++i) ynorm += ymag[i] * ymag[i];
    ynorm = std::sqrt(ynorm);

    SpeedScanResult res;
    res.score_curve.resize(grid.size());

#pragma omp parallel
    {
        std::vector<double> padded(nfft);
        std::vector<std::complex<double>> spec(nbins);
#pragma omp for schedule(dynamic)
        for (std::ptrdiff_t gi = 0; gi < static_cast<std::ptrdiff_t>(grid.size()); ++gi) {
            std::vector<double> rc = resample_code(code, grid[static_cast<std::size_t>(gi)], n);
            std::vector<double> cc = center(rc);
            std::fill(padded.begin(), padded.end(), 0.0);
            std::copy(cc.begin(), cc.end(), padded.begin());
            fft::rfft(padded.data(), nfft, spec.data());
            double dot = 0.0, cnorm = 0.0;
            for (std::size_t i = 1; i < nbins; ++i) {
                const double mag = std::abs(spec[i]);
                dot += ymag[i] * mag;
                cnorm += mag * mag;
            }
            const double denom = ynorm * std::sqrt(cnorm);
            res.score_curve[static_cast<std::size_t>(gi)] = {
                grid[static_cast<std::size_t>(gi)], denom > 1e-12 ? dot / denom : 0.0};
        }
    }

    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (res.score_curve[i].second > res.score_curve[best].second) best = i;
    res.rho = grid[best];

    double second = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (i + 2 >= best && i <= best + 2) continue;  // skip best +- 2 grid steps
        if (!any || res.score_curve[i].second > second) second = res.score_curve[i].second, any = true;
    }
    res.confidence = !any || second <= 0.0
                         ? 1e9
                         : res.score_curve[best].second / second;

    // Time alignment at the detected speed.
    const std::size_t rn =
        static_cast<std::size_t>(std::floor(static_cast<double>(code.size() - 1) / res.rho)) + 1;
    std::vector<double> rcode = resample_code(code, res.rho, rn);
    RegisterResult reg = global_register(
        trace, rcode, 0, static_cast<std::int64_t>(rn) - static_cast<std::int64_t>(n), 0.0);
    res.offset = std::llround(static_cast<double>(reg.offset) * res.rho);
    return res;
}

SpeedScanResult speed_scan(const FrameSequence& video, const std::vector<double>& code,
                           double rho_lo, double rho_hi, double rho_step) {
    return speed_scan(spatial_mean_trace(video), code, rho_lo, rho_hi, rho_step);
}

PatchRegisterResult patch_weighted_register(const FrameSequence& video,
                                            const std::vector<double>& code, int patch_size,
                                            std::int64_t lo, std::int64_t hi, double threshold,
                                            double beta) {
    if (patch_size < 1) throw std::invalid_argument("patch register: patch_size must be >= 1");
    const int ty = (video.h + patch_size - 1) / patch_size;
    const int tx = (video.w + patch_size - 1) / patch_size;
    const std::int64_t n = video.t;
    const std::int64_t m = static_cast<std::int64_t>(code.size());
    lo = std::max<std::int64_t>(lo, 0);
    hi = std::min<std::int64_t>(hi, m - n);
    if (lo > hi) throw std::invalid_argument("patch register: empty search range");
    const std::size_t noff = static_cast<std::size_t>(hi - lo + 1);

    // Per-tile mean traces.
    const int ntiles = ty * tx;
    std::vector<std::vector<double>> traces(static_cast<std::size_t>(ntiles),
                                            std::vector<double>(static_cast<std::size_t>(n)));
    for (int t = 0; t < video.t; ++t) {
        const float* f = video.frame(t);
        for (int i = 0; i < ntiles; ++i) {
            const int y0 = (i / tx) * patch_size, x0 = (i % tx) * patch_size;
            const int y1 = std::min(y0 + patch_size, video.h);
            const int x1 = std::min(x0 + patch_size, video.w);
            double acc = 0.0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x)
                    for (int ch = 0; ch < video.c; ++ch)
                        acc += f[(static_cast<std::size_t>(y) * video.w + x) * video.c + ch];
            traces[static_cast<std::size_t>(i)][static_cast<std::size_t>(t)] =
                acc / (double(y1 - y0) * (x1 - x0) * video.c);
        }
    }

    std::vector<std::vector<double>> curves(static_cast<std::size_t>(ntiles));
    std::vector<double> conf(static_cast<std::size_t>(ntiles), 0.0);
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < ntiles; ++i) {
        curves[static_cast<std::size_t>(i)] = ncc_scan(traces[static_cast<std::size_t>(i)], code, lo, hi);
        RegisterResult r = pick_peak(curves[static_cast<std::size_t>(i)], lo, threshold);
        conf[static_cast<std::size_t>(i)] = r.peak > 0.0 ? std::min(r.confidence, 20.0) : 0.0;
    }

    // Soft-max over tile confidences.
    double cmax = 0.0;
    for (double c : conf) cmax = std::max(cmax, c);
    std::vector<double> weight(static_cast<std::size_t>(ntiles));
    double wsum = 0.0;
    for (int i = 0; i < ntiles; ++i) {
        weight[static_cast<std::size_t>(i)] = std::exp(beta * (conf[static_cast<std::size_t>(i)] - cmax));
        wsum += weight[static_cast<std::size_t>(i)];
    }
    for (double& w : weight) w /= wsum;

    std::vector<double> combined(noff, 0.0);
    for (int i = 0; i < ntiles; ++i)
        for (std::size_t o = 0; o < noff; ++o)
            combined[o] += weight[static_cast<std::size_t>(i)] * curves[static_cast<std::size_t>(i)][o];

    PatchRegisterResult out;
    out.reg = pick_peak(combined, lo, threshold);
    out.weight_map = Image(ty, tx, 1);
    for (int i = 0; i < ntiles; ++i)
        out.weight_map.data[static_cast<std::size_t>(i)] =
            static_cast<float>(weight[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace nci
