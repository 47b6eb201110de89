#include "nci/decode.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "doctest.h"
#include "nci/codegen.hpp"
#include "nci/io_formats.hpp"
#include "nci/prng.hpp"
#include "nci/simulate.hpp"
#include "nci/types.hpp"

using namespace nci;

namespace {

CodeSpec make_spec(int k = 1, std::uint64_t seed = 21, double amplitude = 0.005) {
    CodeSpec s;
    s.num_codes = k;
    s.master_seed = seed;
    s.amplitude_scale = amplitude;
    return s;
}

NoiseModel no_noise() {
    NoiseModel n;
    n.quant_bits = 0;
    return n;
}

Image gradient_image(int h, int w, float lo, float hi, bool horizontal) {
    Image im(h, w, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const float u = horizontal ? static_cast<float>(x) / static_cast<float>(w - 1)
                                       : static_cast<float>(y) / static_cast<float>(h - 1);
            im.at(y, x, 0) = lo + (hi - lo) * u;
        }
    return im;
}

AnalysisWindow full_window(int frames) {
    AnalysisWindow win;
    win.t_center = frames / 2;
    win.w = frames;
    win.downsample = 1;
    return win;
}

double correlation(const std::vector<double>& a, const std::vector<double>& b) {
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= double(a.size());
    mb /= double(a.size());
    double num = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - ma) * (b[i] - mb);
        na += (a[i] - ma) * (a[i] - ma);
        nb += (b[i] - mb) * (b[i] - mb);
    }
    return num / std::sqrt(na * nb);
}

std::vector<double> pixel_trace(const FrameSequence& v, int y, int x, int ch) {
    std::vector<double> tr(static_cast<std::size_t>(v.t));
    for (int t = 0; t < v.t; ++t) tr[static_cast<std::size_t>(t)] = v.at(t, y, x, ch);
    return tr;
}

}  // namespace

TEST_CASE("window resolution clamps into the video") {
    AnalysisWindow win;
    win.w = 100;
    win.t_center = 0;
    ResolvedWindow rw = resolve_window(win, 500);
    CHECK(rw.t0 == 0);
    CHECK(rw.len == 100);

    win.t_center = 499;
    rw = resolve_window(win, 500);
    CHECK(rw.t0 == 400);

    win.t_center = 250;
    rw = resolve_window(win, 500);
    CHECK(rw.t0 == 200);

    win.w = 1000;  // longer than the video: use everything
    rw = resolve_window(win, 500);
    CHECK(rw.t0 == 0);
    CHECK(rw.len == 500);

    win.w = 1;
    CHECK_THROWS_AS(resolve_window(win, 500), std::invalid_argument);
}

TEST_CASE("noiseless decode recovers transport exactly") {
    const int T = 384;  // three whole code segments
    SceneModel sc;
    sc.base = Image(16, 16, 1, 0.3f);
    sc.transport.push_back(gradient_image(16, 16, 0.1f, 0.9f, true));
    CodeSpec spec = make_spec();
    FrameSequence video = render(sc, spec, no_noise(), 0, T);
    std::vector<double> code = code_for_interval(spec, 0, T, 0);

    CodeImage ci = code_image(video, code, full_window(T));
    CHECK(ci.window_t0 == 0);
    CHECK(ci.window_len == T);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const double truth = sc.transport[0].at(y, x, 0);
            const double got = ci.values.at(y, x, 0);
            CHECK(std::abs(got - truth) / truth <= 1e-6);
        }
}

TEST_CASE("decoding one source ignores the other") {
    const int T = 384;
    CodeSpec spec = make_spec(2, 77);
    SceneModel both;
    both.base = Image(8, 8, 1, 0.3f);
    both.transport.push_back(gradient_image(8, 8, 0.2f, 0.7f, true));
    both.transport.push_back(gradient_image(8, 8, 0.6f, 0.1f, false));
    SceneModel solo = both;
    solo.transport[1] = Image(8, 8, 1, 0.0f);

    FrameSequence v_both = render(both, spec, no_noise(), 0, T);
    FrameSequence v_solo = render(solo, spec, no_noise(), 0, T);
    std::vector<double> c0 = code_for_interval(spec, 0, T, 0);

    CodeImage from_both = code_image(v_both, c0, full_window(T));
    CodeImage from_solo = code_image(v_solo, c0, full_window(T));
    for (std::size_t i = 0; i < from_both.values.size(); ++i)
        CHECK(std::abs(from_both.values.data[i] - from_solo.values.data[i]) <= 1e-6);
}

TEST_CASE("degenerate code window is rejected") {
    FrameSequence v(10, 2, 2, 1);
    std::vector<double> flat(10, 0.25);
    AnalysisWindow win = full_window(10);
    CHECK_THROWS_AS(code_image(v, flat, win), config_error);
}

TEST_CASE("bilateral residual of a constant trace is exactly zero") {
    FrameSequence v(64, 3, 3, 1);
    for (float& x : v.data) x = 0.5f;
    FrameSequence res = bilateral_residual(v);
    for (float x : res.data) CHECK(x == 0.0f);
}

TEST_CASE("bilateral residual passes the code through") {
    const int T = 384;
    SceneModel sc;
    sc.base = Image(2, 2, 1, 0.4f);
    sc.transport.push_back(Image(2, 2, 1, 0.5f));
    CodeSpec spec = make_spec();
    FrameSequence video = render(sc, spec, no_noise(), 0, T);
    FrameSequence res = bilateral_residual(video, 0.05, 15);

    std::vector<double> code = code_for_interval(spec, 0, T, 0);
    CHECK(correlation(pixel_trace(res, 0, 0, 0), code) >= 0.99);
}

TEST_CASE("bilateral residual suppresses a large step") {
    const int T = 384;
    CodeSpec spec = make_spec(1, 5, 0.002);  // code rms well under the step
    SceneModel sc;
    sc.base = Image(2, 2, 1, 0.3f);
    sc.transport.push_back(Image(2, 2, 1, 1.0f));
    FrameSequence clean = render(sc, spec, no_noise(), 0, T);

    FrameSequence stepped = clean;
    for (int t = T / 2; t < T; ++t)
        for (std::size_t p = 0; p < stepped.frame_stride(); ++p)
            stepped.frame(t)[p] += 0.3f;

    std::vector<double> code = code_for_interval(spec, 0, T, 0);
    const double r_clean =
        correlation(pixel_trace(bilateral_residual(clean), 0, 0, 0), code);
    const double r_stepped =
        correlation(pixel_trace(bilateral_residual(stepped), 0, 0, 0), code);
    CHECK(r_stepped >= 0.9 * r_clean);
    CHECK(r_clean >= 0.99);
}

TEST_CASE("stabilization is a no-op on static and flicker-only videos") {
    Image base(16, 16, 1);
    Xoshiro256pp rng(9);
    for (float& v : base.data) v = static_cast<float>(rng.uniform(0.2, 0.8));

    FrameSequence v(8, 16, 16, 1);
    for (int t = 0; t < 8; ++t) {
        const double gain = 1.0 + 0.01 * std::sin(0.7 * t);
        for (std::size_t p = 0; p < base.size(); ++p)
            v.frame(t)[p] = static_cast<float>(base.data[p] * gain);
    }
    auto [aligned, shifts] = stabilize_translation(v);
    for (auto [dy, dx] : shifts) {
        CHECK(dy == 0);
        CHECK(dx == 0);
    }
    CHECK(aligned.data == v.data);
}

TEST_CASE("stabilization undoes planted integer jitter") {
    Image base(16, 16, 1);
    Xoshiro256pp rng(10);
    for (float& v : base.data) v = static_cast<float>(rng.uniform01());

    const std::vector<std::pair<int, int>> planted = {
        {0, 0}, {1, 0}, {-2, 3}, {3, -3}, {0, 2}, {-1, -1}};
    FrameSequence v(static_cast<int>(planted.size()), 16, 16, 1);
    for (std::size_t t = 0; t < planted.size(); ++t) {
        auto [dy, dx] = planted[t];
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                v.at(static_cast<int>(t), y, x, 0) =
                    base.at(((y - dy) % 16 + 16) % 16, ((x - dx) % 16 + 16) % 16, 0);
    }

    auto [aligned, shifts] = stabilize_translation(v);
    CHECK(shifts == planted);
    for (int t = 0; t < aligned.t; ++t)
        for (std::size_t p = 0; p < base.size(); ++p)
            CHECK(aligned.frame(t)[p] == base.data[p]);
}

TEST_CASE("spatial downsample takes box means and drops remainders") {
    FrameSequence v(1, 5, 5, 1);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) v.at(0, y, x, 0) = static_cast<float>(y * 5 + x);
    FrameSequence d = spatial_downsample(v, 2);
    REQUIRE(d.h == 2);
    REQUIRE(d.w == 2);
    CHECK(d.at(0, 0, 0, 0) == doctest::Approx((0 + 1 + 5 + 6) / 4.0));
    CHECK(d.at(0, 1, 1, 0) == doctest::Approx((12 + 13 + 17 + 18) / 4.0));

    Image im(4, 4, 1, 0.25f);
    Image di = spatial_downsample(im, 2);
    CHECK(di.h == 2);
    CHECK(di.at(1, 1, 0) == 0.25f);
}

TEST_CASE("transient filter with constant weight source equals plain decode") {
    const int T = 256;
    SceneModel sc;
    sc.base = Image(6, 6, 1, 0.4f);
    sc.transport.push_back(gradient_image(6, 6, 0.1f, 0.8f, false));
    CodeSpec spec = make_spec();
    FrameSequence video = render(sc, spec, no_noise(), 0, T);
    std::vector<double> code = code_for_interval(spec, 0, T, 0);
    AnalysisWindow win = full_window(T);

    FrameSequence still(T, 6, 6, 1);
    for (float& v : still.data) v = 0.5f;

    CodeImage plain = code_image(video, code, win);
    CodeImage weighted = transient_filtered_code_image(video, still, code, win);

    CHECK(weighted.values.data == plain.values.data);  // g == 1 exactly
    for (float g : weighted.weight_map.data) CHECK(g == 1.0f);
    CHECK(weighted.valid.empty());
}

TEST_CASE("transient filter nulls a full-frame flash") {
    const int T = 128;
    SceneModel sc;
    sc.base = Image(6, 6, 1, 0.3f);
    sc.transport.push_back(Image(6, 6, 1, 0.5f));
    CodeSpec spec = make_spec();
    FrameSequence video = render(sc, spec, no_noise(), 0, T);

    FrameSequence flashed = video;
    const int flash_t = 40;
    for (std::size_t p = 0; p < flashed.frame_stride(); ++p)
        flashed.frame(flash_t)[p] += 0.5f;

    std::vector<double> code = code_for_interval(spec, 0, T, 0);
    AnalysisWindow win = full_window(T);
    CodeImage unweighted = code_image(flashed, code, win);
    CodeImage filtered = transient_filtered_code_image(flashed, code, win);

    double mse_u = 0.0, mse_f = 0.0;
    for (std::size_t i = 0; i < unweighted.values.size(); ++i) {
        mse_u += std::pow(unweighted.values.data[i] - 0.5, 2.0);
        mse_f += std::pow(filtered.values.data[i] - 0.5, 2.0);
    }
    CHECK(mse_f <= mse_u / 5.0);

    // The flash frame's weight is numerically dead: mean weight stays below
    // (len-1+e^-40)/len but above a floor that proves other frames kept g near 1.
    for (float g : filtered.weight_map.data) {
        CHECK(g < 1.0f);
        CHECK(g > 0.9f);
    }
}

TEST_CASE("moving sprite darkens the weight map along its path") {
    const int T = 128;
    SceneModel sc;
    sc.base = Image(16, 16, 1, 0.35f);
    sc.transport.push_back(Image(16, 16, 1, 0.3f));
    Sprite sp;
    sp.image = Image(4, 4, 1, 0.9f);
    for (int t = 0; t < T; ++t) sp.path.push_back({6, (t / 8) % 12});
    sc.sprites.push_back(sp);
    CodeSpec spec = make_spec();
    FrameSequence video = render(sc, spec, no_noise(), 0, T);

    std::vector<double> code = code_for_interval(spec, 0, T, 0);
    CodeImage ci = transient_filtered_code_image(video, code, full_window(T));

    double path_mean = 0.0, bg_mean = 0.0;
    int path_n = 0, bg_n = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            const bool on_path = y >= 6 && y < 10;  // sprite sweeps these rows
            if (on_path) {
                path_mean += ci.weight_map.at(y, x, 0);
                ++path_n;
            } else if (y < 4 || y >= 12) {
                bg_mean += ci.weight_map.at(y, x, 0);
                ++bg_n;
            }
        }
    CHECK(path_mean / path_n < 0.9 * (bg_mean / bg_n));
}

TEST_CASE("saturated traces are reported invalid") {
    const int T = 64;
    FrameSequence video(T, 2, 2, 1);
    for (int t = 0; t < T; ++t) {
        video.at(t, 0, 0, 0) = 1.0f;  // saturated everywhere
        video.at(t, 0, 1, 0) = static_cast<float>(0.4 + 0.001 * std::sin(1.1 * t));
        video.at(t, 1, 0, 0) = 0.5f;
        video.at(t, 1, 1, 0) = 0.5f;
    }
    std::vector<double> code(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) code[static_cast<std::size_t>(t)] = 0.004 * std::cos(0.9 * t);

    CodeImage ci = transient_filtered_code_image(video, code, full_window(T));
    REQUIRE(!ci.valid.empty());
    CHECK(!ci.sample_valid(0));
    CHECK(ci.sample_valid(1));
    CHECK(ci.weight_map.data[0] == 0.0f);
}

TEST_CASE("analysis code scale maps inversely to values") {
    const int T = 256;
    SceneModel sc;
    sc.base = Image(4, 4, 1, 0.3f);
    sc.transport.push_back(Image(4, 4, 1, 0.6f));
    CodeSpec spec = make_spec();
    FrameSequence video = render(sc, spec, no_noise(), 0, T);
    std::vector<double> code = code_for_interval(spec, 0, T, 0);
    std::vector<double> doubled = code;
    for (double& v : doubled) v *= 2.0;

    CodeImage a = code_image(video, code, full_window(T));
    CodeImage b = code_image(video, doubled, full_window(T));
    for (std::size_t i = 0; i < a.values.size(); ++i)
        CHECK(b.values.data[i] == doctest::Approx(0.5 * a.values.data[i]).epsilon(1e-9));
}

TEST_CASE("windowed correlation is additive across half-windows") {
    const int T = 256;
    SceneModel sc;
    sc.base = Image(3, 3, 1, 0.45f);
    sc.transport.push_back(gradient_image(3, 3, 0.2f, 0.8f, true));
    CodeSpec spec = make_spec();
    FrameSequence video = render(sc, spec, no_noise(), 0, T);

    std::vector<double> c_full = code_for_interval(spec, 0, 256, 0);
    std::vector<double> c_a = code_for_interval(spec, 0, 128, 0);
    std::vector<double> c_b = code_for_interval(spec, 128, 256, 0);

    AnalysisWindow w_full = full_window(256);
    AnalysisWindow w_a;
    w_a.t_center = 64;
    w_a.w = 128;
    AnalysisWindow w_b;
    w_b.t_center = 192;
    w_b.w = 128;

    auto den = [](const std::vector<double>& c) {
        double m = 0.0;
        for (double v : c) m += v;
        m /= double(c.size());
        double d = 0.0;
        for (double v : c) d += (v - m) * v;
        return d;
    };
    const double dF = den(c_full), dA = den(c_a), dB = den(c_b);

    CodeImage full = code_image(video, c_full, w_full);
    CodeImage half_a = code_image(video, c_a, w_a);
    CodeImage half_b = code_image(video, c_b, w_b);
    for (std::size_t i = 0; i < full.values.size(); ++i) {
        const double lhs = full.values.data[i] * dF;
        const double rhs = half_a.values.data[i] * dA + half_b.values.data[i] * dB;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
    }
}

TEST_CASE("estimates are unbiased under zero-mean noise") {
    const int T = 128;
    SceneModel sc;
    sc.base = Image(4, 4, 1, 0.4f);
    sc.transport.push_back(Image(4, 4, 1, 0.3f));
    CodeSpec spec = make_spec();
    std::vector<double> code = code_for_interval(spec, 0, T, 0);

    NoiseModel nm;
    nm.read_std = 0.005;
    nm.quant_bits = 0;

    const int trials = 200;
    double grand = 0.0;
    double den = 0.0;
    for (double v : code) den += v * v;  // zero-mean code
    for (int s = 0; s < trials; ++s) {
        nm.noise_seed = static_cast<std::uint64_t>(s) + 1000;
        FrameSequence video = render(sc, spec, nm, 0, T);
        CodeImage ci = code_image(video, code, full_window(T));
        for (float v : ci.values.data) grand += v;
    }
    grand /= double(trials) * 16.0;

    const double se = 0.005 / std::sqrt(den) / std::sqrt(double(trials) * 16.0);
    CHECK(std::abs(grand - 0.3) <= 3.0 * se);
}

TEST_CASE("code image export writes image plus sidecar") {
    CodeImage ci;
    ci.values = Image(2, 2, 1);
    ci.values.data = {0.1f, 0.9f, 0.5f, 0.3f};
    ci.valid = {1, 1, 0, 1};
    ci.source_id = 3;
    ci.window_t0 = 10;
    ci.window_len = 64;

    const auto dir = std::filesystem::temp_directory_path() / "nci_export_test";
    std::filesystem::create_directories(dir);
    const std::string base = (dir / "ci").string();
    export_code_image(ci, base);

    std::ifstream img(base + ".pgm", std::ios::binary);
    REQUIRE(img.good());
    Image back = read_netpbm(img);
    CHECK(back.h == 2);
    // Min/max over valid samples span 0.1..0.9; invalid exports as 0.
    CHECK(back.data[0] == doctest::Approx(0.0).epsilon(1e-4));
    CHECK(back.data[1] == doctest::Approx(1.0).epsilon(1e-4));
    CHECK(back.data[2] == 0.0f);

    std::ifstream txt(base + ".txt");
    REQUIRE(txt.good());
    std::string text((std::istreambuf_iterator<char>(txt)), std::istreambuf_iterator<char>());
    CHECK(text.find("source_id = 3") != std::string::npos);
    CHECK(text.find("window_t0 = 10") != std::string::npos);
    CHECK(text.find("invalid_samples = 1") != std::string::npos);
    std::filesystem::remove_all(dir);
}
