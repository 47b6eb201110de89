#include "nci/spatial.hpp"

#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "nci/codegen.hpp"
#include "nci/decode.hpp"
#include "nci/prng.hpp"
#include "nci/simulate.hpp"
#include "nci/tamper.hpp"
#include "nci/types.hpp"

using namespace nci;

namespace {

CodeSpec make_spec(std::uint64_t seed = 51) {
    CodeSpec s;
    s.num_codes = 1;
    s.master_seed = seed;
    s.amplitude_scale = 0.005;
    return s;
}

struct Sim {
    FrameSequence video;
    std::vector<double> code;
    double code_rms = 0.0;
    NoiseModel nm;
};

Sim coded_sim(std::uint64_t noise_seed) {
    CodeSpec spec = make_spec();
    SceneModel sc;
    sc.base = Image(64, 64, 1, 0.5f);
    sc.transport.push_back(Image(64, 64, 1, 0.4f));
    Sim s;
    s.nm.read_std = 0.002;
    s.nm.photon_coeff = 0.005;
    s.nm.quant_bits = 8;
    s.nm.noise_seed = noise_seed;
    s.video = render(sc, spec, s.nm, 0, 256);
    s.code = code_for_interval(spec, 0, 256, 0);
    double acc = 0.0;
    for (double v : s.code) acc += v * v;
    s.code_rms = std::sqrt(acc / double(s.code.size()));
    return s;
}

AnalysisWindow full_window(int frames) {
    AnalysisWindow win;
    win.t_center = frames / 2;
    win.w = frames;
    return win;
}

double mask_iou(const std::vector<std::uint8_t>& mask, int w, int ry, int rx, int rh, int rw) {
    int inter = 0, uni = 0;
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x) {
            const bool in_rect = y >= ry && y < ry + rh && x >= rx && x < rx + rw;
            const bool flagged = mask[static_cast<std::size_t>(y) * w + x] != 0;
            if (in_rect && flagged) ++inter;
            if (in_rect || flagged) ++uni;
        }
    return uni == 0 ? 0.0 : double(inter) / double(uni);
}

}  // namespace

TEST_CASE("luminance uses Rec. 601 weights for color") {
    Image rgb(1, 1, 3);
    rgb.data = {0.25f, 0.5f, 0.75f};
    CHECK(pixel_luminance(rgb, 0, 0) ==
          doctest::Approx(0.299 * 0.25 + 0.587 * 0.5 + 0.114 * 0.75).epsilon(1e-12));
    Image gray(1, 1, 1, 0.6f);
    CHECK(pixel_luminance(gray, 0, 0) == doctest::Approx(0.6f));
}

TEST_CASE("default code floor is three predicted sigmas") {
    // sigma_n = 0.01, sqrt(M*w) = 20, rms = 0.01 -> 3*0.01 / 0.2
    CHECK(default_code_floor(0.01, 0.0, 0.5, 0.01, 100, 4) == doctest::Approx(0.15));
    CHECK(default_code_floor(0.0, 0.02, 0.25, 0.01, 100, 1) ==
          doctest::Approx(3.0 * 0.01 / (10.0 * 0.01)));
    CHECK_THROWS_AS(default_code_floor(0.01, 0.0, 0.5, 0.0, 100, 1), std::invalid_argument);
    CHECK_THROWS_AS(default_code_floor(0.01, 0.0, 0.5, 0.01, 0, 1), std::invalid_argument);
    CHECK_THROWS_AS(default_code_floor(0.01, 0.0, 0.5, 0.01, 100, 0), std::invalid_argument);
}

TEST_CASE("a pasted static patch is flagged with IoU >= 0.5") {
    Sim s = coded_sim(11);
    EditLog log;
    FrameSequence patch(1, 16, 16, 1);
    for (float& v : patch.data) v = 0.62f;
    FrameSequence tampered = composite(s.video, patch, 24, 24, 0, s.video.t, log);

    CodeImage ci = code_image(tampered, s.code, full_window(tampered.t));
    const double floor =
        default_code_floor(s.nm.read_std, s.nm.photon_coeff, 0.5, s.code_rms, tampered.t, 1);

    Image frame(64, 64, 1);
    for (std::size_t i = 0; i < frame.size(); ++i) frame.data[i] = tampered.frame(128)[i];
    ManipulationMask mm = manipulation_mask(frame, ci, 0.25, floor);

    CHECK(mask_iou(mm.mask, 64, 24, 24, 16, 16) >= 0.5);

    // Mask equals thresholded score map exactly.
    for (int y = 0; y < 64; ++y)
        for (int x = 0; x < 64; ++x)
            CHECK(mm.mask[static_cast<std::size_t>(y) * 64 + x] ==
                  (mm.score_map.at(y, x, 0) > 0.25 ? 1 : 0));
}

TEST_CASE("authentic video stays below one percent flagged") {
    Sim s = coded_sim(12);
    CodeImage ci = code_image(s.video, s.code, full_window(s.video.t));
    const double floor =
        default_code_floor(s.nm.read_std, s.nm.photon_coeff, 0.5, s.code_rms, s.video.t, 1);

    Image frame(64, 64, 1);
    for (std::size_t i = 0; i < frame.size(); ++i) frame.data[i] = s.video.frame(100)[i];
    ManipulationMask mm = manipulation_mask(frame, ci, 0.25, floor);

    int flagged = 0;
    for (std::uint8_t m : mm.mask) flagged += m;
    CHECK(double(flagged) / double(mm.mask.size()) <= 0.01);
}

TEST_CASE("dark pixels are never flagged") {
    Image frame(8, 8, 1, 0.2f);  // below bright_thresh everywhere
    CodeImage ci;
    ci.values = Image(8, 8, 1, 0.0f);  // maximally suspicious code image
    ManipulationMask mm = manipulation_mask(frame, ci, 0.25, 0.05);
    for (std::uint8_t m : mm.mask) CHECK(m == 0);
    // Scores still report the luminance for analyst inspection.
    CHECK(mm.score_map.at(3, 3, 0) == doctest::Approx(0.2f));
}

TEST_CASE("saturated, low-weight, and invalid pixels are inconclusive") {
    Image frame(1, 4, 1);
    frame.data = {0.62f, 0.9995f, 0.62f, 0.62f};
    CodeImage ci;
    ci.values = Image(1, 4, 1, 0.0f);
    ci.weight_map = Image(1, 4, 1, 0.9f);
    ci.weight_map.data[2] = 0.3f;  // below min_weight
    ci.valid = {1, 1, 1, 0};

    ManipulationMask mm = manipulation_mask(frame, ci, 0.25, 0.05, 0.5);
    CHECK(mm.mask[0] == 1);  // bright, dead code, trusted weight
    CHECK(mm.mask[1] == 0);  // saturated
    CHECK(mm.mask[2] == 0);  // transient weight too low
    CHECK(mm.mask[3] == 0);  // invalid sample
}

TEST_CASE("raising thresholds moves the flagged set monotonically") {
    Xoshiro256pp rng(27);
    Image frame(16, 16, 1);
    CodeImage ci;
    ci.values = Image(16, 16, 1);
    for (float& v : frame.data) v = static_cast<float>(rng.uniform01());
    for (float& v : ci.values.data) v = static_cast<float>(rng.uniform(-0.2, 0.2));

    ManipulationMask lo_floor = manipulation_mask(frame, ci, 0.25, 0.05);
    ManipulationMask hi_floor = manipulation_mask(frame, ci, 0.25, 0.15);
    for (std::size_t i = 0; i < lo_floor.mask.size(); ++i)
        if (lo_floor.mask[i]) CHECK(hi_floor.mask[i]);  // floor up -> superset

    ManipulationMask lo_bright = manipulation_mask(frame, ci, 0.2, 0.1);
    ManipulationMask hi_bright = manipulation_mask(frame, ci, 0.6, 0.1);
    for (std::size_t i = 0; i < hi_bright.mask.size(); ++i)
        if (hi_bright.mask[i]) CHECK(lo_bright.mask[i]);  // thresh up -> subset
}

TEST_CASE("replacing pixels with identical content flags nothing") {
    Sim s = coded_sim(13);

    // Per-step patch cloned from the original region: the edit is a no-op.
    FrameSequence patch(s.video.t, 16, 16, 1);
    for (int t = 0; t < s.video.t; ++t)
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x)
                patch.at(t, y, x, 0) = s.video.at(t, 24 + y, 24 + x, 0);
    EditLog log;
    FrameSequence tampered = composite(s.video, patch, 24, 24, 0, s.video.t, log);
    CHECK(tampered.data == s.video.data);

    CodeImage ci = code_image(tampered, s.code, full_window(tampered.t));
    const double floor =
        default_code_floor(s.nm.read_std, s.nm.photon_coeff, 0.5, s.code_rms, tampered.t, 1);
    Image frame(64, 64, 1);
    for (std::size_t i = 0; i < frame.size(); ++i) frame.data[i] = tampered.frame(128)[i];
    ManipulationMask mm = manipulation_mask(frame, ci, 0.25, floor);
    for (std::uint8_t m : mm.mask) CHECK(m == 0);
}

TEST_CASE("mask validates dimensions and floor sign") {
    Image frame(4, 4, 1, 0.5f);
    CodeImage ci;
    ci.values = Image(4, 5, 1, 0.5f);
    CHECK_THROWS_AS(manipulation_mask(frame, ci, 0.25, 0.1), std::invalid_argument);
    ci.values = Image(4, 4, 1, 0.5f);
    CHECK_THROWS_AS(manipulation_mask(frame, ci, 0.25, -0.1), std::invalid_argument);
}

TEST_CASE("montage lays out frame, code panels, and score panel") {
    Image frame(4, 6, 1, 0.5f);
    CodeImage ci;
    ci.values = Image(4, 6, 1);
    for (std::size_t i = 0; i < ci.values.size(); ++i)
        ci.values.data[i] = static_cast<float>(i) / 23.0f;
    ci.valid.assign(24, 1);
    ci.valid[5] = 0;

    ManipulationMask mm;
    mm.score_map = Image(4, 6, 1, 0.0f);
    mm.mask.assign(24, 0);
    mm.mask[7] = 1;

    Image panel3 = side_by_side_export(frame, {ci}, mm);
    CHECK(panel3.h == 4);
    CHECK(panel3.w == 18);  // three panels
    CHECK(panel3.c == 3);
    CHECK(panel3.at(0, 0, 0) == 0.5f);  // frame panel verbatim

    // Code panel: min/max normalized over valid samples, invalid black.
    CHECK(panel3.at(3, 6 + 5, 1) == doctest::Approx(1.0f));  // sample 23 = max
    CHECK(panel3.at(0, 6 + 5, 0) == 0.0f);                   // invalid sample 5

    // Score panel: flagged pixel forced red.
    CHECK(panel3.at(1, 12 + 1, 0) == 1.0f);
    CHECK(panel3.at(1, 12 + 1, 1) == 0.0f);
    CHECK(panel3.at(1, 12 + 1, 2) == 0.0f);

    Image panel4 = side_by_side_export(frame, {ci, ci}, mm);
    CHECK(panel4.w == 24);  // four panels

    Image bad(3, 6, 1, 0.0f);
    CodeImage bad_ci;
    bad_ci.values = bad;
    CHECK_THROWS_AS(side_by_side_export(frame, {bad_ci}, mm), std::invalid_argument);
}
