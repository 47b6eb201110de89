// Wall-clock comparison of the OpenMP kernels against their serial reference
// implementations; every pair is also checked for agreement so the benchmark
// doubles as a consistency run.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nci/codegen.hpp"
#include "nci/decode.hpp"
#include "nci/prng.hpp"
#include "nci/serial.hpp"
#include "nci/simulate.hpp"
#include "nci/temporal.hpp"
#include "nci/types.hpp"

namespace {

using namespace nci;

double best_of(int reps, const std::function<void()>& fn) {
    double best = 1e300;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

void report(const char* name, double par_ms, double ser_ms, bool ok) {
    std::printf("%-16s parallel %9.2f ms   serial %9.2f ms   speedup %5.2fx   %s\n", name,
                par_ms, ser_ms, ser_ms / par_ms, ok ? "agree" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"parallel-vs-serial kernel benchmark"};
    int size = 64, frames = 256, reps = 3, threads = 0;
    app.add_option("--size", size, "frame height and width");
    app.add_option("--frames", frames, "frame count");
    app.add_option("--reps", reps, "repetitions (best-of)");
    app.add_option("--threads", threads, "worker threads (0 = runtime default)");
    CLI11_PARSE(app, argc, argv);
    if (threads > 0) omp_set_num_threads(threads);

    std::printf("size %dx%d, %d frames, best of %d, %d threads\n", size, size, frames, reps,
                omp_get_max_threads());

    SceneModel scene;
    scene.base = Image(size, size, 1);
    Image alpha(size, size, 1);
    Xoshiro256pp rng(42);
    for (std::size_t i = 0; i < scene.base.size(); ++i) {
        scene.base.data[i] = static_cast<float>(0.2 + 0.6 * rng.uniform01());
        alpha.data[i] = static_cast<float>(0.1 + 0.5 * rng.uniform01());
    }
    scene.transport.push_back(alpha);
    CodeSpec spec;
    spec.master_seed = 7;
    NoiseModel noise;
    noise.read_std = 0.004;
    noise.photon_coeff = 0.01;
    noise.quant_bits = 8;

    bool all_ok = true;

    FrameSequence vp, vs;
    const double render_par = best_of(reps, [&] { vp = render(scene, spec, noise, 0, frames); });
    const double render_ser =
        best_of(reps, [&] { vs = serial::render(scene, spec, noise, 0, frames); });
    bool ok = vp.data == vs.data;
    all_ok = all_ok && ok;
    report("render", render_par, render_ser, ok);

    FrameSequence rp, rs;
    const double bil_par = best_of(reps, [&] { rp = bilateral_residual(vp); });
    const double bil_ser = best_of(reps, [&] { rs = serial::bilateral_residual(vp); });
    ok = rp.data == rs.data;
    all_ok = all_ok && ok;
    report("bilateral", bil_par, bil_ser, ok);

    std::vector<double> code = code_for_interval(spec, 0, frames, 0);
    AnalysisWindow win;
    win.t_center = frames / 2;
    win.w = frames;
    CodeImage cp, cs;
    const double ci_par = best_of(reps, [&] { cp = code_image(vp, code, win); });
    const double ci_ser = best_of(reps, [&] { cs = serial::code_image(vp, code, win); });
    ok = cp.values.data == cs.values.data;
    all_ok = all_ok && ok;
    report("code_image", ci_par, ci_ser, ok);

    std::vector<double> long_code = code_for_interval(spec, 0, 16 * 1024, 0);
    std::vector<double> trace = spatial_mean_trace(vp);
    const std::int64_t hi = static_cast<std::int64_t>(long_code.size()) -
                            static_cast<std::int64_t>(trace.size());
    std::vector<double> np, ns;
    const double ncc_par = best_of(reps, [&] { np = ncc_scan(trace, long_code, 0, hi); });
    const double ncc_ser =
        best_of(reps, [&] { ns = serial::ncc_scan_direct(trace, long_code, 0, hi); });
    ok = true;
    for (std::size_t i = 0; i < np.size(); ++i) ok = ok && std::abs(np[i] - ns[i]) <= 1e-6;
    all_ok = all_ok && ok;
    report("ncc_scan", ncc_par, ncc_ser, ok);

    std::vector<double> mat_code = code_for_interval(spec, 0, 2048, 0);
    AlignmentMatrix mp, ms;
    const double mat_par = best_of(reps, [&] { mp = alignment_matrix(vp, mat_code); });
    const double mat_ser =
        best_of(reps, [&] { ms = serial::alignment_matrix(trace, mat_code, 90, 15, -1); });
    ok = mp.num_offsets == ms.num_offsets && mp.num_cols == ms.num_cols;
    if (ok)
        for (std::size_t i = 0; i < mp.scores.size(); ++i)
            ok = ok && std::abs(mp.scores[i] - ms.scores[i]) <= 1e-6;
    all_ok = all_ok && ok;
    report("align_matrix", mat_par, mat_ser, ok);

    return all_ok ? 0 : 1;
}
